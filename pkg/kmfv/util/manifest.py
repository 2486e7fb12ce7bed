"""
Run manifests.

Every mutating command appends one JSON record to ``kmfv_manifest.jsonl``
in its output directory.  A record holds the subcommand, the command line,
the resolved configuration, the seed, the ids of the checkpoints read and
written, the package version (and git revision when available) and start
and finish timestamps.  Records are never rewritten.
"""

import datetime
import json
import os
import subprocess

MANIFEST_NAME = "kmfv_manifest.jsonl"


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _git_revision():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             cwd=here, capture_output=True, text=True,
                             timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def manifest_path(outpath):
    """
    Manifest file for an output file or directory.
    """
    if os.path.isdir(outpath):
        return os.path.join(outpath, MANIFEST_NAME)
    return os.path.join(os.path.dirname(os.path.abspath(outpath)),
                        MANIFEST_NAME)


class RunManifest(object):
    """
    Manifest record of one command run.

    Parameters
    ----------
    subcommand : str
        Name of the command.
    argv : list of str
        Command line arguments.
    config : dict
        Resolved configuration.
    seed : int or None
        Random seed.

    """

    def __init__(self, subcommand, argv, config, seed=None):
        from .. import __version__
        self.record = {"subcommand": subcommand,
                       "argv": list(argv),
                       "config": config,
                       "seed": seed,
                       "checkpoints": {},
                       "outputs": [],
                       "version": __version__,
                       "git": _git_revision(),
                       "started": _now(),
                       "finished": None,
                       "status": "running"}

    def add_checkpoint(self, role, ckpt_id):
        """
        Record the id of a checkpoint read or written, as 8 hex digits.
        """
        self.record["checkpoints"][role] = "%08x" % ckpt_id

    def add_output(self, filename):
        self.record["outputs"].append(os.path.abspath(filename))

    def finish(self, outpath, status="ok"):
        """
        Stamp the finish time and append the record next to outpath.
        """
        self.record["finished"] = _now()
        self.record["status"] = status
        filename = manifest_path(outpath)
        directory = os.path.dirname(filename)
        if directory and not os.path.isdir(directory):
            os.makedirs(directory)
        with open(filename, "a") as f:
            f.write(json.dumps(self.record, sort_keys=True,
                               default=_jsonable) + "\n")
        return filename


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError("%r is not JSON serializable" % (obj,))


def read_manifest(filename):
    """
    Read all records of a manifest file, oldest first.
    """
    with open(filename, "r") as f:
        return [json.loads(line) for line in f if line.strip()]
