""" Tests for the kmfv command line interface """

import os
import tempfile

import numpy as np
import pytest
from numpy.testing import assert_array_equal

import kmfv
from kmfv import cli

from setup import SMALL_MODEL


def small_checkpoint(dirname, seed=0, lam=0.01):
    model = kmfv.nets.build_model(kmfv.nets.model_config(**SMALL_MODEL),
                                  seed=seed)
    fname = os.path.join(dirname, "lam%g.kmfp" % lam)
    kmfv.nets.save_model(fname, model, lam=lam)
    return fname


def synth_dir(dirname, name="seq", frames=6, seed=0):
    out = os.path.join(dirname, name)
    assert cli.dispatch(["synth", "--frames", str(frames), "--size", "32x32",
                         "--seed", str(seed), "--out", out]) == 0
    return out


def test_usage_errors(capsys):
    """ usage errors exit with status 1 """
    assert cli.dispatch([]) == 1
    assert cli.dispatch(["report", "--ks", "52"]) == 1
    assert cli.dispatch(["report", "--unknown-flag"]) == 1
    assert cli.dispatch(["train", "--lambda", "0.02", "--out", "x"]) == 1
    assert cli.dispatch(["synth", "--size", "64", "--out", "x"]) == 1
    assert cli.dispatch(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_data_errors(capsys):
    """ missing or malformed inputs exit with status 2 """
    with tempfile.TemporaryDirectory() as d:
        missing = os.path.join(d, "missing.kmfv")
        ckpt = small_checkpoint(d)
        assert cli.dispatch(["decode", "--in", missing, "--ckpt", ckpt,
                             "--out", os.path.join(d, "out")]) == 2
        junk = os.path.join(d, "junk.kmfv")
        with open(junk, "wb") as f:
            f.write(b"not a container at all")
        assert cli.dispatch(["decode", "--in", junk, "--ckpt", ckpt,
                             "--out", os.path.join(d, "out")]) == 2
        assert "bitstream error" in capsys.readouterr().err
        raw = os.path.join(d, "raw.yuv")
        with open(raw, "wb") as f:
            f.write(b"\x00" * 100)
        assert cli.dispatch(["encode", "--in", raw, "--ckpt", ckpt,
                             "--out", os.path.join(d, "a.kmfv")]) == 2


def test_report(capsys):
    """ the default model report lists the five module groups """
    assert cli.dispatch(["report"]) == 0
    out = capsys.readouterr().out
    for name in ("Image codec", "Frame interpolator",
                 "Six 1D kernel sub-networks", "Frame auto-encoder",
                 "Frame hyper-prior network", "Total"):
        assert name in out
    assert cli.dispatch(["report", "--no-interp"]) == 0
    out = capsys.readouterr().out
    assert "Four 1D kernel sub-networks" in out
    assert "Frame interpolator" not in out


def test_encode_decode(capsys):
    """ decoded frames match the encoder reconstructions """
    with tempfile.TemporaryDirectory() as d:
        seq = synth_dir(d, frames=9)
        ckpt = small_checkpoint(d)
        container = os.path.join(d, "seq.kmfv")
        recon = os.path.join(d, "recon")
        stats = os.path.join(d, "stats.csv")
        assert cli.dispatch(["encode", "--in", seq, "--ckpt", ckpt,
                             "--gop", "4", "--out", container,
                             "--recon", recon, "--stats", stats]) == 0
        decoded = os.path.join(d, "decoded")
        assert cli.dispatch(["decode", "--in", container, "--ckpt", ckpt,
                             "--out", decoded]) == 0
        _, rdata = kmfv.imgdir.read(recon)
        _, ddata = kmfv.imgdir.read(decoded)
        assert ddata.shape == (9, 3, 32, 32)
        assert_array_equal(ddata, rdata)

        _, rec = kmfv.table.read(stats)
        assert len(rec) == 9
        assert list(rec["display_index"][:3]) == [0, 4, 2]
        assert int(np.sum(rec["bits"])) == \
            kmfv.bitstream.payload_bits(kmfv.bitstream.read(container))

        # a second model cannot decode the container
        other = small_checkpoint(d, seed=1, lam=0.03)
        assert cli.dispatch(["decode", "--in", container, "--ckpt", other,
                             "--out", os.path.join(d, "other")]) == 2

        # manifests sit next to each output
        ckpt_id = "%08x" % kmfv.nets.load_model(ckpt).ckpt_id
        for where, names in ((d, ["encode"]), (seq, ["synth"]),
                             (decoded, ["decode"])):
            records = kmfv.manifest.read_manifest(
                os.path.join(where, kmfv.manifest.MANIFEST_NAME))
            assert [r["subcommand"] for r in records] == names
        assert records[0]["checkpoints"]["codec"] == ckpt_id


def test_print_schedule(capsys):
    assert cli.dispatch(["encode", "--print-schedule", "--frames", "9"]) == 0
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == 11
    assert cli.dispatch(["encode", "--print-schedule"]) == 2


def test_eval_and_bdrate(capsys):
    """ evaluation tables feed the BD-rate command """
    with tempfile.TemporaryDirectory() as d:
        seq = synth_dir(d, frames=5)
        ckpts = [small_checkpoint(d, seed=i, lam=lam)
                 for i, lam in enumerate((0.005, 0.01, 0.03))]
        csv = os.path.join(d, "rd.csv")
        assert cli.dispatch(["eval", "--ckpts"] + ckpts +
                            ["--seqs", seq, "--gop", "4", "--csv", csv]) == 0
        out = capsys.readouterr().out
        assert "kmfv-intra" in out
        _, rec = kmfv.table.read(csv)
        assert len(rec) == 6
        assert cli.dispatch(["bdrate", "--anchor", csv, "--test", csv]) == 2
        assert cli.dispatch(["bdrate", "--anchor", csv, "--test", csv,
                             "--anchor-codec", "kmfv", "--test-codec",
                             "kmfv"]) == 0
        out = capsys.readouterr().out
        assert "mean" in out and "0.00%" in out


def test_train_with_config(capsys):
    """ a short training run configured by file and flags """
    with tempfile.TemporaryDirectory() as d:
        config = os.path.join(d, "train.cfg")
        model = dict(("model.%s" % k, v) for k, v in SMALL_MODEL.items())
        kmfv.fileiobase.write_config(config, dict(
            steps=2, batch_size=1, patch=32, ckpt_every=0, **model))
        out = os.path.join(d, "run")
        assert cli.dispatch(["train", "--lambda", "0.01", "--config", config,
                             "--synthetic", "1", "--steps", "1",
                             "--print-schedule", "--out", out]) == 0
        text = capsys.readouterr().out
        assert "0.0085" in text
        model = kmfv.nets.load_model(os.path.join(out, "final.kmfp"))
        assert model.cfg["KS"] == 5 and model.lam == 0.01
        _, rec = kmfv.table.read(os.path.join(out, "metrics.csv"))
        assert len(rec) == 3
        records = kmfv.manifest.read_manifest(
            os.path.join(out, kmfv.manifest.MANIFEST_NAME))
        assert records[0]["config"]["steps"] == 1
        assert records[0]["config"]["base_lambda"] == 0.01
