"""
fileiobase provides general purpose file IO functions used by multiple
kmfv.fileio modules: video dictionaries, safe file creation and key = value
configuration files.
"""

import os
import tempfile

import numpy as np


COLORSPACES = ("RGB", "YUV420-source")


def create_blank_vdic(width=0, height=0, nframes=0, fps=30.0,
                      colorspace="RGB"):
    """
    Create a blank video dictionary.

    A video dictionary describes the ``data`` array of a (vdic, data) pair,
    where data is a float32 array of shape (nframes, 3, height, width) with
    values in [0, 1].
    """
    if colorspace not in COLORSPACES:
        raise ValueError("colorspace must be RGB or YUV420-source")
    vdic = dict()
    vdic["width"] = int(width)          # pixels
    vdic["height"] = int(height)        # pixels
    vdic["nframes"] = int(nframes)
    vdic["fps"] = float(fps)            # frames per second
    vdic["colorspace"] = colorspace     # colorspace of the source material
    vdic["source"] = ""                 # filename or generator description
    return vdic


def guess_vdic(data, fps=30.0, colorspace="RGB"):
    """
    Guess a video dictionary from a data array of shape (T, 3, H, W).
    """
    data = np.asarray(data)
    if data.ndim != 4 or data.shape[1] != 3:
        raise ValueError("data must have shape (T, 3, H, W)")
    t, _, h, w = data.shape
    return create_blank_vdic(w, h, t, fps, colorspace)


def check_frames(data):
    """
    Check the Frame invariants of a (T, 3, H, W) or (3, H, W) array.

    Raises ValueError when values fall outside [0, 1] or are not finite.
    """
    data = np.asarray(data)
    if data.ndim not in (3, 4) or data.shape[-3] != 3:
        raise ValueError("frames must have shape (..., 3, H, W)")
    if not np.all(np.isfinite(data)):
        raise ValueError("frames contain non-finite values")
    if data.size and (data.min() < 0.0 or data.max() > 1.0):
        raise ValueError("frame values outside [0, 1]: min %g max %g" %
                         (data.min(), data.max()))
    return True


def open_towrite(filename, overwrite=False, mode='wb'):
    """
    Open filename for writing and return file object

    Function checks if file exists (and raises IOError if overwrite=False) and
    creates necessary directories as needed.
    """
    if os.path.exists(filename) and (overwrite is False):
        raise IOError("File exists, recall with overwrite=True")

    p, fn = os.path.split(filename)
    if p != '' and os.path.exists(p) is False:
        os.makedirs(p)

    return open(filename, mode)


def write_atomic(filename, payload, overwrite=False):
    """
    Write bytes to filename through a temporary file and a rename.

    Readers never observe a partially written file.
    """
    if os.path.exists(filename) and (overwrite is False):
        raise IOError("File exists, recall with overwrite=True")
    p = os.path.dirname(os.path.abspath(filename))
    if not os.path.exists(p):
        os.makedirs(p)
    fd, tmp = tempfile.mkstemp(dir=p, prefix=".tmp-")
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.replace(tmp, filename)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


# key = value configuration files
def _parse_value(s):
    """
    Convert a configuration string to bool, int, float or str.
    """
    s = s.strip()
    if s.lower() in ("true", "yes", "on"):
        return True
    if s.lower() in ("false", "no", "off"):
        return False
    if s.lower() in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s.strip('"').strip("'")


def read_config(filename):
    """
    Read a key = value configuration file.

    Lines starting with # are comments.  Dotted keys (``model.KS = 51``)
    create nested dictionaries.

    Parameters
    ----------
    filename : str
        Configuration file to read.

    Returns
    -------
    dic : dict
        Dictionary of configuration values.

    """
    dic = dict()
    with open(filename, 'r') as f:
        for n, line in enumerate(f):
            line = line.split('#', 1)[0].strip()
            if line == '':
                continue
            if '=' not in line:
                raise ValueError("%s:%d: expected key = value" %
                                 (filename, n + 1))
            key, value = line.split('=', 1)
            node = dic
            parts = key.strip().split('.')
            for part in parts[:-1]:
                node = node.setdefault(part, dict())
            node[parts[-1]] = _parse_value(value)
    return dic


def write_config(filename, dic, overwrite=False):
    """
    Write a (possibly nested) dictionary as a key = value configuration file.
    """
    lines = []

    def _walk(d, prefix):
        for key in sorted(d):
            if isinstance(d[key], dict):
                _walk(d[key], prefix + key + '.')
            else:
                lines.append("%s%s = %s\n" % (prefix, key, d[key]))

    _walk(dic, '')
    with open_towrite(filename, overwrite, mode='w') as f:
        f.writelines(lines)
