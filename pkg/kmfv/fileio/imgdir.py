"""
Functions for reading and writing lossless RGB image sequences stored as a
directory of PNG files named frame_00000.png, frame_00001.png, ...
"""

import glob
import os

import numpy as np
from PIL import Image

from . import fileiobase

FRAME_PATTERN = "frame_%05d.png"


def read(dirname, max_frames=None, fps=30.0):
    """
    Read a directory of PNG frames.

    Parameters
    ----------
    dirname : str
        Directory holding frame_%05d.png files numbered from 0.
    max_frames : int, optional
        Maximum number of frames to read, None for all.
    fps : float, optional
        Frame rate recorded in the video dictionary.

    Returns
    -------
    vdic : dict
        Video dictionary.
    data : ndarray
        float32 array of shape (T, 3, H, W) with values in [0, 1].

    """
    files = sorted(glob.glob(os.path.join(dirname, "frame_*.png")))
    if max_frames is not None:
        files = files[:max_frames]
    if len(files) == 0:
        raise IOError("no frame_*.png files in %s" % dirname)

    frames = []
    for fname in files:
        with Image.open(fname) as im:
            arr = np.asarray(im.convert("RGB"), dtype='float32') / 255.0
        frames.append(arr.transpose(2, 0, 1))
    shapes = set(f.shape for f in frames)
    if len(shapes) != 1:
        raise ValueError("frames in %s differ in size: %s" % (dirname, shapes))

    data = np.stack(frames)
    vdic = fileiobase.guess_vdic(data, fps=fps)
    vdic["source"] = dirname
    return vdic, data


def write(dirname, vdic, data, overwrite=False):
    """
    Write frames as 8-bit PNG files into dirname.

    Values are clipped to [0, 1] and rounded to 8 bit.
    """
    data = np.asarray(data)
    if not os.path.exists(dirname):
        os.makedirs(dirname)
    for i, frame in enumerate(data):
        fname = os.path.join(dirname, FRAME_PATTERN % i)
        if os.path.exists(fname) and overwrite is False:
            raise IOError("File exists, recall with overwrite=True")
        u8 = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype('uint8')
        Image.fromarray(u8.transpose(1, 2, 0)).save(fname)
