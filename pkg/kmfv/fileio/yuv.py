"""
Functions for reading and writing raw planar 8-bit YUV420 video files.

Frames are converted to and from RGB in [0, 1] with the BT.709
limited-range (studio swing) matrix.
"""

__developer_info__ = """
Raw YUV420 file format information
^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^

A raw .yuv file is a headerless concatenation of frames.  Each frame holds a
full resolution Y plane followed by the U and V planes at half resolution in
both directions, one byte per sample, row-major.  A frame of width w and
height h therefore occupies w * h * 3 / 2 bytes.  Width and height are not
stored in the file and must be supplied by the caller.

"""

import os
from warnings import warn

import numpy as np

from . import fileiobase

# BT.709 luma coefficients
KR = 0.2126
KB = 0.0722
KG = 1.0 - KR - KB

# limited range code values for 8-bit video
Y_OFFSET = 16.0
Y_RANGE = 219.0
C_OFFSET = 128.0
C_RANGE = 224.0


def rgb_to_yuv(rgb):
    """
    Convert RGB in [0, 1] to BT.709 limited-range Y, U, V code values.

    Parameters
    ----------
    rgb : ndarray
        Array with the color channel on axis -3, shape (..., 3, H, W).

    Returns
    -------
    yuv : ndarray
        float64 array of the same shape holding Y, U (Cb), V (Cr) code values
        on the 8-bit scale, not rounded.

    """
    rgb = np.asarray(rgb, dtype='float64')
    r, g, b = rgb[..., 0, :, :], rgb[..., 1, :, :], rgb[..., 2, :, :]
    yp = KR * r + KG * g + KB * b
    pb = (b - yp) / (2.0 * (1.0 - KB))
    pr = (r - yp) / (2.0 * (1.0 - KR))
    return np.stack([Y_OFFSET + Y_RANGE * yp,
                     C_OFFSET + C_RANGE * pb,
                     C_OFFSET + C_RANGE * pr], axis=-3)


def yuv_to_rgb(yuv):
    """
    Convert BT.709 limited-range Y, U, V code values to RGB.

    The result is not clipped, out of gamut inputs give values outside
    [0, 1].  See :py:func:`rgb_to_yuv` for the array layout.
    """
    yuv = np.asarray(yuv, dtype='float64')
    yp = (yuv[..., 0, :, :] - Y_OFFSET) / Y_RANGE
    pb = (yuv[..., 1, :, :] - C_OFFSET) / C_RANGE
    pr = (yuv[..., 2, :, :] - C_OFFSET) / C_RANGE
    r = yp + 2.0 * (1.0 - KR) * pr
    b = yp + 2.0 * (1.0 - KB) * pb
    g = (yp - KR * r - KB * b) / KG
    return np.stack([r, g, b], axis=-3)


def frame_bytes(width, height):
    """
    Number of bytes of one 8-bit YUV420 frame.
    """
    return width * height * 3 // 2


def _check_dims(width, height):
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    if width % 2 or height % 2:
        raise ValueError("YUV420 width and height must be even, got %dx%d" %
                         (width, height))


def load_yuv420(filename, width, height, max_frames=None, fps=30.0):
    """
    Read a raw 8-bit YUV420 file and convert it to RGB.

    Parameters
    ----------
    filename : str
        Filename of the raw YUV420 file.
    width, height : int
        Frame dimensions in pixels, both even.
    max_frames : int, optional
        Number of frames to read.  None reads every whole frame in the file.
    fps : float, optional
        Frame rate recorded in the video dictionary.

    Returns
    -------
    vdic : dict
        Video dictionary.
    data : ndarray
        float32 array of shape (T, 3, height, width) with values in [0, 1].

    Raises
    ------
    IOError
        When the file holds fewer bytes than ``max_frames`` frames need.
    ValueError
        When width or height is odd.

    See Also
    --------
    write_yuv420 : Write a raw YUV420 file.

    """
    _check_dims(width, height)
    fsize = frame_bytes(width, height)
    nbytes = os.stat(filename).st_size

    if max_frames is None:
        nframes = nbytes // fsize
        if nbytes % fsize:
            warn('%s: %d trailing bytes ignored' % (filename, nbytes % fsize))
    else:
        nframes = int(max_frames)
        if nbytes < nframes * fsize:
            raise IOError("truncated YUV file %s: expected at least %d bytes "
                          "for %d frames, found %d" %
                          (filename, nframes * fsize, nframes, nbytes))

    raw = np.fromfile(filename, dtype='uint8', count=nframes * fsize)
    raw = raw.reshape(nframes, fsize)

    ysize = width * height
    csize = ysize // 4
    y = raw[:, :ysize].reshape(nframes, height, width)
    u = raw[:, ysize:ysize + csize].reshape(nframes, height // 2, width // 2)
    v = raw[:, ysize + csize:].reshape(nframes, height // 2, width // 2)

    # nearest neighbour chroma upsampling
    u = u.repeat(2, axis=1).repeat(2, axis=2)
    v = v.repeat(2, axis=1).repeat(2, axis=2)

    rgb = yuv_to_rgb(np.stack([y, u, v], axis=1))
    data = np.clip(rgb, 0.0, 1.0).astype('float32')
    fileiobase.check_frames(data)

    vdic = fileiobase.create_blank_vdic(width, height, nframes, fps,
                                        "YUV420-source")
    vdic["source"] = filename
    return vdic, data


def write_yuv420(filename, vdic, data, overwrite=False):
    """
    Write RGB frames to a raw 8-bit YUV420 file.

    Chroma is subsampled with a 2x2 box average; code values are rounded and
    clipped to [0, 255].

    Parameters
    ----------
    filename : str
        Filename of file to write to.
    vdic : dict
        Video dictionary (only used for consistency checks).
    data : ndarray
        Array of shape (T, 3, H, W) with values in [0, 1].
    overwrite : bool, optional
        Set True to overwrite an existing file.

    """
    data = np.asarray(data)
    t, _, h, w = data.shape
    _check_dims(w, h)
    if vdic is not None and (vdic["width"], vdic["height"]) != (w, h):
        raise ValueError("video dictionary does not match data shape")

    yuv = rgb_to_yuv(data)
    y = yuv[:, 0]
    c = yuv[:, 1:].reshape(t, 2, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def _u8(x):
        return np.clip(np.round(x), 0, 255).astype('uint8')

    with fileiobase.open_towrite(filename, overwrite) as f:
        for i in range(t):
            f.write(_u8(y[i]).tobytes())
            f.write(_u8(c[i, 0]).tobytes())
            f.write(_u8(c[i, 1]).tobytes())
