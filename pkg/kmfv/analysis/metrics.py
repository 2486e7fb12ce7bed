"""
Quality and rate measurements on frames and containers.
"""

import numpy as np

PSNR_CAP = 100.0


def mse(a, b):
    """
    Mean squared error of two equally shaped arrays, in float64.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shapes differ: %s vs %s" % (a.shape, b.shape))
    return float(np.mean(np.square(a - b)))


def rgb_psnr(a, b, cap=PSNR_CAP):
    """
    Peak signal to noise ratio in dB of [0, 1] valued RGB data.

    .. math::
        psnr = 10 \\log_{10}(1 / mse)

    Identical inputs return ``cap`` (100 dB).
    """
    e = mse(a, b)
    if e == 0:
        return float(cap)
    return float(min(cap, 10 * np.log10(1.0 / e)))


def sequence_psnr(orig, recon):
    """
    Mean of the per-frame PSNR of two [T, 3, H, W] arrays.
    """
    if orig.shape != recon.shape:
        raise ValueError("shapes differ: %s vs %s" %
                         (orig.shape, recon.shape))
    return float(np.mean([rgb_psnr(a, b) for a, b in zip(orig, recon)]))


def bpp(cdic):
    """
    Bits per pixel of a container: payload bits / (width * height * frames).
    """
    pixels = cdic["width"] * cdic["height"] * cdic["frame_count"]
    bits = 8 * sum(len(s["z"]) + len(s["y"]) for s in cdic["steps"])
    return bits / pixels


def frame_label(stat):
    if stat["frame_type"] == "I":
        return "I"
    return "B-L%d" % stat["level"]


def type_summary(stats, pixels=None):
    """
    Mean bits, estimated bits and PSNR per frame type and level.

    ``stats`` are the per-frame records of
    :func:`kmfv.process.codec.encode_video`.  When ``pixels`` is given the
    means are also reported in bits per pixel.
    """
    out = dict()
    for label in sorted(set(frame_label(s) for s in stats)):
        sel = [s for s in stats if frame_label(s) == label]
        row = {"frames": len(sel),
               "bits": float(np.mean([s["bits"] for s in sel])),
               "est_bits": float(np.mean([s["est_bits"] for s in sel])),
               "psnr": float(np.mean([s["psnr"] for s in sel]))}
        if pixels:
            row["bpp"] = row["bits"] / pixels
        out[label] = row
    return out
