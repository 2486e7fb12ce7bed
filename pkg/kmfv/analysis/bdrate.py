"""
Bjontegaard delta rate between two rate-distortion curves.

Log10 rate is interpolated as a piecewise cubic (PCHIP) function of PSNR
and the difference between the two interpolants is averaged over the
common PSNR interval.  Negative values mean the test curve needs less rate
for the same quality.
"""

import numpy as np
import scipy.integrate
from scipy.interpolate import PchipInterpolator

MIN_POINTS = 3


def _prepare(curve, name):
    rate, psnr = (np.asarray(v, dtype=np.float64) for v in curve)
    if rate.shape != psnr.shape or rate.ndim != 1:
        raise ValueError("%s curve needs equal length rate and psnr arrays"
                         % name)
    if rate.size < MIN_POINTS:
        raise ValueError("%s curve has %d points, BD-rate needs at least %d"
                         % (name, rate.size, MIN_POINTS))
    if np.any(rate <= 0):
        raise ValueError("%s curve has non-positive rates" % name)
    order = np.argsort(psnr)
    psnr = psnr[order]
    if np.any(np.diff(psnr) <= 0):
        raise ValueError("%s curve has repeated PSNR values" % name)
    return psnr, np.log10(rate[order])


def _interpolants(anchor, test):
    pa, ra = _prepare(anchor, "anchor")
    pt, rt = _prepare(test, "test")
    lo = max(pa[0], pt[0])
    hi = min(pa[-1], pt[-1])
    if not hi > lo:
        raise ValueError("curves do not overlap in PSNR (%.3f..%.3f vs "
                         "%.3f..%.3f)" % (pa[0], pa[-1], pt[0], pt[-1]))
    return PchipInterpolator(pa, ra), PchipInterpolator(pt, rt), lo, hi


def bd_rate(anchor, test):
    """
    BD-rate of test against anchor in percent.

    Parameters
    ----------
    anchor, test : (rates, psnrs)
        Curves of at least 3 points, rates positive (for example bpp).

    Returns
    -------
    percent : float
        Average rate difference at equal PSNR.

    """
    fa, ft, lo, hi = _interpolants(anchor, test)
    avg = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo)
    return float((10 ** avg - 1) * 100)


def bd_rate_oracle(anchor, test, step=1e-4):
    """
    BD-rate with trapezoid integration on a dense PSNR grid.

    Cross-check of :func:`bd_rate` using the same interpolants.
    """
    fa, ft, lo, hi = _interpolants(anchor, test)
    n = int(np.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    diff = scipy.integrate.trapezoid(ft(grid) - fa(grid), grid)
    return float((10 ** (diff / (hi - lo)) - 1) * 100)


def curves_from_table(rec, codec):
    """
    Per-sequence (bpp, psnr) curves of one codec from an RD table.

    ``rec`` is a records array with fields sequence, codec, lambda, bpp
    and psnr_rgb.  Curves are sorted by rate.
    """
    sel = rec[np.asarray(rec["codec"]).astype(str) == codec]
    curves = dict()
    for seq in sorted(set(np.asarray(sel["sequence"]).astype(str))):
        s = sel[np.asarray(sel["sequence"]).astype(str) == seq]
        order = np.argsort(s["bpp"])
        curves[seq] = (np.asarray(s["bpp"], dtype=np.float64)[order],
                       np.asarray(s["psnr_rgb"], dtype=np.float64)[order])
    return curves


def average_curve(curves):
    """
    Dataset average curve: mean rate and PSNR at each rate point index.

    All curves must have the same number of points (one per lambda).
    """
    n = set(len(c[0]) for c in curves.values())
    if len(n) != 1:
        raise ValueError("curves have different numbers of points")
    rates = np.mean([c[0] for c in curves.values()], axis=0)
    psnrs = np.mean([c[1] for c in curves.values()], axis=0)
    return rates, psnrs


def compare(anchor_curves, test_curves):
    """
    BD-rates of matching sequences.

    Returns a dictionary of per-sequence BD-rates plus ``mean`` (average of
    the per-sequence values) and ``average-curve`` (BD-rate between the
    dataset average curves).
    """
    common = sorted(set(anchor_curves) & set(test_curves))
    if not common:
        raise ValueError("no sequence in common between the two tables")
    out = dict()
    for seq in common:
        out[seq] = bd_rate(anchor_curves[seq], test_curves[seq])
    out["mean"] = float(np.mean([out[s] for s in common]))
    out["average-curve"] = bd_rate(
        average_curve({s: anchor_curves[s] for s in common}),
        average_curve({s: test_curves[s] for s in common}))
    return out
