"""
Misc. functions for comparing video data and dictionaries.
"""

import numpy as np

# default tolerances, frames are compared exactly unless asked otherwise
ATOL = 0.0
RTOL = 0.0
DTOL = 1e-9


def pair_similar(dic1, data1, dic2, data2, verb=False, atol=ATOL, rtol=RTOL,
                 dtol=DTOL, ignore=("source",)):
    """
    Check a (vdic, data) pair against a second pair for differences.

    Parameters
    ----------
    dic1, dic2 : dict
        Video dictionaries.
    data1, data2 : ndarray
        Frame arrays.
    verb : bool, optional
        Set True for verbose reporting.
    atol, rtol : float, optional
        Tolerances passed to numpy.allclose, exact by default.
    dtol : float, optional
        Allowed difference of numeric dictionary values.
    ignore : tuple of str
        Dictionary keys left out of the comparison.

    Returns
    -------
    r1 : bool
        True if data1 and data2 are similar.
    r2 : bool
        True if dic1 and dic2 are similar.

    """
    r1 = isdatasimilar(data1, data2, verb, atol, rtol)
    d1 = dict((k, v) for k, v in dic1.items() if k not in ignore)
    d2 = dict((k, v) for k, v in dic2.items() if k not in ignore)
    r2 = isdicsimilar(d1, d2, verb, dtol)
    return r1, r2


def isdatasimilar(data1, data2, verb=False, atol=ATOL, rtol=RTOL):
    """
    Check that two frame arrays are equal within a tolerance.
    """
    data1 = np.asarray(data1)
    data2 = np.asarray(data2)
    if data1.dtype != data2.dtype:
        if verb:
            print("Dtypes do not match:", data1.dtype, data2.dtype)
        return False
    if data1.shape != data2.shape:
        if verb:
            print("Shapes do not match:", data1.shape, data2.shape)
        return False
    if not np.allclose(data1, data2, rtol=rtol, atol=atol):
        if verb:
            print("Data does not match, max abs difference",
                  max_abs_diff(data1, data2))
        return False
    return True


def max_abs_diff(data1, data2):
    """
    Largest absolute difference of two arrays, in float64.
    """
    d = np.asarray(data1, dtype=np.float64) - np.asarray(data2,
                                                          dtype=np.float64)
    return float(np.max(np.abs(d))) if d.size else 0.0


def ulp_diff(data1, data2):
    """
    Largest distance in units of least precision of two float32 arrays.

    Zero means the arrays are bit-identical (up to the sign of zero).
    """
    a = np.ascontiguousarray(data1, dtype=np.float32).view(np.int32)
    b = np.ascontiguousarray(data2, dtype=np.float32).view(np.int32)
    # map the sign-magnitude ordering onto two's complement
    a = np.where(a < 0, np.int64(-2 ** 31) - a, a).astype(np.int64)
    b = np.where(b < 0, np.int64(-2 ** 31) - b, b).astype(np.int64)
    return int(np.max(np.abs(a - b))) if a.size else 0


def isitemsimilar(v1, v2, verb=False, dtol=DTOL):
    """
    Compare two values for differences.

    See :py:func:`isdicsimilar` for Parameters.
    """
    if isinstance(v1, bool) or isinstance(v2, bool):
        r = v1 is v2
    elif isinstance(v1, (int, float)) and isinstance(v2, (int, float)):
        r = abs(v1 - v2) <= dtol
    elif type(v1) != type(v2):
        r = False
    elif isinstance(v1, dict):
        return isdicsimilar(v1, v2, verb=verb, dtol=dtol)
    elif isinstance(v1, (list, tuple)):
        return (len(v1) == len(v2) and
                all(isitemsimilar(a, b, verb, dtol) for a, b in zip(v1, v2)))
    else:
        r = v1 == v2
    if not r and verb:
        print("Item mismatch:", v1, v2)
    return r


def isdicsimilar(dic1, dic2, verb=False, dtol=DTOL):
    """
    Compare two dictionaries for differences.

    Numeric values are compared within dtol, lists and dictionaries are
    checked recursively and all others by simple equality.
    """
    r = True
    missing = set(dic1) ^ set(dic2)
    if missing:
        r = False
        if verb:
            print("Keys not in both dictionaries:", missing)
    for k in set(dic1) & set(dic2):
        if not isitemsimilar(dic1[k], dic2[k], verb=verb, dtol=dtol):
            if verb:
                print("For key:", k)
            r = False
    return r
