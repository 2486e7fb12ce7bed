""" Tests for kmfv/analysis/bdrate.py """

import numpy as np
import pytest

from kmfv.analysis import bdrate
from kmfv.fileio import table

ANCHOR = (np.array([0.1, 0.2, 0.4, 0.8]), np.array([30.0, 33.0, 35.5, 38.0]))


def test_self_is_zero():
    assert bdrate.bd_rate(ANCHOR, ANCHOR) == pytest.approx(0.0, abs=1e-9)


def test_half_rate():
    """ the same quality at half the rate is -50 percent """
    test = (ANCHOR[0] / 2, ANCHOR[1])
    assert bdrate.bd_rate(ANCHOR, test) == pytest.approx(-50.0, abs=0.1)
    assert bdrate.bd_rate(test, ANCHOR) == pytest.approx(100.0, abs=0.2)


def test_oracle_agreement():
    """ closed form and dense trapezoid integration agree """
    test = (np.array([0.09, 0.21, 0.35, 0.7, 1.1]),
            np.array([30.5, 33.8, 35.9, 38.2, 39.5]))
    exact = bdrate.bd_rate(ANCHOR, test)
    oracle = bdrate.bd_rate_oracle(ANCHOR, test)
    assert abs(exact - oracle) <= 0.0005 * max(abs(exact), 1.0)


def test_errors():
    with pytest.raises(ValueError):
        bdrate.bd_rate(ANCHOR, ([0.1, 0.2], [30.0, 31.0]))
    with pytest.raises(ValueError):
        bdrate.bd_rate(ANCHOR, ([1.0, 2.0, 3.0], [40.0, 41.0, 42.0]))
    with pytest.raises(ValueError):
        bdrate.bd_rate(ANCHOR, ([0.1, 0.2, 0.3], [31.0, 31.0, 32.0]))
    with pytest.raises(ValueError):
        bdrate.bd_rate(ANCHOR, ([0.0, 0.2, 0.3], [31.0, 32.0, 33.0]))
    with pytest.raises(ValueError):
        bdrate.bd_rate(ANCHOR, ([0.1, 0.2, 0.3], [31.0, 32.0]))


def _rec(codec, scale):
    rows = []
    for seq in ("a", "b"):
        for lam, r, p in zip((0.005, 0.01, 0.03, 0.05), ANCHOR[0],
                             ANCHOR[1]):
            rows.append((seq, codec, lam, r * scale, p))
    return table.make_table(rows, ("sequence", "codec", "lambda", "bpp",
                                   "psnr_rgb"),
                            ("U8", "U8", "f8", "f8", "f8"))


def test_curves_and_compare():
    rec = np.concatenate([_rec("x", 1.0), _rec("y", 0.5)]).view(np.recarray)
    anchor = bdrate.curves_from_table(rec, "x")
    test = bdrate.curves_from_table(rec, "y")
    assert sorted(anchor) == ["a", "b"]
    assert len(anchor["a"][0]) == 4
    assert np.all(np.diff(anchor["a"][0]) > 0)
    out = bdrate.compare(anchor, test)
    assert sorted(out) == ["a", "average-curve", "b", "mean"]
    for k in out:
        assert out[k] == pytest.approx(-50.0, abs=0.1)
    assert bdrate.curves_from_table(rec, "z") == {}
    with pytest.raises(ValueError):
        bdrate.compare(anchor, {"c": anchor["a"]})


def test_average_curve():
    curves = {"a": (np.array([1.0, 2.0, 3.0]), np.array([30., 32., 34.])),
              "b": (np.array([3.0, 4.0, 5.0]), np.array([32., 34., 36.]))}
    rate, psnr = bdrate.average_curve(curves)
    assert list(rate) == [2.0, 3.0, 4.0]
    assert list(psnr) == [31.0, 33.0, 35.0]
    curves["c"] = (np.array([1.0]), np.array([30.0]))
    with pytest.raises(ValueError):
        bdrate.average_curve(curves)
