""" Tests for kmfv/analysis/report.py """

import numpy as np
import pytest

from kmfv.analysis import report
from kmfv.process import nets
from kmfv.process import sepconv


def small_model(**kw):
    args = dict(M=16, N=8, K=8, KS=5, downsample_stages=2, interp_base=4)
    args.update(kw)
    return nets.build_model(nets.model_config(**args), seed=0)


def test_parameter_report():
    """ five groups whose shares add up to 100 percent """
    model = small_model()
    rec = report.parameter_report(model)
    assert list(rec["module"]) == list(model.parameter_groups())
    assert len(rec) == 5
    assert np.sum(rec["share"]) == pytest.approx(100.0)
    assert int(np.sum(rec["params"])) == \
        sum(p.numel() for p in model.parameters())
    assert np.all(rec["params"] > 0)


def test_kernel_size_share():
    def heads(ks):
        rec = report.parameter_report(small_model(KS=ks))
        return int(rec["params"][rec["module"] == "Six 1D kernel "
                                 "sub-networks"][0])
    assert heads(51) > heads(31)


def test_macs_per_pixel():
    model = small_model()
    macs = report.macs_per_pixel(model, 32, 32)
    assert list(macs) == list(model.parameter_groups()) + \
        ["Kernel synthesis"]
    assert all(v > 0 for v in macs.values())
    assert macs["Kernel synthesis"] == pytest.approx(
        sepconv.synthesis_macs(32, 32, 5, 3) / (32. * 32))
    four = small_model(use_interpolator=False)
    assert "Frame interpolator" not in report.macs_per_pixel(four, 32, 32)


def test_format_report():
    model = small_model()
    rec = report.parameter_report(model)
    text = report.format_report(rec)
    lines = text.splitlines()
    assert len(lines) == 7
    assert lines[-1].startswith("Total")
    assert "Frame hyper-prior network" in text
    text = report.format_report(rec, report.macs_per_pixel(model, 32, 32))
    assert "MACs/pixel" in text.splitlines()[0]
    assert text.splitlines()[-1].startswith("Kernel synthesis")
