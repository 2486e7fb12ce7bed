""" Tests for kmfv/process/gop.py, hierarchical coding schedules """

import pytest

from kmfv.process import gop


def _order(schedule):
    return [s["display_index"] for s in schedule["steps"]]


def _levels(schedule):
    return dict((s["display_index"], s["level"]) for s in schedule["steps"])


def test_gop8_order_and_levels():
    """ nine frames at GoP 8 """
    sched = gop.build_schedule(9, 8)
    assert _order(sched) == [0, 8, 4, 2, 1, 3, 6, 5, 7]
    assert _levels(sched) == {0: 0, 8: 0, 4: 1, 2: 2, 6: 2, 1: 2, 3: 2,
                              5: 2, 7: 2}
    steps = dict((s["display_index"], s) for s in sched["steps"])
    assert (steps[4]["ref_prev"], steps[4]["ref_next"]) == (0, 8)
    assert (steps[1]["ref_prev"], steps[1]["ref_next"]) == (0, 2)
    assert steps[1]["depth"] == 3
    assert [s["coding_order"] for s in sched["steps"]] == list(range(9))


def test_training_schedule():
    """ I0 B2 B1 B2 I0 in display order, coded 0, 4, 2, 1, 3 """
    sched = gop.training_schedule()
    assert _order(sched) == [0, 4, 2, 1, 3]
    levels = _levels(sched)
    assert [levels[d] for d in range(5)] == [0, 2, 1, 2, 0]
    types = dict((s["display_index"], s["frame_type"])
                 for s in sched["steps"])
    assert "".join(types[d] for d in range(5)) == "IBBBI"


def test_lambda_hierarchy():
    """ level weights are 1, 0.85 and 0.7 of the base lambda """
    for base in (0.005, 0.01, 0.03, 0.05):
        assert gop.lambda_for_level(base, 0) == base
        assert gop.lambda_for_level(base, 1) == base * 0.85
        assert gop.lambda_for_level(base, 2) == base * 0.7
    assert gop.lambda_for_level(0.01, 1) == pytest.approx(0.0085, abs=1e-15)
    assert gop.lambda_for_level(0.01, 2) == pytest.approx(0.007, abs=1e-15)
    with pytest.raises(ValueError):
        gop.lambda_for_level(0.01, 3)
    with pytest.raises(ValueError):
        gop.lambda_for_level(0.0, 0)


def test_schedule_properties():
    """ every frame coded once, references decoded first, levels 0..2 """
    for gop_size in (1, 2, 3, 4, 5, 8, 16):
        for n in range(1, 101):
            sched = gop.build_schedule(n, gop_size)
            assert gop.check_schedule(sched)
            assert len(sched["steps"]) == n
            assert sorted(_order(sched)) == list(range(n))
            for s in sched["steps"]:
                assert s["level"] in (0, 1, 2)
                if s["frame_type"] == "I":
                    assert s["display_index"] % gop_size == 0 or \
                        s["display_index"] == n - 1
                else:
                    assert s["ref_next"] - s["ref_prev"] <= gop_size


def test_degenerate_schedules():
    """ single frames, all intra and a forced last I-frame """
    assert _order(gop.build_schedule(1, 8)) == [0]
    intra = gop.build_schedule(6, 1)
    assert all(s["frame_type"] == "I" for s in intra["steps"])
    assert _order(intra) == list(range(6))
    tail = gop.build_schedule(11, 8)
    assert gop.intra_positions(11, 8) == [0, 8, 10]
    assert _order(tail)[-1] == 9
    with pytest.raises(ValueError):
        gop.build_schedule(0, 8)
    with pytest.raises(ValueError):
        gop.build_schedule(5, 0)


def test_check_schedule_rejects():
    """ a B-frame coded before its reference is rejected """
    sched = gop.build_schedule(9, 8)
    sched["steps"][1], sched["steps"][2] = sched["steps"][2], \
        sched["steps"][1]
    with pytest.raises(ValueError):
        gop.check_schedule(sched)


def test_release_after():
    """ frames stay buffered until their last use as reference """
    sched = gop.build_schedule(9, 8)
    release = gop.release_after(sched)
    # display 0 is last used by B1 at coding position 4
    assert release[0] == 4
    assert release[8] == 8
    assert release[1] == 4
    assert gop.gop_of(9, 8) == 1
    assert gop.display_order(sched)[:3] == [0, 4, 3]


def test_format_schedule():
    """ printable schedule with one line per step """
    text = gop.format_schedule(gop.build_schedule(9, 8), 0.01)
    lines = text.splitlines()
    assert len(lines) == 2 + 9
    assert "0.0085" in text
