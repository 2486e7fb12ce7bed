"""
Hierarchical GoP coding schedules.

I-frames sit at every multiple of the GoP size and on the last frame.
Between two I-frames the B-frames are coded by recursive midpoint
splitting, depth first, each referencing the two frames bracketing its
interval.  Depths deeper than two share level 2.
"""

LAMBDA_FACTORS = {0: 1.0, 1: 0.85, 2: 0.7}
MAX_LEVEL = 2
TRAIN_GOP = 4
TRAIN_FRAMES = 5


def _step(display_index, frame_type, ref_prev, ref_next, depth):
    return {"display_index": display_index,
            "coding_order": None,
            "frame_type": frame_type,
            "ref_prev": ref_prev,
            "ref_next": ref_next,
            "depth": depth,
            "level": min(depth, MAX_LEVEL)}


def _bisect(lo, hi, depth, steps):
    if hi - lo < 2:
        return
    mid = (lo + hi) // 2
    steps.append(_step(mid, "B", lo, hi, depth))
    _bisect(lo, mid, depth + 1, steps)
    _bisect(mid, hi, depth + 1, steps)


def intra_positions(n_frames, gop_size):
    """
    Display indices of the I-frames.
    """
    pos = list(range(0, n_frames, gop_size))
    if pos[-1] != n_frames - 1:
        pos.append(n_frames - 1)
    return pos


def build_schedule(n_frames, gop_size=8):
    """
    Build the coding schedule of a sequence.

    Parameters
    ----------
    n_frames : int
        Number of frames, at least 1.
    gop_size : int
        Distance between I-frames, 1 codes every frame intra.

    Returns
    -------
    schedule : dict
        ``gop_size``, ``n_frames`` and ``steps``, a list in coding order of
        step dictionaries with keys display_index, coding_order, frame_type
        ('I' or 'B'), ref_prev, ref_next (None for I), depth and level.

    """
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    if gop_size < 1:
        raise ValueError("gop_size must be at least 1")
    anchors = intra_positions(n_frames, gop_size)
    steps = [_step(anchors[0], "I", None, None, 0)]
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        steps.append(_step(hi, "I", None, None, 0))
        _bisect(lo, hi, 1, steps)
    for i, s in enumerate(steps):
        s["coding_order"] = i
    return {"gop_size": gop_size, "n_frames": n_frames, "steps": steps}


def training_schedule():
    """
    Five frame I B B B I schedule used in training.
    """
    return build_schedule(TRAIN_FRAMES, TRAIN_GOP)


def lambda_for_level(base_lambda, level):
    """
    Rate-distortion weight of a frame at a hierarchy level (0, 1 or 2).
    """
    if not base_lambda > 0:
        raise ValueError("base_lambda must be positive")
    if level not in LAMBDA_FACTORS:
        raise ValueError("unknown level %r, expected 0, 1 or 2" % (level, ))
    return base_lambda * LAMBDA_FACTORS[level]


def check_schedule(schedule):
    """
    Validate a schedule, raising ValueError on the first violation.

    Every display index must be coded once, and every B-frame must sit
    strictly between references coded before it.
    """
    seen = dict()
    for pos, s in enumerate(schedule["steps"]):
        d = s["display_index"]
        if d in seen:
            raise ValueError("display index %d coded twice" % d)
        if s["frame_type"] == "B":
            for r in (s["ref_prev"], s["ref_next"]):
                if r not in seen:
                    raise ValueError("frame %d references %d before it is "
                                     "coded" % (d, r))
            if not s["ref_prev"] < d < s["ref_next"]:
                raise ValueError("frame %d is not between its references" % d)
        elif s["level"] != 0:
            raise ValueError("I-frame %d has level %d" % (d, s["level"]))
        seen[d] = pos
    if sorted(seen) != list(range(schedule["n_frames"])):
        raise ValueError("schedule does not cover every frame once")
    return True


def display_order(schedule):
    """
    Coding positions of the steps sorted by display index.
    """
    return sorted(range(len(schedule["steps"])),
                  key=lambda i: schedule["steps"][i]["display_index"])


def gop_of(display_index, gop_size):
    """
    Index of the GoP whose leading I-frame precedes display_index.
    """
    return display_index // gop_size


def release_after(schedule):
    """
    Coding position after which each decoded frame can be dropped.

    A frame is needed until the last step using it as a reference has been
    coded.
    """
    last = dict()
    for pos, s in enumerate(schedule["steps"]):
        last.setdefault(s["display_index"], pos)
        if s["frame_type"] == "B":
            last[s["ref_prev"]] = pos
            last[s["ref_next"]] = pos
    return last


def format_schedule(schedule, base_lambda=None):
    """
    Human readable table of a schedule in coding order.
    """
    head = "%6s %7s %4s %9s %5s %7s" % ("coding", "display", "type", "refs",
                                        "level", "lambda")
    lines = ["# n_frames %d gop_size %d" % (schedule["n_frames"],
                                            schedule["gop_size"]), head]
    for s in schedule["steps"]:
        if s["frame_type"] == "B":
            refs = "%d,%d" % (s["ref_prev"], s["ref_next"])
        else:
            refs = "-"
        if base_lambda is None:
            lam = "%.2fx" % LAMBDA_FACTORS[s["level"]]
        else:
            lam = "%.5g" % lambda_for_level(base_lambda, s["level"])
        lines.append("%6d %7d %4s %9s %5d %7s" % (
            s["coding_order"], s["display_index"], s["frame_type"], refs,
            s["level"], lam))
    return "\n".join(lines)
