"""
Model size and complexity reports.
"""

from collections import OrderedDict

import torch
import torch.nn as nn

from ..fileio import table
from ..process import sepconv

REPORT_NAMES = ("module", "params", "share")


def parameter_report(model):
    """
    Parameter count and share (percent) of each module group.

    Groups follow :meth:`kmfv.process.nets.VideoCodec.parameter_groups`:
    image codec, frame interpolator (when used), kernel sub-networks, frame
    auto-encoder and frame hyper-prior network.

    Returns
    -------
    rec : recarray
        Fields module, params and share.

    """
    counts = OrderedDict(
        (name, sum(p.numel() for _, p in params))
        for name, params in model.parameter_groups().items())
    total = sum(counts.values())
    rows = [(name, n, 100.0 * n / total) for name, n in counts.items()]
    return table.make_table(rows, REPORT_NAMES, ['U40', 'i8', 'f8'])


def _group_of(name, groups):
    for prefix, group in groups:
        if name == prefix or name.startswith(prefix + "."):
            return group
    return None


def macs_per_pixel(model, height=256, width=256):
    """
    Multiply-accumulates per pixel of each module group for one frame.

    Convolutions are counted with forward hooks while an I-frame and a
    B-frame of height x width are coded; kernel synthesis is counted
    analytically.  Normalisation layers are not counted.
    """
    group_names = list(model.parameter_groups())
    heads = [g for g in group_names if "kernel" in g][0]
    groups = [("image_codec", "Image codec"),
              ("interpolator", "Frame interpolator"),
              ("bframe_codec.heads", heads),
              ("bframe_codec.g_a", "Frame auto-encoder"),
              ("bframe_codec.g_s", "Frame auto-encoder"),
              ("bframe_codec.h_a", "Frame hyper-prior network"),
              ("bframe_codec.h_s", "Frame hyper-prior network")]
    macs = OrderedDict((g, 0) for g in group_names)
    handles = []

    def hook(group):
        def count(mod, inputs, output):
            k = mod.kernel_size[0] * mod.kernel_size[1]
            if isinstance(mod, nn.ConvTranspose2d):
                n = inputs[0].numel() * mod.out_channels // mod.groups * k
            else:
                n = output.numel() * mod.in_channels // mod.groups * k
            macs[group] += n
        return count

    for name, mod in model.named_modules():
        if isinstance(mod, (nn.Conv2d, nn.ConvTranspose2d)):
            group = _group_of(name, groups)
            if group is not None:
                handles.append(mod.register_forward_hook(hook(group)))
    try:
        with torch.no_grad():
            x = torch.rand(1, 3, height, width)
            model.image_codec(x, "round")
            refs = model.references(x, x)
            model.bframe_codec(x, refs, "round")
    finally:
        for h in handles:
            h.remove()

    out = OrderedDict((g, n / float(height * width)) for g, n in macs.items())
    out["Kernel synthesis"] = sepconv.synthesis_macs(
        height, width, model.cfg["KS"], len(refs)) / float(height * width)
    return out


def format_report(rec, macs=None):
    """
    Text table of a parameter report, with a MACs/pixel column if given.
    """
    head = "%-32s %12s %8s" % ("module", "params", "share")
    if macs is not None:
        head += " %14s" % "MACs/pixel"
    lines = [head]
    for r in rec:
        line = "%-32s %12d %7.2f%%" % (r["module"], r["params"], r["share"])
        if macs is not None:
            line += " %14.0f" % macs.get(str(r["module"]), 0.0)
        lines.append(line)
    total = int(sum(rec["params"]))
    lines.append("%-32s %12d %7.2f%%" % ("Total", total, 100.0))
    if macs is not None:
        lines.append("%-32s %12s %8s %14.0f" % (
            "Kernel synthesis", "-", "-", macs["Kernel synthesis"]))
    return "\n".join(lines)
