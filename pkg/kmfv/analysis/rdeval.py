"""
Rate-distortion evaluation of trained checkpoints on video sequences.

Every sequence is coded with every checkpoint (one per lambda) and its bpp
is taken from the container bytes.  Results are collected in a records
array with the fields sequence, codec, lambda, bpp and psnr_rgb which is
optionally written as CSV, and the curves can be plotted with matplotlib.
"""

import os
import time
import warnings
from collections import OrderedDict

import numpy as np

from ..fileio import table
from ..process import codec
from ..process import nets
from ..process import rangecoder
from ..process import sepconv
from . import bdrate
from . import metrics

CSV_NAMES = ("sequence", "codec", "lambda", "bpp", "psnr_rgb")
CSV_FORMATS = ("U64", "U64", "f8", "f8", "f8")
STAGES = ("analysis", "entropy", "interpolate", "synthesis")
INTRA_SUFFIX = "-intra"


def _load_checkpoints(checkpoints):
    models = []
    skipped = []
    for filename in checkpoints:
        if not os.path.exists(filename):
            warnings.warn("checkpoint %s not found, skipped" % filename)
            skipped.append(filename)
            continue
        models.append(nets.load_model(filename, nets.get_device()))
    return models, skipped


def _code(data, model, gop_size):
    cdic, stats, _ = codec.encode_video(data, model, gop_size)
    _, recon = codec.decode_video(cdic, model)
    return metrics.bpp(cdic), metrics.sequence_psnr(data, recon), stats


def evaluate(sequences, checkpoints, gop_size=8, codec_name="kmfv",
             csv=None, plot_dir=None, dataset="dataset", iframe_anchor=True,
             overwrite=False, verb=False):
    """
    Evaluate checkpoints on a set of sequences.

    Parameters
    ----------
    sequences : dict
        Sequence name to frames, float32 [T, 3, H, W] in [0, 1].
    checkpoints : list of str
        Codec checkpoints, one per lambda.  Missing files are skipped with a
        warning.
    gop_size : int
        GoP size used for coding.
    codec_name : str
        Codec label in the table and plots.
    csv : str, optional
        Write the RD table to this file.
    plot_dir : str, optional
        Write one plot per codec, ``<dataset>_<codec>.png``, to this
        directory.
    dataset : str
        Dataset name used in plot file names.
    iframe_anchor : bool
        Also code every sequence with ``gop_size=1`` (all I-frames) under the
        codec name ``<codec_name>-intra``.
    overwrite : bool
        Overwrite an existing csv file.
    verb : bool
        Print one line per coded sequence.

    Returns
    -------
    result : dict
        ``table`` (records array), ``curves`` (codec to sequence to
        (bpp, psnr) arrays), ``average`` (codec to dataset average curve),
        ``frame_types`` (codec to checkpoint id to
        :func:`kmfv.analysis.metrics.type_summary`), ``lambdas`` (checkpoint
        id to lambda, NaN when unknown) and ``skipped``.

    """
    models, skipped = _load_checkpoints(checkpoints)
    runs = [(codec_name, gop_size)]
    if iframe_anchor:
        runs.append((codec_name + INTRA_SUFFIX, 1))

    rows = []
    frame_types = dict()
    lambdas = OrderedDict(
        (m.ckpt_id, float(m.lam) if m.lam is not None else float("nan"))
        for m in models)
    for name, g in runs:
        frame_types[name] = dict()
        for model in models:
            lam = lambdas[model.ckpt_id]
            collected = []
            for seq in sorted(sequences):
                data = sequences[seq]
                rate, psnr, stats = _code(data, model, g)
                rows.append((seq, name, lam, rate, psnr))
                collected.extend(stats)
                if verb:
                    print("%s %s lambda %g: %.4f bpp %.2f dB" % (
                        seq, name, lam, rate, psnr))
            first = next(iter(sequences.values()))
            frame_types[name][model.ckpt_id] = metrics.type_summary(
                collected, first.shape[-1] * first.shape[-2])

    rec = table.make_table(rows, CSV_NAMES, CSV_FORMATS)
    if csv is not None:
        table.write(csv, rec, overwrite=overwrite)

    curves = dict()
    average = dict()
    for name, _ in runs:
        curves[name] = bdrate.curves_from_table(rec, name)
        if curves[name]:
            average[name] = bdrate.average_curve(curves[name])
    if plot_dir is not None:
        for name in curves:
            plot_curves(os.path.join(plot_dir, "%s_%s.png" % (dataset, name)),
                        curves[name], average.get(name), title=name)
    return {"table": rec, "curves": curves, "average": average,
            "frame_types": frame_types, "lambdas": lambdas,
            "skipped": skipped}


def plot_curves(filename, curves, average=None, title=None):
    """
    Plot RD curves (bpp versus RGB PSNR) to an image file.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = os.path.dirname(filename)
    if directory and not os.path.isdir(directory):
        os.makedirs(directory)
    fig = plt.figure(figsize=(6, 4.5))
    ax = fig.add_subplot(111)
    for seq, (rate, psnr) in sorted(curves.items()):
        ax.plot(rate, psnr, marker="o", lw=1, label=seq)
    if average is not None:
        ax.plot(average[0], average[1], "k--", marker="s", lw=2,
                label="average")
    ax.set_xlabel("bpp")
    ax.set_ylabel("RGB PSNR (dB)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.savefig(filename, dpi=100)
    plt.close(fig)
    return filename


class _StageClock(object):
    """
    Accumulates wall-clock time per stage from module hooks and wrapped
    module functions.
    """

    def __init__(self):
        self.elapsed = dict((s, 0.0) for s in STAGES)
        self._start = dict()
        self._handles = []
        self._patched = []

    def watch_module(self, module, stage):
        def pre(mod, inputs):
            self._start[id(mod)] = time.perf_counter()

        def post(mod, inputs, output):
            t0 = self._start.pop(id(mod))
            self.elapsed[stage] += time.perf_counter() - t0

        self._handles.append(module.register_forward_pre_hook(pre))
        self._handles.append(module.register_forward_hook(post))

    def watch_function(self, owner, name, stage):
        func = getattr(owner, name)

        def timed(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                self.elapsed[stage] += time.perf_counter() - t0

        setattr(owner, name, timed)
        self._patched.append((owner, name, func))

    def reset(self):
        for s in STAGES:
            self.elapsed[s] = 0.0

    def close(self):
        for h in self._handles:
            h.remove()
        for owner, name, func in self._patched:
            setattr(owner, name, func)
        self._handles = []
        self._patched = []


def _attach(clock, model):
    for sub in (model.image_codec, model.bframe_codec):
        clock.watch_module(sub.g_a, "analysis")
        clock.watch_module(sub.h_a, "analysis")
        clock.watch_module(sub.h_s, "entropy")
        clock.watch_module(sub.g_s, "synthesis")
    for head in model.bframe_codec.heads:
        clock.watch_module(head, "synthesis")
    if model.interpolator is not None:
        clock.watch_module(model.interpolator, "interpolate")
    clock.watch_function(rangecoder, "encode", "entropy")
    clock.watch_function(rangecoder, "decode", "entropy")
    clock.watch_function(sepconv, "synthesize", "synthesis")


def timing_report(data, model, gop_size=8, runs=5, warmup=1):
    """
    Wall-clock timing of encoding and decoding a sequence.

    The sequence is encoded and decoded ``warmup`` times untimed and then
    ``runs`` times.  Stage times (analysis, entropy, interpolate,
    synthesis) are summed over one encode plus decode; all reported values
    are medians over the timed runs.

    Returns
    -------
    report : OrderedDict
        Sorted keys: ``decode_fps``, ``encode_fps``, ``stage_ms`` (an
        OrderedDict with sorted stage names) and ``total_ms``.

    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    nframes = data.shape[0]
    for _ in range(warmup):
        cdic, _, _ = codec.encode_video(data, model, gop_size)
        codec.decode_video(cdic, model)

    clock = _StageClock()
    enc, dec, stages = [], [], dict((s, []) for s in STAGES)
    _attach(clock, model)
    try:
        for _ in range(runs):
            clock.reset()
            t0 = time.perf_counter()
            cdic, _, _ = codec.encode_video(data, model, gop_size)
            t1 = time.perf_counter()
            codec.decode_video(cdic, model)
            t2 = time.perf_counter()
            enc.append(t1 - t0)
            dec.append(t2 - t1)
            for s in STAGES:
                stages[s].append(clock.elapsed[s])
    finally:
        clock.close()

    report = OrderedDict()
    report["decode_fps"] = nframes / float(np.median(dec))
    report["encode_fps"] = nframes / float(np.median(enc))
    report["stage_ms"] = OrderedDict(
        (s, 1000.0 * float(np.median(stages[s]))) for s in STAGES)
    report["total_ms"] = 1000.0 * float(np.median(np.add(enc, dec)))
    return report
