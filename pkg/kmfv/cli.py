"""
Command line interface, ``kmfv <subcommand> ...``.

Subcommands
-----------
synth            write a synthetic sequence as YUV420 or PNG frames
pretrain-interp  train the frame interpolator on frame triples
train            train a codec for one lambda
encode           encode a sequence into a .kmfv container
decode           decode a container into PNG frames or YUV420
eval             rate-distortion evaluation of checkpoints
bdrate           BD-rate between two RD tables
report           parameter (and MACs) report of a model

Exit codes are 0 on success, 1 for usage errors, 2 for data errors (bad or
missing files, corrupt containers) and 3 for internal errors.  Options are
resolved as defaults, then values of the ``--config`` file, then options
given on the command line.
"""

import argparse
import os
import sys
import traceback
import warnings

import numpy as np

from .fileio import bitstream
from .fileio import fileiobase
from .fileio import imgdir
from .fileio import table
from .fileio import yuv
from .analysis import bdrate
from .analysis import metrics
from .analysis import rdeval
from .analysis import report
from .process import codec
from .process import gop
from .process import interp
from .process import nets
from .process import rangecoder
from .process import synth
from .process import train
from .util import manifest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

TRAIN_KEYS = ("base_lambda", "lr", "batch_size", "patch", "steps", "seed",
              "rate_norm", "quant", "clip", "distortion_scale", "ckpt_every")
MODEL_KEYS = ("M", "N", "K", "KS", "use_interpolator", "interp_kind",
              "normalize_kernels", "nonlinearity", "downsample_stages",
              "interp_base")


class KmfvParser(argparse.ArgumentParser):
    """
    ArgumentParser exiting with status 1 on usage errors.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _odd_kernel(s):
    try:
        ks = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError("kernel size must be an integer")
    if ks < 1 or ks % 2 == 0:
        raise argparse.ArgumentTypeError(
            "kernel size must be odd, got %d" % ks)
    return ks


def _frame_size(s):
    try:
        w, h = [int(v) for v in s.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError("size must be WIDTHxHEIGHT")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return w, h


def _lambda(s):
    lam = float(s)
    if lam not in train.LAMBDAS:
        raise argparse.ArgumentTypeError(
            "lambda must be one of %s" %
            ", ".join("%g" % v for v in train.LAMBDAS))
    return lam


def build_parser():
    """
    Create the argument parser of the kmfv command.
    """
    common = KmfvParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("-v", "--verbose", action="store_true")

    model = KmfvParser(add_help=False)
    model.add_argument("--ks", type=_odd_kernel, help="odd kernel size")
    model.add_argument("--no-interp", dest="no_interp", action="store_const",
                       const=True, help="four kernel variant without the "
                       "interpolated reference")

    seqs = KmfvParser(add_help=False)
    seqs.add_argument("--size", type=_frame_size,
                      help="WIDTHxHEIGHT of raw YUV420 inputs")
    seqs.add_argument("--frames", type=int, help="number of frames to read")

    parser = KmfvParser(prog="kmfv", description="motion-free B-frame "
                        "neural video codec")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True

    p = sub.add_parser("synth", parents=[common],
                       help="write a synthetic sequence")
    p.add_argument("--kind", choices=synth.KINDS,
                   default="translating-texture")
    p.add_argument("--frames", type=int, default=17)
    p.add_argument("--size", type=_frame_size, default=(64, 64))
    p.add_argument("--velocity", type=float, nargs=2, default=(1.0, 0.0),
                   metavar=("VX", "VY"))
    p.add_argument("--out", required=True,
                   help="a .yuv file or a PNG directory")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("pretrain-interp", parents=[common, seqs],
                       help="train the frame interpolator")
    p.add_argument("--seqs", nargs="+", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--base", type=int, help="interpolator channel width")
    p.add_argument("--out", required=True, help="interpolator checkpoint")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("train", parents=[common, model, seqs],
                       help="train a codec for one lambda")
    p.add_argument("--lambda", dest="base_lambda", type=_lambda,
                   required=True, help="0.005, 0.01, 0.03 or 0.05")
    p.add_argument("--seqs", nargs="*", default=[])
    p.add_argument("--synthetic", type=int, default=0,
                   help="add this many synthetic training sequences")
    p.add_argument("--interp", help="pretrained interpolator checkpoint")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--rate-norm", dest="rate_norm", choices=train.RATE_NORMS)
    p.add_argument("--quant", choices=("noise", "ste"))
    p.add_argument("--ckpt-every", dest="ckpt_every", type=int)
    p.add_argument("--print-schedule", dest="print_schedule",
                   action="store_true", help="print the training schedule")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("encode", parents=[common, seqs],
                       help="encode a sequence")
    p.add_argument("--in", dest="input", help="a .yuv file or PNG directory")
    p.add_argument("--ckpt")
    p.add_argument("--gop", type=int, default=8)
    p.add_argument("--out", help="output container")
    p.add_argument("--recon", help="write encoder reconstructions here")
    p.add_argument("--stats", help="write per-frame statistics CSV")
    p.add_argument("--print-schedule", dest="print_schedule",
                   action="store_true", help="print the coding schedule")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("decode", parents=[common],
                       help="decode a container")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True,
                   help="a PNG directory or a .yuv file")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("eval", parents=[common, seqs],
                       help="rate-distortion evaluation")
    p.add_argument("--ckpts", nargs="+", required=True)
    p.add_argument("--seqs", nargs="+", required=True)
    p.add_argument("--gop", type=int, default=8)
    p.add_argument("--csv", help="RD table output")
    p.add_argument("--plot-dir", dest="plot_dir")
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--codec-name", dest="codec_name", default="kmfv")
    p.add_argument("--no-intra", dest="no_intra", action="store_true",
                   help="skip the all I-frame anchor")
    p.add_argument("--timing", action="store_true",
                   help="also time the first checkpoint")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("bdrate", parents=[common], help="BD-rate of tables")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--anchor-codec", dest="anchor_codec")
    p.add_argument("--test-codec", dest="test_codec")

    p = sub.add_parser("report", parents=[common, model],
                       help="model size report")
    p.add_argument("--ckpt", help="report this checkpoint instead of the "
                   "default configuration")
    p.add_argument("--macs", action="store_true",
                   help="add a MACs/pixel column")
    p.add_argument("--macs-size", dest="macs_size", type=_frame_size,
                   default=(256, 256))
    return parser


#################
# Configuration #
#################


def _load_config(args):
    if getattr(args, "config", None) is None:
        return dict()
    return fileiobase.read_config(args.config)


def _resolve(args, config, keys):
    """
    Merge option values: config values, then explicit options.
    """
    out = dict()
    for key, value in config.items():
        if key in keys:
            out[key] = value
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _model_config(args, config):
    mcfg = dict()
    extra = config.get("model", dict())
    unknown = set(extra) - set(MODEL_KEYS)
    if unknown:
        raise ValueError("unknown model configuration keys: %s" %
                         ", ".join(sorted(unknown)))
    mcfg.update(extra)
    if getattr(args, "ks", None) is not None:
        mcfg["KS"] = args.ks
    if getattr(args, "no_interp", None):
        mcfg["use_interpolator"] = False
    return nets.model_config(**mcfg)


def _read_sequence(path, size=None, frames=None):
    if os.path.isdir(path):
        return imgdir.read(path, max_frames=frames)
    if size is None:
        raise ValueError("--size WIDTHxHEIGHT is required for raw YUV "
                         "input %s" % path)
    return yuv.load_yuv420(path, size[0], size[1], max_frames=frames)


def _write_sequence(path, vdic, data, overwrite):
    if path.lower().endswith(".yuv"):
        yuv.write_yuv420(path, vdic, data, overwrite=overwrite)
    else:
        imgdir.write(path, vdic, data, overwrite=overwrite)


def _load_model(filename):
    model = nets.load_model(filename, nets.get_device())
    return model


###############
# Subcommands #
###############


def cmd_synth(args, config, run):
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    w, h = args.size
    vdic, data = synth.make_synthetic_sequence(
        args.kind, args.frames, (h, w), seed, velocity=tuple(args.velocity))
    _write_sequence(args.out, vdic, data, args.overwrite)
    run.record["seed"] = seed
    run.record["config"] = {"kind": args.kind, "frames": args.frames,
                            "size": list(args.size),
                            "velocity": list(args.velocity)}
    run.add_output(args.out)
    return args.out


def cmd_pretrain_interp(args, config, run):
    opts = _resolve(args, config, ("epochs", "lr", "batch_size", "crop",
                                   "base", "seed"))
    opts.setdefault("epochs", 10)
    opts.setdefault("seed", 0)
    triplets = np.concatenate([
        synth.make_triplets(_read_sequence(p, args.size, args.frames)[1])
        for p in args.seqs])
    spec = interp.interp_spec("small-learned", base=opts.get("base", 32))
    model, losses = interp.pretrain_interpolator(
        triplets, opts["epochs"], opts["seed"], spec,
        lr=opts.get("lr", 1e-3), batch_size=opts.get("batch_size", 4),
        crop=opts.get("crop", 224), verb=args.verbose)
    ckpt_id = interp.save_interpolator(args.out, model, spec,
                                       overwrite=args.overwrite)
    run.record["config"] = dict(opts, base=spec["base"])
    run.record["seed"] = opts["seed"]
    run.record["losses"] = losses
    run.add_checkpoint("interpolator", ckpt_id)
    run.add_output(args.out)
    print("interpolator %08x final loss %.6f" % (
        ckpt_id, losses[-1] if losses else float("nan")))
    return args.out


def cmd_train(args, config, run):
    opts = _resolve(args, config, TRAIN_KEYS)
    cfg = train.train_config(model=_model_config(args, config), **opts)
    run.record["config"] = cfg
    run.record["seed"] = cfg["seed"]
    if args.print_schedule:
        print(gop.format_schedule(gop.training_schedule(),
                                  cfg["base_lambda"]))

    sequences = [_read_sequence(p, args.size, args.frames)[1]
                 for p in args.seqs]
    for i in range(args.synthetic):
        size = max(cfg["patch"], 64)
        sequences.append(synth.make_synthetic_sequence(
            "translating-texture", 17, size, cfg["seed"] + i,
            velocity=(1.0 + 0.5 * i, 0.5 * (i % 3)))[1])
    if not sequences:
        raise ValueError("no training sequences, give --seqs or --synthetic")

    model = nets.build_model(cfg["model"], seed=cfg["seed"])
    if args.interp is not None:
        imodel, spec = interp.load_interpolator(args.interp)
        model.set_interpolator(imodel, spec["ckpt_id"])
        run.add_checkpoint("interpolator", spec["ckpt_id"])
    elif model.interpolator is not None and \
            cfg["model"]["interp_kind"] == "small-learned":
        warnings.warn("no --interp given, the untrained interpolator "
                      "returns the average of its references")

    if not os.path.isdir(args.out):
        os.makedirs(args.out)
    dataset = synth.iterate_tuples(sequences, cfg["patch"], cfg["seed"])
    model, _ = train.train(dataset, cfg, model, outdir=args.out,
                           verb=args.verbose)
    run.add_checkpoint("final", model.ckpt_id)
    run.add_output(os.path.join(args.out, "final.kmfp"))
    print("model %08x written to %s" % (
        model.ckpt_id, os.path.join(args.out, "final.kmfp")))
    return args.out


STATS_NAMES = ("display_index", "frame_type", "level", "bits", "est_bits",
               "psnr", "escapes")
STATS_FORMATS = ("i8", "U1", "i8", "i8", "f8", "f8", "i8")


def cmd_encode(args, config, run):
    gop_size = args.gop
    if args.input is None:
        if not args.print_schedule:
            raise ValueError("encode needs --in")
        if args.frames is None:
            raise ValueError("--print-schedule without --in needs --frames")
        print(gop.format_schedule(gop.build_schedule(args.frames, gop_size)))
        return None
    if args.ckpt is None or args.out is None:
        raise ValueError("encode needs --ckpt and --out")
    vdic, data = _read_sequence(args.input, args.size, args.frames)
    if args.print_schedule:
        print(gop.format_schedule(gop.build_schedule(data.shape[0],
                                                     gop_size)))
    model = _load_model(args.ckpt)
    cdic, stats, recon = codec.encode_video(data, model, gop_size,
                                            verb=args.verbose)
    bitstream.write(args.out, cdic, overwrite=args.overwrite)
    run.record["config"] = {"gop_size": gop_size, "input": args.input,
                            "frames": int(data.shape[0])}
    run.add_checkpoint("codec", model.ckpt_id)
    run.add_output(args.out)
    if args.recon is not None:
        _write_sequence(args.recon, vdic, recon, args.overwrite)
        run.add_output(args.recon)
    if args.stats is not None:
        rows = [tuple(s[k] for k in STATS_NAMES) for s in stats]
        table.write(args.stats, table.make_table(rows, STATS_NAMES,
                                                 STATS_FORMATS),
                    overwrite=args.overwrite)
        run.add_output(args.stats)
    escapes = sum(s["escapes"] for s in stats)
    if escapes and args.verbose:
        warnings.warn("%d symbols coded with the escape mechanism" % escapes,
                      RuntimeWarning)
    print("%d frames, %.4f bpp, %.2f dB" % (
        data.shape[0], metrics.bpp(cdic), metrics.sequence_psnr(data, recon)))
    return args.out


def cmd_decode(args, config, run):
    model = _load_model(args.ckpt)
    cdic = bitstream.read(args.input, model_id=model.ckpt_id)
    vdic, data = codec.decode_video(cdic, model, verb=args.verbose)
    _write_sequence(args.out, vdic, data, args.overwrite)
    run.record["config"] = {"input": args.input}
    run.add_checkpoint("codec", model.ckpt_id)
    run.add_output(args.out)
    print("%d frames decoded to %s" % (data.shape[0], args.out))
    return args.out


def cmd_eval(args, config, run):
    sequences = dict()
    for p in args.seqs:
        name = os.path.basename(os.path.normpath(p))
        sequences[os.path.splitext(name)[0]] = _read_sequence(
            p, args.size, args.frames)[1]
    result = rdeval.evaluate(
        sequences, args.ckpts, gop_size=args.gop, codec_name=args.codec_name,
        csv=args.csv, plot_dir=args.plot_dir, dataset=args.dataset,
        iframe_anchor=not args.no_intra, overwrite=args.overwrite,
        verb=args.verbose)
    for rec in result["table"]:
        print("%s %s lambda %g: %.4f bpp %.2f dB" % (
            rec["sequence"], rec["codec"], rec["lambda"], rec["bpp"],
            rec["psnr_rgb"]))
    for name, per_ckpt in sorted(result["frame_types"].items()):
        for ckpt_id, summary in per_ckpt.items():
            for label, row in sorted(summary.items()):
                print("%s ckpt %08x lambda %g %-5s %4d frames %10.1f bits "
                      "%.2f dB" % (name, ckpt_id, result["lambdas"][ckpt_id],
                                   label, row["frames"], row["bits"],
                                   row["psnr"]))
    if not args.no_intra and len(result["average"]) == 2:
        anchor = args.codec_name + rdeval.INTRA_SUFFIX
        try:
            cmp_ = bdrate.compare(result["curves"][anchor],
                                  result["curves"][args.codec_name])
            print("BD-rate vs all I-frame coding: %.2f%%" % cmp_["mean"])
        except ValueError as e:
            print("BD-rate vs all I-frame coding not available: %s" % e)
    if args.timing and args.ckpts:
        first = [c for c in args.ckpts if os.path.exists(c)]
        if first:
            timing = rdeval.timing_report(
                next(iter(sequences.values())), _load_model(first[0]),
                args.gop, runs=args.runs)
            print("encode %.2f fps, decode %.2f fps, total %.1f ms" % (
                timing["encode_fps"], timing["decode_fps"],
                timing["total_ms"]))
            for stage, ms in timing["stage_ms"].items():
                print("  %-12s %10.1f ms" % (stage, ms))
    run.record["config"] = {"gop_size": args.gop, "checkpoints": args.ckpts,
                            "sequences": args.seqs,
                            "skipped": result["skipped"]}
    if args.csv:
        run.add_output(args.csv)
    return args.csv or args.plot_dir or "."


def _single_codec(rec, codec_name, filename):
    names = sorted(set(np.asarray(rec["codec"]).astype(str)))
    if codec_name is not None:
        return codec_name
    if len(names) != 1:
        raise ValueError("%s holds codecs %s, choose one" %
                         (filename, ", ".join(names)))
    return names[0]


def cmd_bdrate(args, config, run):
    _, arec = table.read(args.anchor)
    _, trec = table.read(args.test)
    acodec = _single_codec(arec, args.anchor_codec, args.anchor)
    tcodec = _single_codec(trec, args.test_codec, args.test)
    result = bdrate.compare(bdrate.curves_from_table(arec, acodec),
                            bdrate.curves_from_table(trec, tcodec))
    for key in sorted(k for k in result if k not in ("mean", "average-curve")):
        print("%-24s %8.2f%%" % (key, result[key]))
    print("%-24s %8.2f%%" % ("mean", result["mean"]))
    print("%-24s %8.2f%%" % ("average-curve", result["average-curve"]))
    return None


def cmd_report(args, config, run):
    if args.ckpt is not None:
        model = _load_model(args.ckpt)
    else:
        model = nets.build_model(_model_config(args, config), seed=0)
    rec = report.parameter_report(model)
    macs = None
    if args.macs:
        w, h = args.macs_size
        macs = report.macs_per_pixel(model, h, w)
    print(report.format_report(rec, macs))
    return None


COMMANDS = {"synth": cmd_synth,
            "pretrain-interp": cmd_pretrain_interp,
            "train": cmd_train,
            "encode": cmd_encode,
            "decode": cmd_decode,
            "eval": cmd_eval,
            "bdrate": cmd_bdrate,
            "report": cmd_report}

# commands writing a manifest next to their outputs
MUTATING = ("synth", "pretrain-interp", "train", "encode", "decode", "eval")


def dispatch(argv):
    """
    Run the kmfv command line and return the exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        config = _load_config(args)
        run = manifest.RunManifest(args.command, argv, dict(),
                                   getattr(args, "seed", None))
        out = COMMANDS[args.command](args, config, run)
        if args.command in MUTATING and out is not None:
            run.finish(out)
    except (bitstream.BitstreamError, rangecoder.CorruptPayloadError) as e:
        print("kmfv: bitstream error: %s" % e, file=sys.stderr)
        return EXIT_DATA
    except (IOError, OSError, ValueError) as e:
        print("kmfv: error: %s" % e, file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
