"""
Rate-distortion training of the codec on five frame tuples.

Each step codes the two I-frames of the tuple, then the three B-frames in
hierarchical order from the in-loop reconstructions, and minimises

    sum_f  lambda_f * D_f + R_f

with D_f = s * MSE_f, the mean squared error of frame f in [0, 1] units
times the distortion scale s, and R_f the estimated rate, in bits per
pixel by default.  Reports and metrics rows carry D_f as it enters the
loss.
"""

import os
import warnings

import numpy as np
import torch
import torch.nn.functional as F

from ..fileio import table
from . import entropy
from . import gop
from . import nets

LAMBDAS = (0.005, 0.01, 0.03, 0.05)
RATE_NORMS = ("bpp", "bits")
METRIC_NAMES = ("step", "frame_level", "D", "R_bpp", "loss")
FLOOR_WARN_FRACTION = 0.5


def train_config(base_lambda=0.01, lr=1e-4, batch_size=8, patch=256,
                 steps=20000, seed=0, rate_norm="bpp", quant="noise",
                 clip=1.0, distortion_scale=255. ** 2, ckpt_every=1000,
                 model=None):
    """
    Create a training configuration dictionary.

    Parameters
    ----------
    base_lambda : float
        Weight of level 0 frames, usually one of 0.005, 0.01, 0.03, 0.05.
    lr : float
        Adam learning rate.
    batch_size : int
        Tuples per step.
    patch : int
        Square training patch size.
    steps : int
        Optimisation steps.
    seed : int
        Seed of parameter initialisation and noise.
    rate_norm : {'bpp', 'bits'}
        Rate term in bits per pixel or in raw bits.
    quant : {'noise', 'ste'}
        Training quantization.
    clip : float or None
        Gradient norm clipping threshold.
    distortion_scale : float
        Multiplier of the mean squared error, 255**2 weights errors in 8-bit
        units.
    ckpt_every : int
        Steps between checkpoints, 0 disables periodic checkpoints.
    model : dict, optional
        Model configuration, default ``nets.model_config()``.

    """
    if not base_lambda > 0:
        raise ValueError("base_lambda must be positive")
    if rate_norm not in RATE_NORMS:
        raise ValueError("rate_norm must be 'bpp' or 'bits'")
    if quant not in ("noise", "ste"):
        raise ValueError("training quantization must be 'noise' or 'ste'")
    if batch_size < 1 or patch < 1 or steps < 0:
        raise ValueError("batch_size and patch must be positive, steps "
                         "non-negative")
    cfg = dict()
    cfg["base_lambda"] = float(base_lambda)
    cfg["lr"] = float(lr)
    cfg["batch_size"] = int(batch_size)
    cfg["patch"] = int(patch)
    cfg["steps"] = int(steps)
    cfg["seed"] = int(seed)
    cfg["rate_norm"] = rate_norm
    cfg["quant"] = quant
    cfg["clip"] = None if clip is None else float(clip)
    cfg["distortion_scale"] = float(distortion_scale)
    cfg["ckpt_every"] = int(ckpt_every)
    cfg["model"] = nets.model_config() if model is None else model
    return cfg


def rd_loss(originals, reconstructions, bits_per_frame, lambdas,
            rate_norm="bpp", distortion_scale=1.0):
    """
    Rate-distortion loss of a group of frames.

    Parameters
    ----------
    originals, reconstructions : list of Tensor
        Frames [B, 3, H, W] in [0, 1].
    bits_per_frame : list of Tensor or float
        Estimated bits of each frame (whole batch).
    lambdas : list of float
        Weight of each frame, see :func:`kmfv.process.gop.lambda_for_level`.
    rate_norm : {'bpp', 'bits'}
        Divide bits by the pixel count of the frame batch, or not.
    distortion_scale : float
        Multiplier of the mean squared error.

    Returns
    -------
    loss : Tensor
        Scalar loss.
    report : dict
        Per frame ``D`` (distortion term, distortion_scale * MSE), ``mse``,
        ``R`` (rate term) and ``lambdas``, the ``distortion_scale`` and the
        float ``loss``, equal to sum(lambdas * D + R).

    """
    n = len(originals)
    if not (len(reconstructions) == len(bits_per_frame) ==
            len(lambdas) == n):
        raise ValueError("originals, reconstructions, bits and lambdas must "
                         "have equal length")
    if rate_norm not in RATE_NORMS:
        raise ValueError("rate_norm must be 'bpp' or 'bits'")
    loss = 0.
    d_terms = []
    mse_terms = []
    r_terms = []
    for x, x_hat, bits, lam in zip(originals, reconstructions,
                                   bits_per_frame, lambdas):
        mse = F.mse_loss(x_hat, x)
        d = distortion_scale * mse
        if rate_norm == "bpp":
            pixels = x.shape[0] * x.shape[-2] * x.shape[-1]
            r = bits / pixels
        else:
            r = bits
        loss = loss + lam * d + r
        d_terms.append(float(d))
        mse_terms.append(float(mse))
        r_terms.append(float(r))
    report = {"D": d_terms, "mse": mse_terms, "R": r_terms,
              "lambdas": list(lambdas),
              "distortion_scale": float(distortion_scale),
              "loss": float(loss)}
    return loss, report


def _floor_fraction(scales):
    return float((scales <= entropy.SCALE_BOUND * (1 + 1e-4)).float().mean())


def code_tuple(model, frames, base_lambda, quant="noise"):
    """
    Code a batch of five frame tuples with the training schedule.

    ``frames`` is a [B, 5, 3, H, W] tensor.  Returns the per-frame lists
    (in coding order) used by :func:`rd_loss` plus levels, display indices
    and the fraction of y scales at the floor.
    """
    recon = dict()
    out = {"originals": [], "raws": [], "bits": [], "lambdas": [],
           "levels": [], "display": [], "recon": recon}
    floors = []
    for s in gop.training_schedule()["steps"]:
        d = s["display_index"]
        x = frames[:, d]
        if s["frame_type"] == "I":
            res = model.image_codec(x, quant)
        else:
            refs = model.references(recon[s["ref_prev"]], recon[s["ref_next"]])
            res = model.bframe_codec(x, refs, quant)
        recon[d] = res["x_hat"]
        out["originals"].append(x)
        out["raws"].append(res["x_raw"])
        out["bits"].append(entropy.estimate_bits(res["y_likelihoods"]) +
                           entropy.estimate_bits(res["z_likelihoods"]))
        out["lambdas"].append(gop.lambda_for_level(base_lambda, s["level"]))
        out["levels"].append(s["level"])
        out["display"].append(d)
        floors.append(_floor_fraction(res["scales"].detach()))
    out["floor_fraction"] = float(np.mean(floors))
    return out


def _level_rows(step, report, levels):
    rows = []
    for level in sorted(set(levels)):
        idx = [i for i, l in enumerate(levels) if l == level]
        d = np.mean([report["D"][i] for i in idx])
        r = np.mean([report["R"][i] for i in idx])
        rows.append((step, level, d, r, report["loss"]))
    return rows


def _bpp(report, rate_norm, pixels):
    if rate_norm == "bpp":
        return report
    return dict(report, R=[r / pixels for r in report["R"]])


def train(dataset, cfg, model=None, outdir=None, verb=False):
    """
    Train a codec.

    Parameters
    ----------
    dataset : iterable
        Yields five frame tuples, ndarrays [5, 3, H, W], for example
        :func:`kmfv.process.synth.iterate_tuples`.
    cfg : dict
        Training configuration from :func:`train_config`.
    model : VideoCodec, optional
        Model to train.  A new one is built from ``cfg["model"]`` seeded
        with ``cfg["seed"]`` when None.  The interpolator must already hold
        its trained, frozen parameters.
    outdir : str, optional
        Directory receiving ``metrics.csv`` (appended to when present) and
        checkpoints ``step_NNNNNN.kmfp`` and ``final.kmfp``.
    verb : bool
        Print one line per logged step.

    Returns
    -------
    model : VideoCodec
        Trained model.
    rows : list of tuple
        Metrics rows (step, frame_level, D, R_bpp, loss).

    """
    torch.manual_seed(cfg["seed"])
    if model is None:
        model = nets.build_model(cfg["model"], seed=cfg["seed"])
    device = nets.get_device()
    model.to(device)
    model.train()
    if model.interpolator is not None:
        model.interpolator.eval()
    params = model.trainable_parameters()
    opt = torch.optim.Adam(params, lr=cfg["lr"])
    metrics = None if outdir is None else os.path.join(outdir, "metrics.csv")

    rows = []
    it = iter(dataset)
    for step in range(1, cfg["steps"] + 1):
        batch = np.stack([next(it) for _ in range(cfg["batch_size"])])
        frames = torch.from_numpy(batch).to(device)
        coded = code_tuple(model, frames, cfg["base_lambda"], cfg["quant"])
        loss, report = rd_loss(coded["originals"], coded["raws"],
                               coded["bits"], coded["lambdas"],
                               cfg["rate_norm"], cfg["distortion_scale"])
        if not torch.isfinite(loss):
            raise FloatingPointError(
                "non-finite loss at step %d, lambdas %s, scale floor hits "
                "%.1f%%" % (step, coded["lambdas"],
                            100 * coded["floor_fraction"]))
        if coded["floor_fraction"] > FLOOR_WARN_FRACTION:
            warnings.warn("%.0f%% of latent scales at the floor at step %d"
                          % (100 * coded["floor_fraction"], step))

        opt.zero_grad()
        loss.backward()
        if cfg["clip"]:
            torch.nn.utils.clip_grad_norm_(params, cfg["clip"])
        opt.step()

        pixels = frames.shape[0] * frames.shape[-2] * frames.shape[-1]
        new = _level_rows(step, _bpp(report, cfg["rate_norm"], pixels),
                          coded["levels"])
        rows.extend(new)
        if metrics is not None:
            table.append_rows(metrics, METRIC_NAMES, new)
        if verb:
            print("step %d loss %.5f " % (step, report["loss"]) +
                  " ".join("L%d D %.3g R %.4f" % (r[1], r[2], r[3])
                           for r in new))
        if outdir is not None and cfg["ckpt_every"] and \
                step % cfg["ckpt_every"] == 0:
            nets.save_model(os.path.join(outdir, "step_%06d.kmfp" % step),
                            model, cfg["base_lambda"], overwrite=True)

    model.eval()
    if outdir is not None:
        nets.save_model(os.path.join(outdir, "final.kmfp"), model,
                        cfg["base_lambda"], overwrite=True)
    return model, rows


def evaluate_step(model, tuples, cfg):
    """
    Loss and mean PSNR on held-out tuples with rounding, without gradients.

    ``tuples`` is an array [B, 5, 3, H, W].
    """
    model.eval()
    with torch.no_grad():
        frames = torch.as_tensor(np.asarray(tuples)).to(nets.get_device())
        coded = code_tuple(model, frames, cfg["base_lambda"], "round")
        loss, report = rd_loss(coded["originals"],
                               [r.clamp(0, 1) for r in coded["raws"]],
                               coded["bits"], coded["lambdas"],
                               cfg["rate_norm"], cfg["distortion_scale"])
    pixels = frames.shape[0] * frames.shape[-2] * frames.shape[-1]
    mse = np.array(report["mse"])
    return {"loss": report["loss"],
            "D": float(np.mean(report["D"])),
            "R_bpp": float(np.mean(_bpp(report, cfg["rate_norm"],
                                        pixels)["R"])),
            "psnr": float(np.mean(10 * np.log10(1 / np.maximum(mse, 1e-10))))}


def gradient_report(model, tuples, cfg):
    """
    Names of trainable parameters left without gradient by one step.

    ``tuples`` is an array [B, 5, 3, H, W].  The model parameters are not
    updated.
    """
    model.train()
    model.zero_grad()
    frames = torch.as_tensor(np.asarray(tuples)).to(nets.get_device())
    coded = code_tuple(model, frames, cfg["base_lambda"], cfg["quant"])
    loss, _ = rd_loss(coded["originals"], coded["raws"], coded["bits"],
                      coded["lambdas"], cfg["rate_norm"],
                      cfg["distortion_scale"])
    loss.backward()
    dead = [name for name, p in model.named_parameters()
            if p.requires_grad and (p.grad is None or
                                    not bool(p.grad.abs().sum() > 0))]
    model.zero_grad()
    return dead
