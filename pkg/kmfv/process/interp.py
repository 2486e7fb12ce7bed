"""
Midpoint frame interpolation providing the third reference of a B-frame.

Two interpolators are available: the average of the two references and a
small U-shaped network predicting a residual on top of that average.  The
network is trained on its own with :func:`pretrain_interpolator` and then
frozen for codec training.
"""

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..fileio import ckpt

INTERP_KINDS = ("average-baseline", "small-learned")


def interp_spec(kind="small-learned", ckpt_id=None, frozen=True, base=32):
    """
    Create an interpolator specification dictionary.

    Parameters
    ----------
    kind : {'average-baseline', 'small-learned'}
        Interpolator kind.
    ckpt_id : int, optional
        Checkpoint id of the trained network (small-learned only).
    frozen : bool
        Exclude the interpolator from codec optimisation.
    base : int
        Channel width of the first network level.

    """
    if kind not in INTERP_KINDS:
        raise ValueError("unknown interpolator kind %r" % (kind, ))
    return {"kind": kind, "ckpt_id": ckpt_id, "frozen": bool(frozen),
            "base": int(base)}


class AverageInterpolator(nn.Module):
    """(ref0 + ref2) / 2"""

    def forward(self, ref0, ref2):
        return 0.5 * (ref0 + ref2)


def _block(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1), nn.LeakyReLU(0.1),
        nn.Conv2d(cout, cout, 3, padding=1), nn.LeakyReLU(0.1))


class UNetInterpolator(nn.Module):
    """
    Three level U-Net predicting a residual on the reference average.

    The last layer starts at zero so an untrained network returns the
    average.
    """

    levels = 3

    def __init__(self, base=32):
        super().__init__()
        self.enc0 = _block(6, base)
        self.enc1 = _block(base, 2 * base)
        self.enc2 = _block(2 * base, 4 * base)
        self.bottom = _block(4 * base, 4 * base)
        self.dec2 = _block(8 * base, 2 * base)
        self.dec1 = _block(4 * base, base)
        self.dec0 = _block(2 * base, base)
        self.out = nn.Conv2d(base, 3, 3, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, ref0, ref2):
        h, w = ref0.shape[-2:]
        m = 1 << self.levels
        ph, pw = (-h) % m, (-w) % m
        x = torch.cat([ref0, ref2], dim=1)
        if ph or pw:
            x = F.pad(x, [0, pw, 0, ph], mode='replicate')

        e0 = self.enc0(x)
        e1 = self.enc1(F.avg_pool2d(e0, 2))
        e2 = self.enc2(F.avg_pool2d(e1, 2))
        b = self.bottom(F.avg_pool2d(e2, 2))
        d2 = self.dec2(torch.cat([_up(b), e2], dim=1))
        d1 = self.dec1(torch.cat([_up(d2), e1], dim=1))
        d0 = self.dec0(torch.cat([_up(d1), e0], dim=1))
        residual = self.out(d0)[..., :h, :w]
        return 0.5 * (ref0 + ref2) + residual


def _up(x):
    return F.interpolate(x, scale_factor=2, mode='bilinear',
                         align_corners=False)


def build_interpolator(spec):
    """
    Create the interpolator described by an interpolator specification.
    """
    if spec["kind"] == "average-baseline":
        model = AverageInterpolator()
    else:
        model = UNetInterpolator(spec["base"])
    if spec["frozen"]:
        freeze(model)
    return model


def freeze(model):
    """
    Stop gradients to every parameter of model and set eval mode.
    """
    for p in model.parameters():
        p.requires_grad_(False)
    model.eval()
    return model


def interpolate(ref0, ref2, model):
    """
    Midpoint frame between two references, clamped to [0, 1].

    ``ref0`` and ``ref2`` are [B, 3, H, W] or [3, H, W] tensors.
    """
    if ref0.shape != ref2.shape:
        raise ValueError("reference shapes differ: %s vs %s" %
                         (tuple(ref0.shape), tuple(ref2.shape)))
    squeeze = ref0.ndim == 3
    if squeeze:
        ref0, ref2 = ref0[None], ref2[None]
    if any(p.requires_grad for p in model.parameters()):
        out = model(ref0, ref2)
    else:
        with torch.no_grad():
            out = model(ref0, ref2)
    out = out.clamp(0.0, 1.0)
    return out[0] if squeeze else out


def pretrain_interpolator(triplets, epochs, seed, spec=None, lr=1e-3,
                          batch_size=4, crop=224, verb=False):
    """
    Train a small-learned interpolator on frame triples.

    Parameters
    ----------
    triplets : ndarray
        Training triples [N, 3, 3, H, W] as made by
        :func:`kmfv.process.synth.make_triplets`.
    epochs : int
        Passes over the triples, zero returns the initialised network.
    seed : int
        Seed for initialisation, shuffling and crop positions.
    spec : dict, optional
        Interpolator specification, default ``interp_spec()``.
    lr : float
        Adam learning rate.
    batch_size : int
        Triples per step.
    crop : int or None
        Square crop taken from every triple, None uses whole frames.
    verb : bool
        Print the mean loss of every epoch.

    Returns
    -------
    model : UNetInterpolator
        Trained network, frozen.
    losses : list of float
        Mean L1 loss of each epoch.

    """
    if spec is None:
        spec = interp_spec()
    spec = dict(spec, kind="small-learned", frozen=False)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    model = build_interpolator(spec)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=lr)

    n, _, _, h, w = triplets.shape
    ch = h if crop is None else min(crop, h)
    cw = w if crop is None else min(crop, w)
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            y0 = int(rng.integers(0, h - ch + 1))
            x0 = int(rng.integers(0, w - cw + 1))
            batch = torch.from_numpy(np.ascontiguousarray(
                triplets[idx, :, :, y0:y0 + ch, x0:x0 + cw]))
            pred = model(batch[:, 0], batch[:, 2])
            loss = F.l1_loss(pred, batch[:, 1])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / n)
        if verb:
            print("interp epoch %d loss %.6f" % (epoch, losses[-1]))
    return freeze(model), losses


def save_interpolator(filename, model, spec, overwrite=False):
    """
    Save a trained interpolator, returning its checkpoint id.
    """
    meta = {"kind": "interpolator", "spec": dict(spec, ckpt_id=None)}
    return ckpt.write_module(filename, model, meta, overwrite=overwrite)


def load_interpolator(filename):
    """
    Load an interpolator saved by :func:`save_interpolator`.

    Returns the frozen model and its specification, with ``ckpt_id`` set.
    """
    meta, params = ckpt.read(filename)
    if meta.get("kind") != "interpolator":
        raise IOError("%s is not an interpolator archive" % filename)
    spec = dict(meta["spec"], ckpt_id=meta["ckpt_id"], frozen=True)
    model = build_interpolator(spec)
    ckpt.load_module_arrays(model, params)
    return freeze(model), spec
