"""
Per-pixel separable convolution synthesis.

Every output pixel is the sum, over a set of reference frames, of a vertical
kernel times a horizontal kernel applied to the reference patch centred on
that pixel::

    out(c, x, y) = sum_r sum_{u,v} kv_r[u, x, y] * kh_r[v, x, y] *
                   P_r(c, x + u - KS // 2, y + v - KS // 2)

Kernels are indexed by pixel only and shared by the three colour channels.
Patches reaching past the frame border are reflect padded.  Kernels are not
normalised unless ``normalize=True`` (softmax over the taps).

A KernelField is a dictionary of [B, KS, H, W] (or [KS, H, W]) tensors with
the keys of :data:`KERNEL_KEYS`, the third pair present only when an
interpolated reference is used.
"""

import numpy as np
import torch

KERNEL_KEYS = (("kv0", "kh0"), ("kv2", "kh2"), ("kvi", "khi"))


def field_keys(nrefs):
    """
    Kernel pairs used with ``nrefs`` references (2 or 3).
    """
    if nrefs not in (2, 3):
        raise ValueError("synthesis uses 2 or 3 references, got %d" % nrefs)
    return KERNEL_KEYS[:nrefs]


def kernel_field_from_heads(heads):
    """
    Build a KernelField from head outputs ordered kv0, kh0, kv2, kh2[, kvi,
    khi].
    """
    if len(heads) not in (4, 6):
        raise ValueError("expected 4 or 6 kernel arrays, got %d" % len(heads))
    keys = [k for pair in field_keys(len(heads) // 2) for k in pair]
    return dict(zip(keys, heads))


def reflect_index(n, pad):
    """
    Source indices of a length n axis reflect padded by pad on both sides.

    Reflection repeats for pads longer than the axis.
    """
    i = np.arange(-pad, n + pad)
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    i = np.mod(i, period)
    return np.where(i < n, i, period - i)


def reflect_pad(frame, pad):
    """
    Reflect pad the last two dimensions of a tensor by pad pixels.
    """
    h, w = frame.shape[-2:]
    rows = torch.as_tensor(reflect_index(h, pad), device=frame.device)
    cols = torch.as_tensor(reflect_index(w, pad), device=frame.device)
    return frame.index_select(-2, rows).index_select(-1, cols)


def _check_term(frame, kv, kh):
    if kv.shape != kh.shape:
        raise ValueError("vertical and horizontal kernels differ in shape: "
                         "%s vs %s" % (tuple(kv.shape), tuple(kh.shape)))
    if kv.shape[-2:] != frame.shape[-2:]:
        raise ValueError("kernel field %s does not match frame %s" %
                         (tuple(kv.shape[-2:]), tuple(frame.shape[-2:])))
    if kv.shape[-3] % 2 != 1:
        raise ValueError("kernel size must be odd, got %d" % kv.shape[-3])
    if frame.ndim != kv.ndim:
        raise ValueError("frame and kernels must both be batched or not")


def separable_term(frame, kv, kh, normalize=False):
    """
    Apply per-pixel vertical and horizontal kernels to one reference.

    Parameters
    ----------
    frame : Tensor
        Reference frame, [B, C, H, W] or [C, H, W].
    kv, kh : Tensor
        Vertical and horizontal kernels, [B, KS, H, W] or [KS, H, W].
    normalize : bool, optional
        Softmax the kernels over their taps first.

    Returns
    -------
    out : Tensor
        Filtered frame, same shape as ``frame``.

    """
    _check_term(frame, kv, kh)
    squeeze = frame.ndim == 3
    if squeeze:
        frame, kv, kh = frame[None], kv[None], kh[None]
    if normalize:
        kv = torch.softmax(kv, dim=1)
        kh = torch.softmax(kh, dim=1)

    ks = kv.shape[1]
    h, w = frame.shape[-2:]
    padded = reflect_pad(frame, ks // 2)
    out = torch.zeros_like(frame)
    for u in range(ks):
        windows = padded[:, :, u:u + h, :].unfold(-1, ks, 1)
        horiz = torch.einsum('bchwv,bvhw->bchw', windows, kh)
        out = out + kv[:, u:u + 1] * horiz
    return out[0] if squeeze else out


def synthesize(refs, field, normalize=False):
    """
    Sum the separable terms of 2 or 3 references.

    Parameters
    ----------
    refs : sequence of Tensor
        (ref0, ref2) or (ref0, ref2, refi).
    field : dict
        KernelField with a kernel pair for every reference.
    normalize : bool, optional
        Softmax the kernels over their taps.

    Returns
    -------
    frame : Tensor
        Synthesized frame clamped to [0, 1].
    raw : Tensor
        Unclamped sum, kept for the distortion term of the loss.

    """
    pairs = field_keys(len(refs))
    shape = refs[0].shape
    for r in refs[1:]:
        if r.shape != shape:
            raise ValueError("reference shapes differ: %s vs %s" %
                             (tuple(shape), tuple(r.shape)))
    missing = [k for pair in pairs for k in pair if k not in field]
    if missing:
        raise ValueError("kernel field lacks %s" % ", ".join(missing))

    raw = 0
    for ref, (kv, kh) in zip(refs, pairs):
        raw = raw + separable_term(ref, field[kv], field[kh], normalize)
    return raw.clamp(0.0, 1.0), raw


def synthesis_macs(height, width, ks, nrefs=3, channels=3):
    """
    Multiply-accumulates used by :func:`synthesize` for one frame.
    """
    return nrefs * height * width * channels * (ks * ks + ks)


def _reflect(i, n):
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i %= period
    if i >= n:
        i = period - i
    return i


def oracle_synthesize(refs, field):
    """
    Direct per-pixel evaluation of the synthesis sum for small inputs.

    Works on unbatched arrays ([3, H, W] frames, [KS, H, W] kernels) with
    plain Python arithmetic in double precision.  Returns the unclamped
    float64 result as an ndarray.
    """
    pairs = field_keys(len(refs))
    frames = [np.asarray(_tonumpy(r), dtype=np.float64).tolist()
              for r in refs]
    nc = len(frames[0])
    nx = len(frames[0][0])
    ny = len(frames[0][0][0])
    out = np.zeros((nc, nx, ny))
    for p, (kvk, khk) in zip(frames, pairs):
        kv = np.asarray(_tonumpy(field[kvk]), dtype=np.float64).tolist()
        kh = np.asarray(_tonumpy(field[khk]), dtype=np.float64).tolist()
        ks = len(kv)
        half = ks // 2
        for c in range(nc):
            for x in range(nx):
                for y in range(ny):
                    acc = 0.0
                    for u in range(ks):
                        xs = _reflect(x + u - half, nx)
                        row = p[c][xs]
                        kvu = kv[u][x][y]
                        for v in range(ks):
                            ys = _reflect(y + v - half, ny)
                            acc += kvu * kh[v][x][y] * row[ys]
                    out[c, x, y] += acc
    return out


def _tonumpy(a):
    if isinstance(a, torch.Tensor):
        return a.detach().cpu().numpy()
    return a
