"""
Codec networks: the I-frame image codec and the kernel-based B-frame codec.

Both are hyperprior auto-encoders.  The B-frame encoder sees the current
frame concatenated with its references.  The B-frame decoder upsamples the
quantized latent to a K channel feature map from which one small head per
kernel predicts KS taps at every pixel; the frame is then synthesized from
the references with :func:`kmfv.process.sepconv.synthesize`.

Inference is deterministic: the encoder builds its reconstruction from the
same integer symbols the decoder reads back, so both sides agree bit for bit.
"""

import os
from collections import OrderedDict

import numpy as np
import torch
import torch.nn as nn
from compressai.layers import GDN
from compressai.models.utils import conv, deconv

from ..fileio import ckpt
from . import entropy
from . import interp
from . import rangecoder
from . import sepconv

NONLINEARITIES = ("gdn", "relu")


def model_config(M=128, N=96, K=64, KS=31, use_interpolator=True,
                 interp_kind="small-learned", normalize_kernels=False,
                 nonlinearity="gdn", downsample_stages=4, interp_base=32):
    """
    Create a model configuration dictionary.

    Parameters
    ----------
    M : int
        Latent channels.
    N : int
        Hyper-latent channels.
    K : int
        Channels of the decoder feature map feeding the kernel heads.
    KS : int
        Kernel size, odd.
    use_interpolator : bool
        Use the interpolated frame as third reference (six kernels), False
        gives the four kernel variant.
    interp_kind : {'small-learned', 'average-baseline'}
        Interpolator used when use_interpolator is True.
    normalize_kernels : bool
        Softmax kernel taps before synthesis.
    nonlinearity : {'gdn', 'relu'}
        Nonlinearity of the analysis and synthesis transforms.
    downsample_stages : int
        Stride 2 stages of the analysis transform.
    interp_base : int
        Channel width of the learned interpolator.

    """
    for name, v in (("M", M), ("N", N), ("K", K), ("KS", KS),
                    ("downsample_stages", downsample_stages)):
        if int(v) != v or v <= 0:
            raise ValueError("%s must be a positive integer" % name)
    if KS % 2 != 1:
        raise ValueError("kernel size KS must be odd, got %d" % KS)
    if nonlinearity not in NONLINEARITIES:
        raise ValueError("unknown nonlinearity %r" % (nonlinearity, ))
    if interp_kind not in interp.INTERP_KINDS:
        raise ValueError("unknown interpolator kind %r" % (interp_kind, ))
    cfg = dict()
    cfg["M"] = int(M)
    cfg["N"] = int(N)
    cfg["K"] = int(K)
    cfg["KS"] = int(KS)
    cfg["use_interpolator"] = bool(use_interpolator)
    cfg["interp_kind"] = interp_kind
    cfg["normalize_kernels"] = bool(normalize_kernels)
    cfg["nonlinearity"] = nonlinearity
    cfg["downsample_stages"] = int(downsample_stages)
    cfg["interp_base"] = int(interp_base)
    return cfg


def frame_multiple(cfg):
    """
    Frame dimensions must be divisible by this (64 by default).
    """
    return 2 ** (cfg["downsample_stages"] + 2)


def get_device():
    """
    torch device named by the KMFV_DEVICE environment variable (cpu).
    """
    return torch.device(os.environ.get("KMFV_DEVICE", "cpu"))


def _act(cfg, ch, inverse=False):
    if cfg["nonlinearity"] == "gdn":
        return GDN(ch, inverse=inverse)
    return nn.ReLU()


def _check_dims(x, cfg):
    m = frame_multiple(cfg)
    h, w = x.shape[-2:]
    if h % m or w % m:
        raise ValueError("frame size %dx%d not divisible by %d, pad frames "
                         "with kmfv.process.synth.pad_frames" % (h, w, m))


class HyperpriorCodec(nn.Module):
    """
    Hyper-encoder, hyper-decoder and entropy models shared by both codecs.
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        M, N = cfg["M"], cfg["N"]
        self.h_a = nn.Sequential(
            conv(M, N, 3, 1), nn.ReLU(),
            conv(N, N), nn.ReLU(),
            conv(N, N))
        self.h_s = nn.Sequential(
            deconv(N, M), nn.ReLU(),
            deconv(M, M * 3 // 2), nn.ReLU(),
            conv(M * 3 // 2, 2 * M, 3, 1))
        self.entropy_bottleneck = entropy.FactorizedPrior(N)
        self.gaussian_conditional = entropy.GaussianConditional()
        self.z_tables = None
        self.y_tables = None
        self.scale_table = entropy.gaussian_scale_table()

    def _hyper_decode(self, z_hat):
        means, scales = self.h_s(z_hat).chunk(2, 1)
        return means, self.gaussian_conditional.lower_bound_scale(scales)

    def hyper_round_trip(self, y, mode="round"):
        """
        Hyper-latent of y and the Gaussian parameters it decodes to.

        Returns a dictionary with ``z``, ``z_hat``, ``z_likelihoods``,
        ``means`` and ``scales`` (floored at the scale bound).
        """
        z = self.h_a(y)
        z_hat, z_lik = self.entropy_bottleneck(z, mode)
        means, scales = self._hyper_decode(z_hat)
        return {"z": z, "z_hat": z_hat, "z_likelihoods": z_lik,
                "means": means, "scales": scales}

    def latent_bundle(self, y, mode="noise"):
        """
        Quantized latents and likelihoods of y.
        """
        hyper = self.hyper_round_trip(y, mode)
        y_hat, y_lik = self.gaussian_conditional(
            y, hyper["scales"], hyper["means"], mode)
        return {"y_hat": y_hat, "z_hat": hyper["z_hat"],
                "y_likelihoods": y_lik,
                "z_likelihoods": hyper["z_likelihoods"],
                "scales": hyper["scales"]}

    def update_tables(self):
        """
        Rebuild the CDF tables from the current parameters.
        """
        self.z_tables = entropy.build_cdf_tables(
            "factorized", self.entropy_bottleneck)
        self.y_tables = entropy.build_cdf_tables("gaussian", self.scale_table)
        return self

    def _z_indexes(self, shape):
        idx = np.arange(shape[1], dtype=np.int64)[None, :, None, None]
        return np.broadcast_to(idx, shape)

    def compress_latent(self, y):
        """
        Entropy code a latent.

        Returns a dictionary with the ``z`` and ``y`` payloads, ``y_hat``
        rebuilt from the coded symbols, the model estimate ``est_bits`` and
        the number of ``escapes``.
        """
        if self.z_tables is None:
            self.update_tables()
        with torch.no_grad():
            z = self.h_a(y)
            z_sym = torch.round(z).to(torch.int64)
            z_hat = z_sym.to(y.dtype)
            means, scales = self._hyper_decode(z_hat)
            y_sym = torch.round(y - means).to(torch.int64)
            y_hat = y_sym.to(y.dtype) + means

            z_np = z_sym.cpu().numpy()
            y_np = y_sym.cpu().numpy()
            z_idx = self._z_indexes(z_np.shape)
            y_idx = entropy.scale_index(scales.cpu().numpy(),
                                        self.scale_table)
            est = (entropy.estimate_bits(
                self.entropy_bottleneck.likelihood(z_hat)) +
                entropy.estimate_bits(self.gaussian_conditional.likelihood(
                    y_hat, scales, means)))
        return {
            "z": rangecoder.encode(z_np, z_idx, self.z_tables),
            "y": rangecoder.encode(y_np, y_idx, self.y_tables),
            "y_hat": y_hat,
            "est_bits": float(est),
            "escapes": (rangecoder.escape_count(z_np, z_idx, self.z_tables) +
                        rangecoder.escape_count(y_np, y_idx, self.y_tables)),
        }

    def decompress_latent(self, z_payload, y_payload, latent_hw):
        """
        Decode the latent y_hat [1, M, h, w] from its two payloads.
        """
        if self.z_tables is None:
            self.update_tables()
        h, w = latent_hw
        dev = next(self.h_s.parameters()).device
        z_shape = (1, self.cfg["N"], h // 4, w // 4)
        z_sym = rangecoder.decode(z_payload, self._z_indexes(z_shape),
                                  self.z_tables)
        with torch.no_grad():
            z_hat = torch.from_numpy(z_sym.reshape(z_shape)).to(
                dev, torch.float32)
            means, scales = self._hyper_decode(z_hat)
            y_idx = entropy.scale_index(scales.cpu().numpy(),
                                        self.scale_table)
            y_sym = rangecoder.decode(y_payload, y_idx, self.y_tables)
            y_sym = torch.from_numpy(y_sym.reshape(means.shape)).to(dev)
            return y_sym.to(torch.float32) + means


class IFrameCodec(HyperpriorCodec):
    """
    Hyperprior image codec for I-frames.
    """

    def __init__(self, cfg):
        super().__init__(cfg)
        M = cfg["M"]
        n = cfg["downsample_stages"]
        ga = []
        gs = []
        for i in range(n):
            ga.append(conv(3 if i == 0 else M, M))
            gs.append(deconv(M, 3 if i == n - 1 else M))
            if i < n - 1:
                ga.append(_act(cfg, M))
                gs.append(_act(cfg, M, inverse=True))
        self.g_a = nn.Sequential(*ga)
        self.g_s = nn.Sequential(*gs)

    def forward(self, x, mode="noise"):
        _check_dims(x, self.cfg)
        bundle = self.latent_bundle(self.g_a(x), mode)
        raw = self.g_s(bundle["y_hat"])
        bundle["x_raw"] = raw
        bundle["x_hat"] = raw.clamp(0.0, 1.0)
        return bundle

    def iframe_code(self, x, mode="train"):
        """
        Code a frame, returning (reconstruction, bits).

        In 'train' mode bits is the differentiable estimate under noise
        quantization, in 'infer' mode it is the dictionary of coded chunks
        from :meth:`compress`.
        """
        if mode == "train":
            out = self.forward(x, "noise")
            bits = (entropy.estimate_bits(out["y_likelihoods"]) +
                    entropy.estimate_bits(out["z_likelihoods"]))
            return out["x_hat"], bits
        if mode == "infer":
            chunks = self.compress(x)
            return chunks["x_hat"], chunks
        raise ValueError("mode must be 'train' or 'infer'")

    def compress(self, x):
        _check_dims(x, self.cfg)
        with torch.no_grad():
            out = self.compress_latent(self.g_a(x))
            out["x_hat"] = self.g_s(out["y_hat"]).clamp(0.0, 1.0)
        return out

    def decompress(self, z_payload, y_payload, frame_hw):
        s = 2 ** self.cfg["downsample_stages"]
        y_hat = self.decompress_latent(
            z_payload, y_payload, (frame_hw[0] // s, frame_hw[1] // s))
        with torch.no_grad():
            return self.g_s(y_hat).clamp(0.0, 1.0)


def _kernel_head(K, KS, nrefs):
    head = nn.Sequential(
        nn.Conv2d(K, K, 3, padding=1), nn.ReLU(),
        nn.Conv2d(K, KS, 3, padding=1))
    last = head[-1]
    nn.init.normal_(last.weight, std=1e-4)
    nn.init.zeros_(last.bias)
    with torch.no_grad():
        last.bias[KS // 2] = 1.0 / np.sqrt(nrefs)
    return head


class BFrameCodec(HyperpriorCodec):
    """
    Motion-free B-frame codec with per-pixel kernel synthesis.

    With an untrained decoder every kernel pair is close to a centred tap
    of 1/sqrt(n) each, so the output starts as the mean of the n
    references.
    """

    def __init__(self, cfg):
        super().__init__(cfg)
        M, K, KS = cfg["M"], cfg["K"], cfg["KS"]
        n = cfg["downsample_stages"]
        self.nrefs = 3 if cfg["use_interpolator"] else 2
        ga = []
        trunk = []
        for i in range(n):
            ga.append(conv(3 * (1 + self.nrefs) if i == 0 else M, M))
            if i < n - 1:
                ga.append(_act(cfg, M))
            trunk.append(nn.Upsample(scale_factor=2, mode='bilinear',
                                     align_corners=False))
            trunk.append(conv(M, K if i == n - 1 else M, 3, 1))
            trunk.append(_act(cfg, M, inverse=True) if i < n - 1
                         else nn.ReLU())
        self.g_a = nn.Sequential(*ga)
        self.g_s = nn.Sequential(*trunk)
        self.heads = nn.ModuleList(
            [_kernel_head(K, KS, self.nrefs) for _ in range(2 * self.nrefs)])

    def _check_refs(self, refs):
        if len(refs) != self.nrefs:
            raise ValueError("codec expects %d references, got %d" %
                             (self.nrefs, len(refs)))

    def encode_b(self, current, refs):
        """
        Analysis transform of the current frame and its references.
        """
        self._check_refs(refs)
        _check_dims(current, self.cfg)
        for r in refs:
            if r.shape != current.shape:
                raise ValueError("reference shape %s differs from frame %s" %
                                 (tuple(r.shape), tuple(current.shape)))
        return self.g_a(torch.cat([current] + list(refs), dim=1))

    def kernel_field(self, y_hat):
        feat = self.g_s(y_hat)
        return sepconv.kernel_field_from_heads([h(feat) for h in self.heads])

    def decode_b(self, y_hat, refs):
        """
        Synthesize a B-frame from its latent and references.

        Returns (frame, unclamped frame, kernel field).
        """
        self._check_refs(refs)
        field = self.kernel_field(y_hat)
        if field["kv0"].shape[-2:] != refs[0].shape[-2:]:
            raise ValueError("latent decodes to %s, references are %s" %
                             (tuple(field["kv0"].shape[-2:]),
                              tuple(refs[0].shape[-2:])))
        x_hat, raw = sepconv.synthesize(refs, field,
                                        self.cfg["normalize_kernels"])
        return x_hat, raw, field

    def forward(self, current, refs, mode="noise"):
        bundle = self.latent_bundle(self.encode_b(current, refs), mode)
        x_hat, raw, field = self.decode_b(bundle["y_hat"], refs)
        bundle["x_hat"] = x_hat
        bundle["x_raw"] = raw
        bundle["field"] = field
        return bundle

    def compress(self, current, refs):
        with torch.no_grad():
            out = self.compress_latent(self.encode_b(current, refs))
            out["x_hat"] = self.decode_b(out["y_hat"], refs)[0]
        return out

    def decompress(self, z_payload, y_payload, refs):
        s = 2 ** self.cfg["downsample_stages"]
        h, w = refs[0].shape[-2:]
        y_hat = self.decompress_latent(z_payload, y_payload, (h // s, w // s))
        with torch.no_grad():
            return self.decode_b(y_hat, refs)[0]


class VideoCodec(nn.Module):
    """
    I-frame codec, B-frame codec and frozen interpolator of one model.
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.image_codec = IFrameCodec(cfg)
        self.bframe_codec = BFrameCodec(cfg)
        if cfg["use_interpolator"]:
            self.interpolator = interp.build_interpolator(interp.interp_spec(
                cfg["interp_kind"], base=cfg["interp_base"]))
        else:
            self.interpolator = None
        self.ckpt_id = 0
        self.interp_ckpt_id = None
        self.lam = None

    def references(self, ref0, ref2):
        """
        Reference tuple of a B-frame: (ref0, ref2[, interpolated]).
        """
        if self.interpolator is None:
            return (ref0, ref2)
        return (ref0, ref2, interp.interpolate(ref0, ref2, self.interpolator))

    def set_interpolator(self, model, ckpt_id=None):
        """
        Replace the interpolator by a trained, frozen one.
        """
        if self.interpolator is None:
            raise ValueError("model is configured without interpolator")
        self.interpolator = interp.freeze(model)
        self.interp_ckpt_id = ckpt_id
        return self

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def update_tables(self):
        self.image_codec.update_tables()
        self.bframe_codec.update_tables()
        return self

    def parameter_groups(self):
        """
        Named parameter groups in reporting order.
        """
        b = self.bframe_codec
        groups = OrderedDict()
        groups["Image codec"] = list(self.image_codec.named_parameters(
            prefix="image_codec"))
        if self.interpolator is not None:
            groups["Frame interpolator"] = list(
                self.interpolator.named_parameters(prefix="interpolator"))
        groups["%s 1D kernel sub-networks" % _count_word(len(b.heads))] = \
            list(b.heads.named_parameters(prefix="bframe_codec.heads"))
        groups["Frame auto-encoder"] = (
            list(b.g_a.named_parameters(prefix="bframe_codec.g_a")) +
            list(b.g_s.named_parameters(prefix="bframe_codec.g_s")))
        groups["Frame hyper-prior network"] = (
            list(b.h_a.named_parameters(prefix="bframe_codec.h_a")) +
            list(b.h_s.named_parameters(prefix="bframe_codec.h_s")) +
            list(b.entropy_bottleneck.named_parameters(
                prefix="bframe_codec.entropy_bottleneck")))
        return groups


def _count_word(n):
    return {4: "Four", 6: "Six"}.get(n, str(n))


def build_model(cfg=None, seed=None):
    """
    Create a VideoCodec, optionally seeding parameter initialisation.
    """
    if cfg is None:
        cfg = model_config()
    if seed is not None:
        torch.manual_seed(seed)
    return VideoCodec(cfg)


def save_model(filename, model, lam=None, overwrite=False):
    """
    Save a VideoCodec and set its ``ckpt_id``.
    """
    meta = {"kind": "codec", "cfg": model.cfg, "lambda": lam,
            "nonlinearity": model.cfg["nonlinearity"],
            "interp_ckpt_id": model.interp_ckpt_id,
            "format_version": ckpt.VERSION}
    model.ckpt_id = ckpt.write_module(filename, model, meta,
                                      overwrite=overwrite)
    model.lam = lam
    return model.ckpt_id


def load_model(filename, device=None):
    """
    Load a VideoCodec saved by :func:`save_model`.
    """
    meta, params = ckpt.read(filename)
    if meta.get("kind") != "codec":
        raise IOError("%s is not a codec archive" % filename)
    model = VideoCodec(model_config(**meta["cfg"]))
    ckpt.load_module_arrays(model, params)
    model.ckpt_id = meta["ckpt_id"]
    model.interp_ckpt_id = meta.get("interp_ckpt_id")
    model.lam = meta.get("lambda")
    model.eval()
    if device is not None:
        model.to(device)
    return model
