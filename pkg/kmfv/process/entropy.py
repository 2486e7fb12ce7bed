"""
Quantization, likelihood models and CDF tables for the latent channels.

The hyper-latent z is modelled by a per-channel learned density
(:class:`FactorizedPrior`), the latent y by a Gaussian whose mean and scale
come from the hyper-decoder (:class:`GaussianConditional`).  Training
replaces rounding by additive uniform noise.  Coding uses 16-bit tables from
:func:`build_cdf_tables` with :mod:`kmfv.process.rangecoder`.
"""

import numpy as np
import scipy.special
import torch
from compressai.entropy_models import EntropyBottleneck
from compressai.entropy_models import \
    GaussianConditional as CompressaiGaussianConditional
from compressai.ops import quantize_ste

from .rangecoder import TOTAL

QUANT_MODES = ("noise", "round", "ste")
SCALE_BOUND = 0.11
LIKELIHOOD_BOUND = 1e-9
TAIL_MASS = 1e-9
SCALE_TABLE_TOP = 256.
SCALE_TABLE_LEVELS = 64
MAX_SUPPORT = 1 << 14


################
# Quantization #
################


def quantize(x, mode, means=None):
    """
    Quantize a latent tensor.

    Parameters
    ----------
    x : Tensor
        Latent values.
    mode : {'noise', 'round', 'ste'}
        'noise' adds uniform noise in [-0.5, 0.5) (training), 'round'
        rounds (inference), 'ste' rounds in the forward pass and passes
        gradients straight through.
    means : Tensor, optional
        Rounding is centred on these values: round(x - means) + means.

    """
    if mode not in QUANT_MODES:
        raise ValueError("unknown quantization mode %r" % (mode, ))
    if mode == "noise":
        return x + torch.empty_like(x).uniform_(-0.5, 0.5)
    rnd = quantize_ste if mode == "ste" else torch.round
    if means is None:
        return rnd(x)
    return rnd(x - means) + means


def estimate_bits(likelihoods):
    """
    Information content -sum(log2(p)) of a likelihood array.

    Accepts a Tensor (result stays differentiable) or an array_like.
    Raises ValueError for non-positive likelihoods.
    """
    if isinstance(likelihoods, torch.Tensor):
        if bool((likelihoods <= 0).any()):
            raise ValueError("likelihoods must be positive")
        return -torch.log2(likelihoods).sum()
    p = np.asarray(likelihoods, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("likelihoods must be positive")
    return float(-np.log2(p).sum())


#####################
# Likelihood models #
#####################


class FactorizedPrior(EntropyBottleneck):
    """
    Per-channel learned cumulative density for the hyper-latent.

    The density network is compressai's
    :class:`~compressai.entropy_models.EntropyBottleneck`.  Quantization
    rounds to integers without the median offset so the coded symbols are
    round(z).
    """

    def __init__(self, channels, filters=(3, 3, 3), init_scale=10.,
                 likelihood_bound=LIKELIHOOD_BOUND):
        super().__init__(channels, filters=filters, init_scale=init_scale,
                         tail_mass=TAIL_MASS,
                         likelihood_bound=likelihood_bound)
        # table support comes from factorized_support, quantiles stay fixed
        self.quantiles.requires_grad_(False)

    def cumulative(self, x):
        """
        Continuous CDF at points x of shape [C, n], in float64.
        """
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(x, dtype=np.float32))
            logits = self._logits_cumulative(x[:, None, :],
                                             stop_gradient=True)
            return torch.sigmoid(logits.to(torch.float64))[:, 0, :]

    def likelihood(self, z):
        """
        Probability mass of the unit bins centred on z, [B, C, H, W].
        """
        b, c, h, w = z.shape
        values = z.permute(1, 0, 2, 3).reshape(c, 1, -1)
        lik = self._likelihood(values)
        # compressai >= 1.2 also returns the cumulative logits
        if isinstance(lik, tuple):
            lik = lik[0]
        lik = self.likelihood_lower_bound(lik)
        return lik.reshape(c, b, h, w).permute(1, 0, 2, 3)

    def forward(self, z, mode="noise"):
        z_hat = quantize(z, mode)
        return z_hat, self.likelihood(z_hat)


class GaussianConditional(CompressaiGaussianConditional):
    """
    Gaussian likelihood of unit bins with per-element mean and scale.

    Scales are floored at ``scale_bound``.  CDF tables for coding come from
    :func:`build_cdf_tables`, not from compressai's scale table.
    """

    def __init__(self, scale_bound=SCALE_BOUND,
                 likelihood_bound=LIKELIHOOD_BOUND):
        super().__init__(None, scale_bound=scale_bound, tail_mass=TAIL_MASS,
                         likelihood_bound=likelihood_bound)

    def likelihood(self, y_hat, scales, means=None):
        lik = self._likelihood(y_hat, scales, means)
        return self.likelihood_lower_bound(lik)

    def forward(self, y, scales, means=None, mode="noise"):
        y_hat = quantize(y, mode, means)
        return y_hat, self.likelihood(y_hat, scales, means)


##############
# CDF tables #
##############


def gaussian_scale_table(floor=SCALE_BOUND, top=SCALE_TABLE_TOP,
                         levels=SCALE_TABLE_LEVELS):
    """
    Log-spaced Gaussian scales, one CDF table row each.
    """
    return np.exp(np.linspace(np.log(floor), np.log(top), levels))


def scale_index(scales, table):
    """
    Row of the smallest table scale not below each scale.
    """
    scales = np.asarray(scales, dtype=np.float64)
    idx = np.searchsorted(table, scales, side='left')
    return np.minimum(idx, len(table) - 1).astype(np.int64)


def quantize_cdf(edges):
    """
    16-bit cumulative frequencies from continuous CDF values at bin edges.

    ``edges`` holds the CDF at the L + 1 edges of L regular bins.  Mass
    outside the first and last edge goes to a trailing escape symbol.  Every
    symbol receives a frequency of at least one.
    """
    edges = np.asarray(edges, dtype=np.float64)
    nbins = edges.size - 1
    c = np.empty(nbins + 2)
    c[0] = 0.0
    c[1:-1] = edges[1:] - edges[0]
    c[-1] = 1.0
    cdf = np.rint(c * TOTAL).astype(np.int64)
    k = np.arange(nbins + 2)
    d = np.maximum.accumulate(cdf - k)
    d = np.minimum(d, TOTAL - nbins - 1)
    cdf = d + k
    cdf[0] = 0
    cdf[-1] = TOTAL
    return cdf


def _gaussian_rows(scales, tail_mass):
    rows = []
    offsets = []
    q = scipy.special.ndtri(1 - tail_mass / 2)
    for s in np.asarray(scales, dtype=np.float64):
        tail = int(np.ceil(s * q))
        edges = (np.arange(-tail, tail + 2) - 0.5) / s
        rows.append(quantize_cdf(scipy.special.ndtr(edges)))
        offsets.append(-tail)
    return rows, offsets


def factorized_support(prior, tail_mass=TAIL_MASS):
    """
    Symmetric integer half-width R covering all channels of a prior.

    R doubles from 8 until the mass outside [-R - 0.5, R + 0.5] drops below
    tail_mass in every channel.
    """
    r = 8
    while r < MAX_SUPPORT:
        ends = np.tile([-r - 0.5, r + 0.5], (prior.channels, 1))
        cdf = prior.cumulative(ends).numpy()
        if np.all(cdf[:, 0] + (1 - cdf[:, 1]) < tail_mass):
            break
        r *= 2
    return r


def _factorized_rows(prior, tail_mass):
    r = factorized_support(prior, tail_mass)
    grid = np.arange(-r, r + 2) - 0.5
    cdf = prior.cumulative(np.tile(grid, (prior.channels, 1))).numpy()
    rows = []
    offsets = []
    for c in range(prior.channels):
        pmf = np.diff(cdf[c])
        keep = np.nonzero(pmf * TOTAL >= 1)[0]
        if keep.size == 0:
            first, last = 0, pmf.size - 1
        else:
            first, last = keep[0], keep[-1]
        rows.append(quantize_cdf(cdf[c, first:last + 2]))
        offsets.append(first - r)
    return rows, offsets


def build_cdf_tables(model, source, tail_mass=TAIL_MASS):
    """
    Build range coder tables.

    Parameters
    ----------
    model : {'gaussian', 'factorized'}
        Kind of likelihood model.
    source : array_like or FactorizedPrior
        Table scales for 'gaussian' (each at least the scale floor), the
        prior module for 'factorized' (one row per channel).
    tail_mass : float, optional
        Mass left outside the regular support.

    Returns
    -------
    tables : dict
        ``cdf`` int32 [R, Lmax + 2] padded with 65536, ``lengths`` and
        ``offsets`` int64 [R].

    """
    if model == "gaussian":
        scales = np.asarray(source, dtype=np.float64)
        if np.any(scales < SCALE_BOUND * (1 - 1e-6)):
            raise ValueError("gaussian table scales must be >= %g" %
                             SCALE_BOUND)
        rows, offsets = _gaussian_rows(scales, tail_mass)
    elif model == "factorized":
        rows, offsets = _factorized_rows(source, tail_mass)
    else:
        raise ValueError("unknown entropy model %r" % (model, ))

    width = max(len(r) for r in rows)
    cdf = np.full((len(rows), width), TOTAL, dtype=np.int32)
    for i, row in enumerate(rows):
        cdf[i, :len(row)] = row
    lengths = np.array([len(r) - 2 for r in rows], dtype=np.int64)
    return {"cdf": cdf, "lengths": lengths,
            "offsets": np.array(offsets, dtype=np.int64)}


def table_bits(symbols, indexes, tables):
    """
    Ideal code length in bits of symbols under quantized tables, escape
    payload excluded.
    """
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    indexes = np.asarray(indexes, dtype=np.int64).ravel()
    lengths = tables["lengths"][indexes]
    k = symbols - tables["offsets"][indexes]
    k = np.where((k < 0) | (k >= lengths), lengths, k)
    cdf = tables["cdf"]
    freq = cdf[indexes, k + 1].astype(np.int64) - cdf[indexes, k]
    return float(-np.log2(freq / TOTAL).sum())
