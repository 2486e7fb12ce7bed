""" Tests for kmfv/process/entropy.py and kmfv/process/rangecoder.py """

import numpy as np
import pytest
import torch
from numpy.testing import assert_array_equal, assert_allclose
from scipy.special import ndtr

from kmfv.process import entropy
from kmfv.process import rangecoder
from kmfv.fileio import bitstream


HALF = [0, 32768, 65536]


def _encode_raw(pairs):
    enc = rangecoder.RangeEncoder()
    for cum, freq in pairs:
        enc.encode(cum, freq)
    return enc.finish()


# range coder golden vectors on a two symbol table
def test_golden_payloads():
    """ hand derived payloads of a p = 1/2 alphabet """
    sym = {0: (0, 32768), 1: (32768, 32768)}
    assert _encode_raw([]) == b"\x00\x00\x00\x00"
    assert _encode_raw([sym[1]]) == bytes.fromhex("7fff8000")
    assert _encode_raw([sym[1], sym[0]]) == bytes.fromhex("7fff8000")
    assert _encode_raw([sym[0], sym[1]]) == bytes.fromhex("3fff8000")


def test_golden_chunks():
    """ framed chunks of the golden payloads """
    assert bitstream.pack_chunk(_encode_raw([(32768, 32768)])) == \
        bytes.fromhex("040000007fff8000")
    assert bitstream.pack_chunk(_encode_raw([])) == \
        bytes.fromhex("0400000000000000")


def test_golden_decode():
    """ the golden payload decodes to symbols 1, 0 """
    dec = rangecoder.RangeDecoder(bytes.fromhex("7fff8000"))
    out = []
    for _ in range(2):
        v = dec.target()
        s = 1 if v >= 32768 else 0
        dec.update(HALF[s], 32768)
        out.append(s)
    dec.finish()
    assert out == [1, 0]


def _tables(rng, nrows=4):
    rows = []
    for _ in range(nrows):
        length = int(rng.integers(1, 20))
        pmf = rng.random(length + 1) + 0.01
        edges = np.concatenate([[0.0], np.cumsum(pmf[:-1]) / pmf.sum()])
        rows.append(entropy.quantize_cdf(edges))
    width = max(len(r) for r in rows)
    cdf = np.full((nrows, width), rangecoder.TOTAL, dtype=np.int32)
    for i, r in enumerate(rows):
        cdf[i, :len(r)] = r
    return {"cdf": cdf,
            "lengths": np.array([len(r) - 2 for r in rows], dtype=np.int64),
            "offsets": rng.integers(-5, 5, nrows).astype(np.int64)}


def test_random_roundtrips():
    """ 1000 random streams decode exactly, escapes included """
    rng = np.random.default_rng(0)
    for _ in range(1000):
        tables = _tables(rng)
        n = int(rng.integers(0, 30))
        idx = rng.integers(0, len(tables["lengths"]), n)
        lo = tables["offsets"][idx] - 3
        hi = tables["offsets"][idx] + tables["lengths"][idx] + 3
        sym = rng.integers(lo, hi) if n else np.zeros(0, dtype=np.int64)
        if n and rng.random() < 0.1:
            sym[0] = int(rng.integers(-2 ** 40, 2 ** 40))
        payload = rangecoder.encode(sym, idx, tables)
        assert_array_equal(rangecoder.decode(payload, idx, tables), sym)


def test_extreme_streams():
    """ runs of frequency one symbols and alternating tails decode exactly """
    tables = {"cdf": np.array([[0, 1, 65534, 65535, 65536]], dtype=np.int32),
              "lengths": np.array([3]), "offsets": np.array([-1])}
    n = 2000
    idx = np.zeros(n, dtype=np.int64)
    streams = {
        "all-min": np.full(n, -1),
        "all-max": np.full(n, 1),
        "alternating": np.tile([-1, 1], n // 2),
        "alternating-escapes": np.tile([-2 ** 40, 2 ** 40], n // 2),
        "tails-and-body": np.tile([-1, 0, 1, 5, 0, -7], n // 6 + 1)[:n],
    }
    for name, sym in streams.items():
        sym = sym.astype(np.int64)
        payload = rangecoder.encode(sym, idx, tables)
        assert_array_equal(rangecoder.decode(payload, idx, tables), sym,
                           err_msg=name)


def test_escape_count():
    """ symbols outside the support are counted """
    tables = {"cdf": np.array([[0, 30000, 60000, 65536]], dtype=np.int32),
              "lengths": np.array([2]), "offsets": np.array([-1])}
    idx = np.zeros(5, dtype=np.int64)
    sym = np.array([-1, 0, 1, -2, 7])
    assert rangecoder.escape_count(sym, idx, tables) == 3
    payload = rangecoder.encode(sym, idx, tables)
    assert_array_equal(rangecoder.decode(payload, idx, tables), sym)


def test_corrupt_payloads():
    """ short, long and foreign payloads raise CorruptPayloadError """
    tables = {"cdf": np.array([[0, 100, 65535, 65536]], dtype=np.int32),
              "lengths": np.array([2]), "offsets": np.array([0])}
    idx = np.zeros(50, dtype=np.int64)
    payload = rangecoder.encode(np.ones(50, dtype=np.int64), idx, tables)
    with pytest.raises(rangecoder.CorruptPayloadError):
        rangecoder.decode(payload[:2], idx, tables)
    with pytest.raises(rangecoder.CorruptPayloadError):
        rangecoder.decode(payload + b"\x00", idx, tables)
    with pytest.raises(ValueError):
        rangecoder.encode([1, 2], [0], tables)


def test_quantize_cdf():
    """ quantized CDFs are strictly increasing from 0 to 65536 """
    cdf = entropy.quantize_cdf([0.0, 1e-12, 0.5, 0.5, 1.0 - 1e-12])
    assert cdf[0] == 0
    assert cdf[-1] == rangecoder.TOTAL
    assert np.all(np.diff(cdf) >= 1)
    assert len(cdf) == 6


def test_gaussian_tables():
    """ gaussian rows follow the continuous CDF within one count """
    scales = entropy.gaussian_scale_table()
    assert len(scales) == 64
    assert_allclose([scales[0], scales[-1]], [0.11, 256.0])
    tables = entropy.build_cdf_tables("gaussian", scales[[0, 20, 40]])
    for row, s in enumerate(scales[[0, 20, 40]]):
        n = tables["lengths"][row]
        off = tables["offsets"][row]
        edges = ndtr((np.arange(off, off + n + 1) - 0.5) / s)
        expected = (edges[1:] - edges[0]) * rangecoder.TOTAL
        got = tables["cdf"][row, 1:n + 1]
        assert np.max(np.abs(got - expected)) <= n + 1
    with pytest.raises(ValueError):
        entropy.build_cdf_tables("gaussian", [0.01])
    with pytest.raises(ValueError):
        entropy.build_cdf_tables("laplace", scales)


def test_scale_index():
    """ scales map to the smallest table scale not below them """
    table = entropy.gaussian_scale_table()
    idx = entropy.scale_index([0.0, table[5], table[5] * 1.01, 1e6], table)
    assert_array_equal(idx, [0, 5, 6, 63])


def test_rate_matches_estimate():
    """ coded size is within a few percent of the model estimate """
    table = entropy.gaussian_scale_table()
    row = int(entropy.scale_index([3.0], table)[0])
    s = table[row]
    rng = np.random.default_rng(1)
    sym = np.rint(rng.normal(0, s, 10000)).astype(np.int64)
    tables = entropy.build_cdf_tables("gaussian", table)
    idx = np.full(sym.size, row, dtype=np.int64)
    payload = rangecoder.encode(sym, idx, tables)

    gc = entropy.GaussianConditional()
    lik = gc.likelihood(torch.from_numpy(sym.astype(np.float32)),
                        torch.full((sym.size, ), float(s)))
    est = entropy.estimate_bits(lik)
    ratio = 8 * len(payload) / float(est)
    assert 0.98 <= ratio <= 1.05
    assert abs(entropy.table_bits(sym, idx, tables) - float(est)) < \
        0.01 * float(est)


def test_factorized_tables():
    """ factorized rows follow the prior's renormalized CDF """
    torch.manual_seed(0)
    prior = entropy.FactorizedPrior(4)
    tables = entropy.build_cdf_tables("factorized", prior)
    assert tables["cdf"].shape[0] == 4
    T = rangecoder.TOTAL
    for c in range(4):
        n = tables["lengths"][c]
        off = tables["offsets"][c]
        e = np.arange(off, off + n + 1) - 0.5
        cont = prior.cumulative(np.tile(e, (4, 1))).numpy()[c]
        expected = cont - cont[0]
        got = tables["cdf"][c, :n + 1] / T
        inner = np.minimum(cont, 1 - cont) > 1e-3
        assert np.all(np.abs(got - expected)[inner] <= 1.0 / T)


def test_factorized_prior_likelihood():
    """ likelihoods of all integers sum to about one per channel """
    torch.manual_seed(1)
    prior = entropy.FactorizedPrior(3)
    z = torch.arange(-200, 201, dtype=torch.float32).reshape(1, 1, 1, -1)
    z = z.expand(1, 3, 1, 401).contiguous()
    lik = prior.likelihood(z)
    assert lik.shape == z.shape
    assert_allclose(lik.sum(-1).detach().numpy().ravel(), 1.0, atol=1e-3)


def test_quantize_modes():
    """ noise stays within half a bin, round and ste round """
    torch.manual_seed(2)
    x = torch.randn(1000, requires_grad=True)
    noisy = entropy.quantize(x, "noise")
    assert float((noisy - x).abs().max()) <= 0.5
    assert_array_equal(entropy.quantize(x, "round").detach().numpy(),
                       torch.round(x).detach().numpy())
    means = torch.full_like(x, 0.3)
    q = entropy.quantize(x, "round", means)
    assert_allclose((q - means).detach().numpy(),
                    np.rint((x - means).detach().numpy()), atol=1e-6)
    ste = entropy.quantize(x, "ste")
    ste.sum().backward()
    assert_array_equal(x.grad.numpy(), np.ones(1000))
    with pytest.raises(ValueError):
        entropy.quantize(x, "floor")


def test_estimate_bits():
    """ -log2 likelihood, positive likelihoods only """
    assert entropy.estimate_bits([0.5, 0.25]) == 3.0
    assert float(entropy.estimate_bits(torch.tensor([0.5]))) == 1.0
    with pytest.raises(ValueError):
        entropy.estimate_bits([0.5, 0.0])


def test_gaussian_conditional_floor():
    """ scales below the floor are raised to 0.11 """
    gc = entropy.GaussianConditional()
    y = torch.zeros(3)
    a = gc.likelihood(y, torch.tensor([1e-3, 0.05, 0.11]))
    assert_allclose(a.numpy(), a.numpy()[2], rtol=1e-6)
    assert 0.99 < float(a[2]) <= 1.0
