"""Monte Carlo constrained mutual information for CM, BICM and coordinate interleaving.

All estimators work in the partially coherent regime: the receiver knows the
fading matrix, while symbols (or coordinates) it is not currently decoding are
marginalized out. Every sample draws one (x, H, noise) triple and, for BICM and
CI, scores all bit or coordinate positions against it, which realizes the
average over the interleaver switch exactly rather than by sampling it.

Samples are split into fixed-size chunks. Chunk ``j`` of an estimate seeded
with ``seed`` uses ``SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (j,))``
so results depend only on (seed, samples, chunk_size), never on scheduling.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from cimimo.channel import MimoConfig, SnrPoint, candidate_log_likelihoods, noise_variance, sample_channel
from cimimo.constellation import (
    Constellation,
    coordinate_alphabets,
    entropy_bits,
    rotate,
    union_alphabet,
)

log = logging.getLogger(__name__)

SCHEMES = ("cm", "bicm", "ci")
DEFAULT_CHUNK = 2000
# float64 entries kept live per log-likelihood block
_BLOCK_BUDGET = 1 << 21
_LN2 = np.log(2.0)

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class MiEstimate:
    value: float
    std_error: float
    samples: int


@dataclass(frozen=True)
class SchemeSpec:
    scheme: str
    constellation: Constellation
    cfg: MimoConfig
    rotation: float = 0.0
    fading: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.scheme == "bicm" and self.constellation.labels is None:
            raise ValueError("BICM requires a labeled constellation")
        if self.rotation and self.scheme != "ci":
            raise ValueError("rotation only applies to the CI scheme")

    @property
    def effective_constellation(self) -> Constellation:
        return rotate(self.constellation, self.rotation) if self.rotation else self.constellation

    def ceiling(self) -> float:
        """Largest mutual information the scheme can carry per channel use."""
        c = self.effective_constellation
        if self.scheme == "ci":
            u = union_alphabet(*coordinate_alphabets(c))
            return 2 * self.cfg.n_tx * entropy_bits(u.probs)
        return self.cfg.n_tx * np.log2(len(c))


@dataclass
class _Moments:
    """Streaming count/mean/sum-of-squared-deviations with an associative merge."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray) -> "_Moments":
        mean = float(np.mean(values))
        return cls(values.size, mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "_Moments") -> "_Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta**2 * self.n * other.n / n
        return _Moments(n, mean, m2)

    def estimate(self) -> MiEstimate:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return MiEstimate(self.mean, float(np.sqrt(var / self.n)), self.n)


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child_seed(seed: SeedLike, index: int) -> np.random.SeedSequence:
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(index),))


def chunk_sizes(samples: int, chunk_size: int = DEFAULT_CHUNK) -> list[int]:
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    full, rest = divmod(samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _product_indices(base: int, digits: int) -> np.ndarray:
    """All ``digits``-tuples over ``range(base)``, first digit most significant."""
    grids = np.indices((base,) * digits).reshape(digits, -1)
    return grids.T


def _channel_batch(rng, cfg: MimoConfig, n: int, fading: bool) -> np.ndarray:
    if fading:
        return sample_channel(rng, cfg, size=n)
    return np.broadcast_to(np.eye(cfg.n_rx, cfg.n_tx, dtype=complex), (n, cfg.n_rx, cfg.n_tx))


def _receive(rng, h: np.ndarray, x: np.ndarray, n0: float) -> np.ndarray:
    y = np.einsum("srt,st->sr", h, x)
    w = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + np.sqrt(n0 / 2) * w


def _blocks(n: int, k: int, n_rx: int):
    step = max(1, _BLOCK_BUDGET // max(1, k * n_rx))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def score_cm(c: Constellation, y: np.ndarray, h: np.ndarray, sym: np.ndarray, n0: float) -> np.ndarray:
    """Per-sample CM information ``N log2|Q| - log2(sum_z p(y|z) / p(y|x))``.

    ``sym`` holds the transmitted symbol index per antenna, shape (S, N).
    """
    q, nt = len(c), sym.shape[1]
    cand = c.points[_product_indices(q, nt)]
    flat = sym @ (q ** np.arange(nt - 1, -1, -1))
    out = np.empty(len(y))
    for sl in _blocks(len(y), len(cand), y.shape[1]):
        ll = candidate_log_likelihoods(y[sl], h[sl], cand, n0)
        ll_x = ll[np.arange(ll.shape[0]), flat[sl]]
        out[sl] = (logsumexp(ll, axis=1) - ll_x) / _LN2
    return nt * np.log2(q) - out


def score_bicm(c: Constellation, y: np.ndarray, h: np.ndarray, sym: np.ndarray, n0: float) -> np.ndarray:
    """Per-sample BICM information summed over all N*log2|Q| label bits."""
    q, nt = len(c), sym.shape[1]
    bits = c.label_bits()  # (q, m)
    m = bits.shape[1]
    cand = c.points[_product_indices(q, nt)]
    out = np.zeros(len(y))
    for sl in _blocks(len(y), len(cand), y.shape[1]):
        b = sl.stop - sl.start
        ll = candidate_log_likelihoods(y[sl], h[sl], cand, n0).reshape((b,) + (q,) * nt)
        total = logsumexp(ll.reshape(b, -1), axis=1)
        for a in range(nt):
            others = tuple(ax + 1 for ax in range(nt) if ax != a)
            per_sym = logsumexp(ll, axis=others) if others else ll  # (b, q)
            tx_bits = bits[sym[sl, a]]  # (b, m)
            for j in range(m):
                match = bits[None, :, j] == tx_bits[:, j, None]  # (b, q)
                sub = logsumexp(np.where(match, per_sym, -np.inf), axis=1)
                out[sl] += (total - sub) / _LN2
    return nt * m - out


def score_ci(c: Constellation, y: np.ndarray, h: np.ndarray, kappa: np.ndarray, n0: float) -> np.ndarray:
    """Per-sample CI information summed over the 2N label coordinates.

    ``kappa`` holds union-alphabet indices of the transmitted coordinates in
    label order (quadrature, in-phase, quadrature, ...), shape (S, 2N).
    """
    u = union_alphabet(*coordinate_alphabets(c))
    q, npos = len(u), kappa.shape[1]
    uniform = bool(np.allclose(u.probs, 1.0 / q, rtol=0, atol=1e-12))
    coord_idx = _product_indices(q, npos)  # (K, 2N), label order
    coords = u.values[coord_idx]
    cand = coords[:, 1::2] + 1j * coords[:, 0::2]
    log_prior = None if uniform else np.log(u.probs)[coord_idx].sum(axis=1)
    out = np.zeros(len(y))
    for sl in _blocks(len(y), len(cand), y.shape[1]):
        b = sl.stop - sl.start
        ll = candidate_log_likelihoods(y[sl], h[sl], cand, n0)
        if log_prior is not None:
            ll = ll + log_prior
        total = logsumexp(ll, axis=1)
        ll = ll.reshape((b,) + (q,) * npos)
        rows = np.arange(b)
        for i in range(npos):
            others = tuple(ax + 1 for ax in range(npos) if ax != i)
            marg = logsumexp(ll, axis=others)  # (b, q)
            out[sl] += (total - marg[rows, kappa[sl, i]]) / _LN2
    # per-coordinate entropy; log2(q) when the marginal is uniform
    return npos * entropy_bits(u.probs) - out


def ci_transmit_vectors(c: Constellation, kappa: np.ndarray) -> np.ndarray:
    """Map label-ordered coordinate indices to per-antenna complex symbols."""
    u = union_alphabet(*coordinate_alphabets(c))
    return u.values[kappa[:, 1::2]] + 1j * u.values[kappa[:, 0::2]]


def _cm_values(c, cfg, n0, n, rng, fading):
    sym = rng.integers(0, len(c), size=(n, cfg.n_tx))
    h = _channel_batch(rng, cfg, n, fading)
    y = _receive(rng, h, c.points[sym], n0)
    return score_cm(c, y, h, sym, n0)


def _bicm_values(c, cfg, n0, n, rng, fading):
    sym = rng.integers(0, len(c), size=(n, cfg.n_tx))
    h = _channel_batch(rng, cfg, n, fading)
    y = _receive(rng, h, c.points[sym], n0)
    return score_bicm(c, y, h, sym, n0)


def _ci_values(c, cfg, n0, n, rng, fading):
    u = union_alphabet(*coordinate_alphabets(c))
    kappa = rng.choice(len(u), size=(n, 2 * cfg.n_tx), p=u.probs)
    h = _channel_batch(rng, cfg, n, fading)
    y = _receive(rng, h, ci_transmit_vectors(c, kappa), n0)
    return score_ci(c, y, h, kappa, n0)


_KERNELS = {"cm": _cm_values, "bicm": _bicm_values, "ci": _ci_values}


def _run_chunk(task) -> _Moments:
    scheme, c, cfg, n0, n, seed, fading = task
    rng = np.random.default_rng(seed)
    values = _KERNELS[scheme](c, cfg, n0, n, rng, fading)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite mutual information sample in {scheme}")
    return _Moments.of(values)


def _tasks(spec: SchemeSpec, snr: SnrPoint, samples: int, seed: SeedLike, chunk_size: int):
    c = spec.effective_constellation
    n0 = noise_variance(snr, spec.cfg)
    return [
        (spec.scheme, c, spec.cfg, n0, n, child_seed(seed, j), spec.fading)
        for j, n in enumerate(chunk_sizes(samples, chunk_size))
    ]


def _pool(moments: Sequence[_Moments]) -> MiEstimate:
    acc = _Moments()
    for m in moments:
        acc = acc.merge(m)
    return acc.estimate()


def estimate(spec: SchemeSpec, snr: SnrPoint, samples: int, seed: SeedLike, chunk_size: int = DEFAULT_CHUNK) -> MiEstimate:
    """Single-point estimate for any scheme, computed serially."""
    return _pool([_run_chunk(t) for t in _tasks(spec, snr, samples, seed, chunk_size)])


def mi_cm(
    c: Constellation,
    cfg: MimoConfig,
    snr: SnrPoint,
    samples: int,
    seed: SeedLike,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    fading: bool = True,
) -> MiEstimate:
    """I(x; y | H) for x uniform over the N-fold product of ``c``."""
    return estimate(SchemeSpec("cm", c, cfg, fading=fading), snr, samples, seed, chunk_size)


def mi_bicm(
    c: Constellation,
    cfg: MimoConfig,
    snr: SnrPoint,
    samples: int,
    seed: SeedLike,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    fading: bool = True,
) -> MiEstimate:
    """Sum over the N*log2|Q| label bits of I(bit; y | H).

    The MIMO label concatenates per-antenna labels in antenna order; each
    bit metric marginalizes over every transmit vector, so interference from
    the other antennas is averaged out.
    """
    return estimate(SchemeSpec("bicm", c, cfg, fading=fading), snr, samples, seed, chunk_size)


def mi_ci(
    c: Constellation,
    cfg: MimoConfig,
    snr: SnrPoint,
    samples: int,
    seed: SeedLike,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    fading: bool = True,
) -> MiEstimate:
    """Sum over the 2N label coordinates of I(coordinate; y | H) after ideal CI.

    Coordinates are drawn i.i.d. from the union-alphabet marginal, so the
    transmit alphabet is the enhanced constellation. For a uniform marginal
    the prior cancels out of the likelihood ratios; otherwise both sums are
    weighted by the product prior and the per-coordinate entropy replaces
    ``log2 q``.
    """
    return estimate(SchemeSpec("ci", c, cfg, fading=fading), snr, samples, seed, chunk_size)


def mi_ci_rotated(
    c: Constellation,
    phi: float,
    cfg: MimoConfig,
    snr: SnrPoint,
    samples: int,
    seed: SeedLike,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    fading: bool = True,
) -> MiEstimate:
    return mi_ci(rotate(c, phi), cfg, snr, samples, seed, chunk_size=chunk_size, fading=fading)


def default_workers() -> int:
    env = os.environ.get("CIMIMO_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    spec: SchemeSpec,
    snr_grid: Sequence[SnrPoint],
    samples: int,
    seed: SeedLike,
    workers: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[MiEstimate]:
    """Estimate one scheme over an SNR grid.

    Grid point ``k`` is seeded with ``child_seed(seed, k)``, so it equals the
    single-point estimator called with that seed. Chunks run on a process
    pool and are pooled in submission order.
    """
    if not snr_grid:
        raise ValueError("SNR grid must not be empty")
    workers = default_workers() if workers is None else int(workers)
    per_point = [_tasks(spec, snr, samples, child_seed(seed, k), chunk_size) for k, snr in enumerate(snr_grid)]
    flat = [t for tasks in per_point for t in tasks]
    if workers <= 1 or len(flat) == 1:
        moments = [_run_chunk(t) for t in flat]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            moments = list(ex.map(_run_chunk, flat))
    out = []
    pos = 0
    for snr, tasks in zip(snr_grid, per_point):
        est = _pool(moments[pos : pos + len(tasks)])
        pos += len(tasks)
        log.debug("%s %s %.2f dB -> %.4f +/- %.4f", spec.scheme, spec.cfg, snr.es_over_n0_db, est.value, est.std_error)
        out.append(est)
    return out
