"""Flat Rayleigh MIMO channel with AWGN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MimoConfig:
    n_tx: int
    n_rx: int

    def __post_init__(self):
        if int(self.n_tx) < 1 or int(self.n_rx) < 1:
            raise ValueError("antenna counts must be positive")

    def __str__(self):
        return f"{self.n_tx}x{self.n_rx}"


@dataclass(frozen=True)
class SnrPoint:
    es_over_n0_db: float

    def __post_init__(self):
        if not np.isfinite(self.es_over_n0_db):
            raise ValueError("SNR must be finite")


def _cn(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with ``E|z|^2 = variance``."""
    return np.sqrt(variance / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(rng: np.random.Generator, cfg: MimoConfig, size=None) -> np.ndarray:
    """Draw an n_rx x n_tx fading matrix with i.i.d. CN(0, 1) entries.

    With ``size`` a batch of shape ``(size, n_rx, n_tx)`` is returned.
    """
    shape = (cfg.n_rx, cfg.n_tx) if size is None else (size, cfg.n_rx, cfg.n_tx)
    return _cn(rng, shape)


def noise_variance(snr: SnrPoint, cfg: MimoConfig, energy: float = 1.0) -> float:
    """Per-receive-antenna noise variance N0 for a total-power Es/N0.

    Es is the total energy radiated per channel use by all transmit antennas,
    ``n_tx * energy``.
    """
    if energy <= 0:
        raise ValueError("constellation energy must be positive")
    return cfg.n_tx * energy * 10.0 ** (-snr.es_over_n0_db / 10.0)


def transmit(h: np.ndarray, x: np.ndarray, n0: float, rng: np.random.Generator) -> np.ndarray:
    """``y = h @ x + w`` with ``w ~ CN(0, n0 I)``; batched over leading axes."""
    h = np.asarray(h)
    x = np.asarray(x)
    if n0 < 0:
        raise ValueError("noise variance must be non-negative")
    if h.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: channel has {h.shape[-1]} inputs, x has {x.shape[-1]}")
    y = np.einsum("...rt,...t->...r", h, x)
    if n0 > 0:
        y = y + _cn(rng, y.shape, n0)
    return y


def log_likelihood(y: np.ndarray, h: np.ndarray, x: np.ndarray, n0: float) -> float:
    """Gaussian log-density of ``y`` given ``x`` without the ``-n_rx ln(pi n0)`` term."""
    if n0 <= 0:
        raise ValueError("noise variance must be positive")
    y = np.asarray(y)
    h = np.asarray(h)
    x = np.asarray(x)
    if h.shape[-1] != x.shape[-1] or h.shape[-2] != y.shape[-1]:
        raise ValueError("dimension mismatch between y, h and x")
    r = y - np.einsum("...rt,...t->...r", h, x)
    return -np.sum(np.abs(r) ** 2, axis=-1) / n0


def candidate_log_likelihoods(y: np.ndarray, h: np.ndarray, candidates: np.ndarray, n0: float) -> np.ndarray:
    """Log-likelihoods of every candidate transmit vector for a batch of observations.

    ``y`` is (S, n_rx), ``h`` is (S, n_rx, n_tx), ``candidates`` is (K, n_tx);
    the result is (S, K).
    """
    hz = np.einsum("srt,kt->skr", h, candidates)
    diff = y[:, None, :] - hz
    return -(diff.real**2 + diff.imag**2).sum(axis=-1) / n0
