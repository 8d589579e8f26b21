"""Rank-one difference matrices and the equivalent-channel identity.

For a codeword difference ``d = c_k - e_k`` at one channel use, ``C = d d^H``
has a single nonzero eigenvalue ``||d||^2``. Rotating the fading row into the
eigenbasis gives an equivalent set of i.i.d. Gaussian channels of which only
one, ``beta_{i0}``, multiplies every coordinate of the transmitted point:
``Omega C Omega^H = |beta_{i0}|^2 ||d||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cimimo.channel import MimoConfig, sample_channel
from cimimo.constellation import Constellation

RANK_TOL = 1e-10
COORD_TOL = 1e-9


def difference_outer(ck, ek) -> np.ndarray:
    ck = np.asarray(ck, dtype=complex).ravel()
    ek = np.asarray(ek, dtype=complex).ravel()
    if ck.shape != ek.shape:
        raise ValueError(f"length mismatch: {ck.size} vs {ek.size}")
    d = ck - ek
    return np.outer(d, d.conj())


def rank_one_decompose(C) -> tuple[np.ndarray, np.ndarray, int]:
    """Hermitian eigendecomposition ``C = V D V^H`` of a rank-one matrix.

    Returns ``(V, D, i0)`` where ``D`` is diagonal and ``i0`` indexes its only
    eigenvalue above ``RANK_TOL * trace(C)``.
    """
    C = np.asarray(C, dtype=complex)
    tr = float(np.real(np.trace(C)))
    if not tr > 0:
        raise ValueError("zero difference")
    w, V = np.linalg.eigh((C + C.conj().T) / 2)
    big = np.flatnonzero(np.abs(w) > RANK_TOL * tr)
    if big.size != 1:
        raise ValueError(f"rank > 1 (found {big.size} significant eigenvalues)")
    return V, np.diag(w), int(big[0])


def equivalent_channels(omega, V) -> np.ndarray:
    """``beta = omega @ V`` for a fading row ``omega`` (length N)."""
    omega = np.asarray(omega, dtype=complex).ravel()
    V = np.asarray(V, dtype=complex)
    if V.shape != (omega.size, omega.size):
        raise ValueError(f"dimension mismatch: omega has {omega.size} entries, V is {V.shape}")
    return omega @ V


@dataclass
class TrialRecord:
    rank_ok: bool | None  # None when c_k == e_k and the identity does not apply
    identity_residual: float
    trace: float


@dataclass
class DiversityReport:
    records: list[TrialRecord] = field(default_factory=list)
    coordinate_hamming: int = 0

    @property
    def checked(self) -> list[TrialRecord]:
        return [r for r in self.records if r.rank_ok is not None]

    @property
    def skipped(self) -> int:
        return len(self.records) - len(self.checked)

    @property
    def max_residual(self) -> float:
        return max((r.identity_residual for r in self.checked), default=0.0)

    def failures(self, tol: float = 1e-9) -> int:
        return sum(1 for r in self.checked if not r.rank_ok or r.identity_residual >= tol)

    @property
    def passed(self) -> bool:
        return self.failures() == 0


def theorem1_residual(omega, ck, ek) -> TrialRecord:
    """Relative gap between ``Omega C Omega^H`` and ``|beta_{i0}|^2 trace(C)``."""
    C = difference_outer(ck, ek)
    tr = float(np.real(np.trace(C)))
    if tr == 0.0:
        return TrialRecord(None, 0.0, 0.0)
    try:
        V, _, i0 = rank_one_decompose(C)
    except ValueError:
        return TrialRecord(False, np.inf, tr)
    omega = np.asarray(omega, dtype=complex).ravel()
    beta = equivalent_channels(omega, V)
    lhs = float(np.real(omega @ C @ omega.conj()))
    rhs = abs(beta[i0]) ** 2 * tr
    scale = max(tr * float(np.vdot(omega, omega).real), np.finfo(float).tiny)
    return TrialRecord(True, abs(lhs - rhs) / scale, tr)


def verify_theorem1(
    rng: np.random.Generator,
    cfg: MimoConfig,
    constellation: Constellation,
    trials: int,
    force_equal: Sequence[int] = (),
) -> DiversityReport:
    """Check the equivalent-channel identity on random fading rows and symbol pairs.

    Each trial draws a fading row to one receive antenna and two independent
    N-antenna symbol vectors; trials listed in ``force_equal`` reuse ``c_k``
    as ``e_k`` and are reported as not applicable.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    forced = set(force_equal)
    q = len(constellation)
    report = DiversityReport()
    for t in range(trials):
        omega = sample_channel(rng, MimoConfig(cfg.n_tx, 1))[0]
        ck = constellation.points[rng.integers(0, q, cfg.n_tx)]
        ek = ck.copy() if t in forced else constellation.points[rng.integers(0, q, cfg.n_tx)]
        report.records.append(theorem1_residual(omega, ck, ek))
        # the trial sequence read as one length-`trials` codeword pair
        report.coordinate_hamming += coordinate_hamming(ck[None], ek[None])
    return report


def _as_uses(seq) -> np.ndarray:
    a = np.asarray(seq, dtype=complex)
    return a.reshape(a.shape[0], -1) if a.ndim else a.reshape(1, 1)


def pairwise_exponent(c_seq, e_seq, fading: Sequence[np.ndarray]) -> float:
    """Squared Euclidean distance ``d_E^2(e, c)`` seen through the fading.

    ``c_seq``/``e_seq`` are (l, N) arrays of transmit vectors and ``fading``
    holds one (M, N) matrix per channel use.
    """
    c = _as_uses(c_seq)
    e = _as_uses(e_seq)
    if c.shape != e.shape:
        raise ValueError(f"codeword shapes differ: {c.shape} vs {e.shape}")
    if len(fading) != c.shape[0]:
        raise ValueError(f"{c.shape[0]} channel uses but {len(fading)} fading matrices")
    total = 0.0
    for h, d in zip(fading, c - e):
        h = np.asarray(h, dtype=complex)
        if h.shape[-1] != d.size:
            raise ValueError("fading matrix does not match the number of transmit antennas")
        total += float(np.sum(np.abs(h @ d) ** 2))
    return total


def pairwise_exponent_quadratic(c_seq, e_seq, fading: Sequence[np.ndarray]) -> float:
    """Same quantity as :func:`pairwise_exponent`, via ``sum Omega_j C Omega_j^H``."""
    c = _as_uses(c_seq)
    e = _as_uses(e_seq)
    if c.shape != e.shape or len(fading) != c.shape[0]:
        raise ValueError("codeword and fading lengths must agree")
    total = 0.0
    for h, ck, ek in zip(fading, c, e):
        C = difference_outer(ck, ek)
        for omega in np.atleast_2d(h):
            total += float(np.real(omega @ C @ omega.conj()))
    return total


def coordinate_hamming(c_seq, e_seq) -> int:
    """Number of real coordinates (2N per use) that differ between two codewords."""
    c = _as_uses(c_seq)
    e = _as_uses(e_seq)
    if c.shape != e.shape:
        raise ValueError(f"codeword shapes differ: {c.shape} vs {e.shape}")
    d = c - e
    return int(np.sum(np.abs(d.real) > COORD_TOL) + np.sum(np.abs(d.imag) > COORD_TOL))


def symbol_hamming(c_seq, e_seq) -> int:
    c = _as_uses(c_seq)
    e = _as_uses(e_seq)
    if c.shape != e.shape:
        raise ValueError(f"codeword shapes differ: {c.shape} vs {e.shape}")
    return int(np.sum(np.abs(c - e) > COORD_TOL))
