"""Complex constellations, coordinate alphabets and the CI-enhanced alphabet.

Point ordering convention: square QAM and every enhanced constellation list
points quadrature-major, i.e. ``index = i_im * L + i_re`` with both coordinate
levels ascending. Coordinate position 0 is the quadrature (imaginary) part and
position 1 the in-phase (real) part, matching the N-antenna label layout
``x(m+1) = x[2m] * j + x[2m+1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

DEDUP_TOL = 1e-9

# Smith's folded labeling for the 6x6-minus-corners cross: an 8x4 Gray grid
# whose outer columns are moved into the top/bottom rows. Keys are integer
# (re, im) grid coordinates in {-5,...,5}.
_CROSS32_LABELS = {
    (-3, 5): 0b00010, (-1, 5): 0b00011, (1, 5): 0b10011, (3, 5): 0b10010,
    (-5, 3): 0b00110, (-3, 3): 0b01110, (-1, 3): 0b01010, (1, 3): 0b11010, (3, 3): 0b11110, (5, 3): 0b10110,
    (-5, 1): 0b00111, (-3, 1): 0b01111, (-1, 1): 0b01011, (1, 1): 0b11011, (3, 1): 0b11111, (5, 1): 0b10111,
    (-5, -1): 0b00101, (-3, -1): 0b01101, (-1, -1): 0b01001, (1, -1): 0b11001, (3, -1): 0b11101, (5, -1): 0b10101,
    (-5, -3): 0b00100, (-3, -3): 0b01100, (-1, -3): 0b01000, (1, -3): 0b11000, (3, -3): 0b11100, (5, -3): 0b10100,
    (-3, -5): 0b00000, (-1, -5): 0b00001, (1, -5): 0b10001, (3, -5): 0b10000,
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _gray(k):
    return k ^ (k >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Finite complex alphabet with a prior and an optional bit labeling.

    ``labels[k]`` is the integer label of ``points[k]``; bit position 0 is the
    most significant of ``bits_per_symbol`` bits.
    """

    points: np.ndarray
    probs: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if points.size == 0:
            raise ValueError("constellation must have at least one point")
        if probs.shape != points.shape:
            raise ValueError("probs must have one entry per point")
        if not np.all(np.isfinite(points)):
            raise ValueError("constellation points must be finite")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be positive and sum to 1")
        dist = np.abs(points[:, None] - points[None, :])
        np.fill_diagonal(dist, np.inf)
        if np.any(dist < DEDUP_TOL):
            raise ValueError("constellation points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "probs", _frozen(probs))

        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).ravel()
            n = points.size
            if n & (n - 1) or n < 2:
                raise ValueError("labeling requires a power-of-two constellation size")
            if labels.shape != points.shape or len(set(labels.tolist())) != n:
                raise ValueError("labeling must be a bijection onto the points")
            if labels.min() < 0 or labels.max() >= n:
                raise ValueError("labels must fit in log2(size) bits")
            object.__setattr__(self, "labels", _frozen(labels))

    def __len__(self):
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(len(self)))

    @property
    def energy(self) -> float:
        return float(np.sum(self.probs * np.abs(self.points) ** 2))

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.probs, 1.0 / len(self), rtol=0, atol=1e-12))

    def label_bits(self) -> np.ndarray:
        """Labels as a (size, bits_per_symbol) 0/1 array, MSB first."""
        if self.labels is None:
            raise ValueError("constellation has no labeling")
        m = self.bits_per_symbol
        shifts = np.arange(m - 1, -1, -1)
        return (self.labels[:, None] >> shifts[None, :]) & 1

    def label_strings(self) -> list[str]:
        if self.labels is None:
            raise ValueError("constellation has no labeling")
        return [format(int(v), f"0{self.bits_per_symbol}b") for v in self.labels]


@dataclass(frozen=True, eq=False)
class CoordinateAlphabet:
    """Real coordinate values (strictly increasing) with marginal probabilities."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if values.shape != probs.shape or values.size == 0:
            raise ValueError("values and probs must be non-empty and equally sized")
        if np.any(np.diff(values) <= DEDUP_TOL):
            raise ValueError("alphabet values must be strictly increasing and distinct")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be positive and sum to 1")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "probs", _frozen(probs))

    def __len__(self):
        return self.values.size

    def index_of(self, value: float) -> int:
        hits = np.flatnonzero(np.abs(self.values - value) <= DEDUP_TOL)
        if hits.size == 0:
            raise ValueError(f"value {value!r} is not in the coordinate alphabet")
        return int(hits[0])


def _marginal(values: np.ndarray, weights: np.ndarray) -> CoordinateAlphabet:
    order = np.argsort(values, kind="stable")
    out_v: list[float] = []
    out_p: list[float] = []
    for v, w in zip(values[order], weights[order]):
        if out_v and v - out_v[-1] <= DEDUP_TOL:
            out_p[-1] += w
        else:
            out_v.append(float(v))
            out_p.append(float(w))
    p = np.array(out_p)
    return CoordinateAlphabet(np.array(out_v), p / p.sum())


def make_qam(order: int) -> Constellation:
    """Unit-energy QAM: square grids for 4/16/64 and the 32-point cross.

    Square grids carry a per-axis binary-reflected Gray labeling whose bits
    alternate in-phase/quadrature, most significant first. The cross uses a
    fixed impure Gray map with penalty 7/6.
    """
    if order not in (4, 16, 32, 64):
        raise ValueError(f"unsupported constellation order: {order}")
    if order == 32:
        levels = np.arange(-5, 6, 2)
        grid = [(re, im) for im in levels for re in levels if (re, im) in _CROSS32_LABELS]
        pts = np.array([complex(re, im) for re, im in grid])
        labels = np.array([_CROSS32_LABELS[g] for g in grid])
    else:
        side = int(round(np.sqrt(order)))
        k = side.bit_length() - 1
        idx = np.arange(side)
        levels = 2 * idx - (side - 1)
        i_im, i_re = np.divmod(np.arange(order), side)
        pts = levels[i_re] + 1j * levels[i_im]
        g_re, g_im = _gray(i_re), _gray(i_im)
        labels = np.zeros(order, dtype=np.int64)
        for b in range(k - 1, -1, -1):
            labels = (labels << 1) | ((g_re >> b) & 1)
            labels = (labels << 1) | ((g_im >> b) & 1)
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(pts, np.full(order, 1.0 / order), labels)


def make_psk(order: int) -> Constellation:
    """Unit-energy PSK, Gray labeled along the circle when order is a power of two.

    Orders divisible by four are offset by ``pi/order`` so that 4PSK sits on
    the odd multiples of ``pi/4`` and coincides with 4QAM; other orders start
    at phase 0 (BPSK is ``{+1, -1}``).
    """
    if order < 2:
        raise ValueError("PSK order must be at least 2")
    offset = np.pi / order if order % 4 == 0 else 0.0
    k = np.arange(order)
    pts = np.exp(1j * (2 * np.pi * k / order + offset))
    labels = _gray(k) if order & (order - 1) == 0 else None
    return Constellation(pts, np.full(order, 1.0 / order), labels)


CONSTELLATIONS = {
    "qam4": lambda: make_qam(4),
    "qam16": lambda: make_qam(16),
    "qam32": lambda: make_qam(32),
    "qam64": lambda: make_qam(64),
    "psk2": lambda: make_psk(2),
    "psk4": lambda: make_psk(4),
    "psk8": lambda: make_psk(8),
}


def make_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name]()
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}") from None


def rotate(c: Constellation, phi: float) -> Constellation:
    return Constellation(c.points * np.exp(1j * phi), c.probs, c.labels)


def coordinate_alphabets(c: Constellation) -> tuple[CoordinateAlphabet, CoordinateAlphabet]:
    """In-phase and quadrature alphabets with the marginals induced by ``c.probs``."""
    return _marginal(c.points.real, c.probs), _marginal(c.points.imag, c.probs)


def union_alphabet(qi: CoordinateAlphabet, qq: CoordinateAlphabet) -> CoordinateAlphabet:
    """Post-interleaving coordinate alphabet.

    A coordinate after CI is equally likely to have originated as an
    in-phase or a quadrature component, so its marginal is the average of
    the two input marginals.
    """
    values = np.concatenate([qi.values, qq.values])
    weights = np.concatenate([qi.probs, qq.probs]) / 2.0
    return _marginal(values, weights)


def _same_point_set(a: np.ndarray, b: np.ndarray) -> bool:
    if a.size != b.size:
        return False
    d = np.abs(a[:, None] - b[None, :])
    return bool(np.all(d.min(axis=1) <= DEDUP_TOL) and np.all(d.min(axis=0) <= DEDUP_TOL))


def ci_enhanced(c: Constellation) -> Constellation:
    """Effective per-antenna alphabet after coordinate interleaving.

    Points are the Cartesian product of the union alphabet with itself
    (quadrature-major), weighted by the product of union marginals. Energy is
    not renormalized. When the product reproduces the input point set the
    input labeling is carried over.
    """
    u = union_alphabet(*coordinate_alphabets(c))
    pts = (u.values[None, :] + 1j * u.values[:, None]).ravel()
    probs = np.outer(u.probs, u.probs).ravel()
    labels = None
    if c.labels is not None and _same_point_set(pts, c.points):
        match = np.argmin(np.abs(pts[:, None] - c.points[None, :]), axis=1)
        labels = c.labels[match]
    return Constellation(pts, probs / probs.sum(), labels)


def is_ci_invariant(c: Constellation) -> bool:
    return _same_point_set(ci_enhanced(c).points, c.points)


def entropy_bits(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def label_subset(c: Constellation, bit_position: int, bit_value: int) -> np.ndarray:
    """Indices of points whose label has ``bit_value`` at ``bit_position`` (0 = MSB)."""
    if c.labels is None:
        raise ValueError("constellation has no labeling")
    if not 0 <= bit_position < c.bits_per_symbol:
        raise ValueError(f"bit_position must be in [0, {c.bits_per_symbol})")
    if bit_value not in (0, 1):
        raise ValueError("bit_value must be 0 or 1")
    return np.flatnonzero(c.label_bits()[:, bit_position] == bit_value)


def coordinate_subset(m: Constellation, position: int, value: float) -> np.ndarray:
    """Indices of points of an enhanced constellation with ``value`` at ``position``.

    Position 0 selects the quadrature coordinate, position 1 the in-phase one.
    """
    if position not in (0, 1):
        raise ValueError("position must be 0 (quadrature) or 1 (in-phase)")
    coords = m.points.imag if position == 0 else m.points.real
    u = union_alphabet(*coordinate_alphabets(m))
    u.index_of(value)
    return np.flatnonzero(np.abs(coords - value) <= DEDUP_TOL)


def gray_penalty(c: Constellation) -> float:
    """Mean over points of the mean label Hamming distance to nearest neighbours.

    Pure Gray labelings score exactly 1.
    """
    if c.labels is None:
        raise ValueError("constellation has no labeling")
    d = np.abs(c.points[:, None] - c.points[None, :])
    np.fill_diagonal(d, np.inf)
    dmin = d.min()
    nearest = d <= dmin * (1 + 1e-9)
    ham = np.array([[bin(int(a ^ b)).count("1") for b in c.labels] for a in c.labels])
    per_point = (ham * nearest).sum(axis=1) / nearest.sum(axis=1)
    return float(per_point.mean())
