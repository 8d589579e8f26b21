"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Each test records its verdict through the ``verdict`` fixture, which prints the
line immediately and repeats all of them in the pytest terminal summary.
"""

import time
import warnings
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from oracles import awgn_mi_gauss_hermite

from cimimo.channel import MimoConfig, SnrPoint, sample_channel
from cimimo.cli import main
from cimimo.constellation import (
    ci_enhanced,
    entropy_bits,
    is_ci_invariant,
    make_psk,
    make_qam,
    rotate,
)
from cimimo.diversity import pairwise_exponent, pairwise_exponent_quadratic, verify_theorem1
from cimimo.mi import SchemeSpec, child_seed, mi_bicm, mi_ci, mi_cm, run_sweep

ROT = np.pi / 4 - np.arctan(1 / 3)


def sigma(*ests):
    return float(np.sqrt(sum(e.std_error**2 for e in ests)))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_c01_enhanced_exactness(verdict):
    with Timer() as t:
        m = ci_enhanced(make_qam(32))
        probs = [Fraction(p).limit_denominator(1024) for p in m.probs]
        exact_ok = all(abs(float(f) - p) < 1e-12 for f, p in zip(probs, m.probs))
        counts = Counter(probs)
        h = entropy_bits(m.probs)
    want = {Fraction(1, 64): 4, Fraction(3, 128): 16, Fraction(9, 256): 16}
    ok = len(m) == 36 and exact_ok and counts == want and abs(h - 5.1226) <= 5e-4 and t.elapsed < 1
    verdict(1, "enhanced 32QAM has 36 points, exact probabilities, H=5.1226", ok,
            f"points={len(m)} H={h:.5f} t={t.elapsed:.3f}s")
    assert ok


def test_c02_rotation_identity(verdict):
    with Timer() as t:
        m = ci_enhanced(rotate(make_psk(4), ROT))
        # 4PSK drawn as +-1 +-1j; the unnormalized 16QAM grid has coordinates +-1, +-3
        grid = np.array([complex(a, b) for b in (-3, -1, 1, 3) for a in (-3, -1, 1, 3)])
        target = grid * np.sqrt(2) * np.sin(np.arctan(1 / 3))
        err = float(np.max(np.abs(np.sort_complex(m.points * np.sqrt(2)) - np.sort_complex(target))))
        err = max(err, float(np.max(np.abs(m.points - make_qam(16).points))))
    ok = len(m) == 16 and np.allclose(m.probs, 1 / 16, atol=1e-12, rtol=0) and err < 1e-12 and t.elapsed < 1
    verdict(2, "rotated 4PSK enhances to uniform 16-point grid", ok, f"max|err|={err:.2e} t={t.elapsed:.3f}s")
    assert ok


def test_c03_invariance(verdict):
    with Timer() as t:
        flags = {n: is_ci_invariant(make_qam(n)) for n in (4, 16, 32, 64)}
    ok = flags == {4: True, 16: True, 32: False, 64: True} and t.elapsed < 1
    verdict(3, "CI invariance of square QAM, non-invariance of 32QAM", ok, f"{flags} t={t.elapsed:.3f}s")
    assert ok


def test_c04_theorem1(verdict):
    with Timer() as t:
        worst = 0.0
        fails = 0
        for n in (1, 2, 3, 4):
            rep = verify_theorem1(np.random.default_rng(100 + n), MimoConfig(n, 1), make_psk(4), 10_000)
            fails += rep.failures()
            worst = max(worst, rep.max_residual)
        rng = np.random.default_rng(7)
        pts = make_qam(16).points
        rel = 0.0
        for _ in range(1000):
            length, n_tx, n_rx = rng.integers(1, 9), rng.integers(1, 5), rng.integers(1, 5)
            c = pts[rng.integers(0, 16, (length, n_tx))]
            e = pts[rng.integers(0, 16, (length, n_tx))]
            fading = list(sample_channel(rng, MimoConfig(int(n_tx), int(n_rx)), size=int(length)))
            a = pairwise_exponent(c, e, fading)
            b = pairwise_exponent_quadratic(c, e, fading)
            rel = max(rel, abs(a - b) / max(abs(a), 1e-300))
    ok = fails == 0 and worst < 1e-9 and rel < 1e-9 and t.elapsed < 10
    verdict(4, "equivalent-channel identity and two distance forms", ok,
            f"failures={fails} max_residual={worst:.2e} form_gap={rel:.2e} t={t.elapsed:.1f}s")
    assert ok


def test_c05_psk4_ci_matches_bicm(verdict):
    bad = []
    with Timer() as t:
        for cfg in (MimoConfig(1, 1), MimoConfig(2, 1), MimoConfig(2, 2)):
            for k, db in enumerate(range(-5, 21, 5)):
                a = mi_ci(make_psk(4), cfg, SnrPoint(db), 20_000, child_seed(501, k))
                b = mi_bicm(make_psk(4), cfg, SnrPoint(db), 20_000, child_seed(502, k))
                if abs(a.value - b.value) > 3 * sigma(a, b):
                    bad.append(f"{cfg}@{db}dB")
    ok = not bad and t.elapsed < 300
    verdict(5, "4PSK CI equals Gray BICM within 3 sigma", ok, f"outliers={bad or 'none'} t={t.elapsed:.1f}s")
    assert ok


def test_c06_siso_overlap(verdict):
    worst = (0.0, None)
    bad = []
    with Timer() as t:
        for k, db in enumerate(range(-5, 26, 5)):
            a = mi_cm(make_qam(16), MimoConfig(1, 1), SnrPoint(db), 20_000, child_seed(601, k))
            b = mi_bicm(make_qam(16), MimoConfig(1, 1), SnrPoint(db), 20_000, child_seed(602, k))
            gap = a.value - b.value
            tol = max(3 * sigma(a, b), 0.05)
            if abs(gap) > worst[0]:
                worst = (abs(gap), db)
            if abs(gap) > tol:
                bad.append(f"{db}dB gap={gap:.3f}>tol={tol:.3f}")
    ok = not bad and t.elapsed < 300
    verdict(6, "SISO 16QAM CM and Gray BICM within max(3 sigma, 0.05)", ok,
            f"largest gap {worst[0]:.3f} at {worst[1]} dB; violations={bad or 'none'} t={t.elapsed:.1f}s")
    assert ok


def test_c07_mimo_gap(verdict):
    gaps = {}
    with Timer() as t:
        for cfg in (MimoConfig(2, 1), MimoConfig(2, 2)):
            for k, db in enumerate((5, 10)):
                a = mi_cm(make_psk(4), cfg, SnrPoint(db), 20_000, child_seed(701, k))
                b = mi_bicm(make_psk(4), cfg, SnrPoint(db), 20_000, child_seed(702, k))
                gaps[(cfg.n_rx, db)] = (a.value - b.value, sigma(a, b))
    significant = all(gaps[(1, db)][0] > 5 * gaps[(1, db)][1] for db in (5, 10))
    narrows = all(gaps[(2, db)][0] < gaps[(1, db)][0] for db in (5, 10))
    ok = significant and narrows and t.elapsed < 300
    detail = " ".join(f"{n}rx@{db}dB={g:.3f}(s={s:.3f})" for (n, db), (g, s) in sorted(gaps.items()))
    verdict(7, "2x1 4PSK CM-BICM gap significant and narrower at 2x2", ok, f"{detail} t={t.elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c08_ci_ordering(verdict):
    notes = []
    ok = True
    cfg = MimoConfig(2, 2)
    with Timer() as t:
        for k, db in enumerate((10, 15)):
            ci = mi_ci(make_qam(16), cfg, SnrPoint(db), 200_000, child_seed(801, k))
            bicm = mi_bicm(make_qam(16), cfg, SnrPoint(db), 200_000, child_seed(802, k))
            cm = mi_cm(make_qam(16), cfg, SnrPoint(db), 50_000, child_seed(803, k))
            above = bicm.value + 3 * sigma(bicm, ci) < ci.value
            below = ci.value <= cm.value + 3 * sigma(ci, cm)
            ok &= above and below
            notes.append(f"{db}dB bicm={bicm.value:.3f} ci={ci.value:.3f} cm={cm.value:.3f}")
    verdict(8, "16QAM 2x2: BICM < CI <= CM at mid SNR", ok, "; ".join(notes) + f" t={t.elapsed:.1f}s")
    assert ok


def test_c09_ceiling_crossing(verdict):
    cfg = MimoConfig(2, 2)
    with Timer() as t:
        ci = mi_ci(make_qam(32), cfg, SnrPoint(45), 4000, 901)
        cm = mi_cm(make_qam(32), cfg, SnrPoint(45), 4000, 902)
    ok = ci.value > 10.0 + 3 * ci.std_error and cm.value <= 10.0 + 3 * cm.std_error and t.elapsed < 600
    verdict(9, "32QAM 2x2 CI passes 10 bits, CM does not", ok,
            f"ci={ci.value:.4f}+-{ci.std_error:.1e} cm={cm.value:.4f}+-{cm.std_error:.1e} t={t.elapsed:.1f}s")
    assert ok


def test_c10_oracle_equivalence(verdict):
    worst = 0.0
    with Timer() as t:
        for k, (c, db) in enumerate((c, db) for c in (make_psk(2), make_psk(4)) for db in (0, 5, 10)):
            ref = awgn_mi_gauss_hermite(c.points, db)
            est = mi_cm(c, MimoConfig(1, 1), SnrPoint(db), 100_000, child_seed(1001, k), fading=False)
            worst = max(worst, abs(est.value - ref))
    ok = worst <= 0.01 and t.elapsed < 60
    verdict(10, "fixed-gain diagnostic matches Gauss-Hermite oracle", ok, f"max|err|={worst:.4f} t={t.elapsed:.1f}s")
    assert ok


def test_c11_crossing_behaviour(verdict):
    grid = [SnrPoint(db) for db in range(-5, 26, 5)]
    samples = 20_000
    top = run_sweep(SchemeSpec("ci", make_qam(16), MimoConfig(2, 2)), grid, samples, 1101, workers=1)
    lows = [
        run_sweep(SchemeSpec("ci", make_qam(n), MimoConfig(1, 2)), grid, samples, 1102 + i, workers=1)
        for i, n in enumerate((16, 64))
    ]
    bad = [
        f"{p.es_over_n0_db:g}dB"
        for k, p in enumerate(grid)
        for low in lows
        if top[k].value + 3 * sigma(top[k], low[k]) < low[k].value
    ]
    ok = not bad
    verdict(11, "2x2 CI 16QAM above the 1x2 CI curves (soft)", ok, f"below at {bad or 'none'}", soft=True)
    if not ok:
        warnings.warn(f"2x2 CI curve dips below a 1x2 curve at {bad}")


def test_c12_reproducibility(verdict, tmp_path):
    argv = ["mi", "--scheme", "ci", "--constellation", "qam16", "--n-tx", "2", "--n-rx", "1",
            "--snr-start", "0", "--snr-stop", "10", "--snr-step", "5", "--samples", "2000",
            "--seed", "5", "--workers", "2"]
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        assert main([*argv, "-o", str(path)]) == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    verdict(12, "byte-identical CSV for identical config, seed and workers", ok, f"{len(outs[0])} bytes")
    assert ok
