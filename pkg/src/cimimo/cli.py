"""Command-line front end.

    cimimo mi --scheme ci --constellation qam32 --n-tx 2 --n-rx 2 -o ci32.csv
    cimimo constellation qam32 --enhanced
    cimimo diversity --n-tx 3 --trials 10000

Sweep settings may also come from a flat ``key = value`` file passed with
``--config``; command-line flags override file values.
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from cimimo.channel import MimoConfig, SnrPoint
from cimimo.constellation import (
    CONSTELLATIONS,
    ci_enhanced,
    coordinate_alphabets,
    entropy_bits,
    is_ci_invariant,
    make_constellation,
    rotate,
    union_alphabet,
)
from cimimo.diversity import verify_theorem1
from cimimo.mi import SchemeSpec, default_workers, run_sweep

log = logging.getLogger("cimimo")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
CSV_HEADER = "snr_db,mi_bits,std_error,samples"
SWEEP_SCHEMES = ("cm", "bicm", "ci", "ci-rotated")
SWEEP_CONSTELLATIONS = ("qam4", "qam16", "qam32", "qam64", "psk4", "psk8")
# rotation that turns CI-enhanced 4PSK into a 16QAM grid
DEFAULT_ROTATION_DEG = math.degrees(math.pi / 4 - math.atan(1 / 3))


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    scheme: str
    constellation: str
    n_tx: int
    n_rx: int
    snr_start_db: float = -5.0
    snr_stop_db: float = 30.0
    snr_step_db: float = 1.0
    samples: int = 20000
    seed: int = 1
    rotation_deg: Optional[float] = None
    workers: Optional[int] = None
    output: Optional[str] = None

    def validate(self) -> "SweepConfig":
        if self.scheme not in SWEEP_SCHEMES:
            raise ConfigError(f"scheme: expected one of {', '.join(SWEEP_SCHEMES)}, got {self.scheme!r}")
        if self.constellation not in SWEEP_CONSTELLATIONS:
            raise ConfigError(
                f"constellation: expected one of {', '.join(SWEEP_CONSTELLATIONS)}, got {self.constellation!r}"
            )
        for key in ("n_tx", "n_rx", "samples"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be at least 1")
        if not self.snr_step_db > 0:
            raise ConfigError("snr_step_db: must be positive")
        if self.snr_stop_db < self.snr_start_db:
            raise ConfigError("snr_stop_db: must not be below snr_start_db")
        if self.rotation_deg is not None and self.scheme != "ci-rotated":
            raise ConfigError("rotation_deg: only valid with scheme ci-rotated")
        if self.workers is None:
            self.workers = default_workers()
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")
        if self.scheme == "bicm":
            c = make_constellation(self.constellation)
            if c.labels is None:
                raise ConfigError(f"constellation: {self.constellation} has no labeling for bicm")
        return self

    def snr_grid(self) -> list[float]:
        count = math.floor((self.snr_stop_db - self.snr_start_db) / self.snr_step_db + 1e-9) + 1
        return [self.snr_start_db + k * self.snr_step_db for k in range(count)]

    def scheme_spec(self) -> SchemeSpec:
        c = make_constellation(self.constellation)
        cfg = MimoConfig(self.n_tx, self.n_rx)
        if self.scheme == "ci-rotated":
            deg = DEFAULT_ROTATION_DEG if self.rotation_deg is None else self.rotation_deg
            return SchemeSpec("ci", c, cfg, rotation=math.radians(deg))
        return SchemeSpec(self.scheme, c, cfg)


_FIELD_TYPES = {"n_tx": int, "n_rx": int, "samples": int, "seed": int, "workers": int,
                "snr_start_db": float, "snr_stop_db": float, "snr_step_db": float,
                "rotation_deg": float, "scheme": str, "constellation": str, "output": str}


def _coerce(key: str, raw) -> object:
    kind = _FIELD_TYPES[key]
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: malformed value {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _coerce(key, raw)
    return values


def parse_config(args: argparse.Namespace) -> SweepConfig:
    """Merge an optional config file with flags and validate."""
    values = read_config_file(args.config) if args.config else {}
    for f in fields(SweepConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _coerce(f.name, flag)
    missing = [k for k in ("scheme", "constellation", "n_tx", "n_rx") if k not in values]
    if missing:
        raise ConfigError(f"{missing[0]}: required")
    return SweepConfig(**values).validate()


def format_rows(snrs, estimates) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for snr, est in zip(snrs, estimates):
        buf.write(f"{snr:.6g},{est.value:.6g},{est.std_error:.6g},{est.samples}\n")
    return buf.getvalue()


def cmd_mi(cfg: SweepConfig) -> int:
    spec = cfg.scheme_spec()
    snrs = cfg.snr_grid()
    sink = None
    if cfg.output and cfg.output != "-":
        try:
            sink = open(cfg.output, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            print(f"error: cannot write {cfg.output}: {exc.strerror}", file=sys.stderr)
            return EXIT_RUNTIME
    try:
        log.info("%s %s %s: %d SNR points x %d samples", cfg.scheme, cfg.constellation, spec.cfg, len(snrs), cfg.samples)
        estimates = run_sweep(spec, [SnrPoint(s) for s in snrs], cfg.samples, cfg.seed, cfg.workers)
    except (FloatingPointError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if sink:
            sink.close()
        return EXIT_RUNTIME
    ceiling = spec.ceiling()
    for snr, est in zip(snrs, estimates):
        if est.value > ceiling + 3 * est.std_error:
            log.warning("%.2f dB: estimate %.4f exceeds ceiling %.4f", snr, est.value, ceiling)
    text = format_rows(snrs, estimates)
    if sink is None:
        sys.stdout.write(text)
    else:
        with sink:
            sink.write(text)
    return EXIT_OK


def constellation_report(name: str, rotate_deg: float = 0.0, enhanced: bool = False) -> str:
    c = make_constellation(name)
    if rotate_deg:
        c = rotate(c, math.radians(rotate_deg))
    qi, qq = coordinate_alphabets(c)
    u = union_alphabet(qi, qq)
    m = ci_enhanced(c)
    shown = m if enhanced else c
    lines = [
        f"# constellation {name}" + (f" rotated {rotate_deg:g} deg" if rotate_deg else ""),
        f"# points {len(c)}  enhanced_points {len(m)}  q_union {len(u)}",
        f"# ci_invariant {str(is_ci_invariant(c)).lower()}",
        f"# entropy_bits {entropy_bits(c.probs):.4f}  enhanced_entropy_bits {entropy_bits(m.probs):.4f}",
        "# in_phase " + " ".join(f"{v:.6g}:{p:.6g}" for v, p in zip(qi.values, qi.probs)),
        "# quadrature " + " ".join(f"{v:.6g}:{p:.6g}" for v, p in zip(qq.values, qq.probs)),
        "# union " + " ".join(f"{v:.6g}:{p:.6g}" for v, p in zip(u.values, u.probs)),
        "index,re,im,prob,label",
    ]
    labels = shown.label_strings() if shown.labels is not None else [""] * len(shown)
    for k, (z, p, lab) in enumerate(zip(shown.points, shown.probs, labels)):
        lines.append(f"{k},{z.real:.6g},{z.imag:.6g},{p:.6g},{lab}")
    return "\n".join(lines) + "\n"


def cmd_constellation(args) -> int:
    sys.stdout.write(constellation_report(args.name, args.rotate_deg or 0.0, args.enhanced))
    return EXIT_OK


def cmd_diversity(args) -> int:
    if args.trials < 1:
        print("error: trials: must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed)
    cfg = MimoConfig(args.n_tx, args.n_rx)
    c = make_constellation(args.constellation)
    worst = 0.0
    fails = skipped = checked = 0
    for _ in range(args.n_rx):
        report = verify_theorem1(rng, cfg, c, args.trials)
        worst = max(worst, report.max_residual)
        fails += report.failures()
        skipped += report.skipped
        checked += len(report.checked)
    print(f"config {cfg}  constellation {args.constellation}  trials {args.trials} per receive antenna")
    print(f"checked {checked}  passed {checked - fails}  failed {fails}  skipped_equal {skipped}")
    print(f"max_relative_residual {worst:.3e}")
    return EXIT_OK if fails == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cimimo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    mi = sub.add_parser("mi", help="mutual information sweep to CSV")
    mi.add_argument("--config", help="key = value settings file")
    mi.add_argument("--scheme", choices=SWEEP_SCHEMES)
    mi.add_argument("--constellation", choices=SWEEP_CONSTELLATIONS)
    mi.add_argument("--n-tx", dest="n_tx")
    mi.add_argument("--n-rx", dest="n_rx")
    mi.add_argument("--snr-start", dest="snr_start_db")
    mi.add_argument("--snr-stop", dest="snr_stop_db")
    mi.add_argument("--snr-step", dest="snr_step_db")
    mi.add_argument("--samples")
    mi.add_argument("--seed")
    mi.add_argument("--rotation-deg", dest="rotation_deg")
    mi.add_argument("--workers", help="defaults to $CIMIMO_WORKERS or the CPU count")
    mi.add_argument("-o", "--output", help="CSV path (stdout if omitted)")

    cons = sub.add_parser("constellation", help="describe a constellation and its CI enhancement")
    cons.add_argument("name", choices=sorted(CONSTELLATIONS))
    cons.add_argument("--rotate-deg", type=float, default=0.0)
    cons.add_argument("--enhanced", action="store_true", help="list the CI-enhanced points")

    div = sub.add_parser("diversity", help="check the equivalent-channel identity")
    div.add_argument("--n-tx", type=int, default=2)
    div.add_argument("--n-rx", type=int, default=1)
    div.add_argument("--constellation", choices=sorted(CONSTELLATIONS), default="psk4")
    div.add_argument("--trials", type=int, default=10000)
    div.add_argument("--seed", type=int, default=1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "mi":
            return cmd_mi(parse_config(args))
        if args.command == "constellation":
            return cmd_constellation(args)
        return cmd_diversity(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
