"""Constrained mutual information for MIMO fading channels with CM, BICM and
coordinate interleaving."""

from cimimo.channel import (
    MimoConfig,
    SnrPoint,
    log_likelihood,
    noise_variance,
    sample_channel,
    transmit,
)
from cimimo.constellation import (
    Constellation,
    CoordinateAlphabet,
    ci_enhanced,
    coordinate_alphabets,
    coordinate_subset,
    entropy_bits,
    gray_penalty,
    is_ci_invariant,
    label_subset,
    make_constellation,
    make_psk,
    make_qam,
    rotate,
    union_alphabet,
)
from cimimo.mi import MiEstimate, SchemeSpec, mi_bicm, mi_ci, mi_ci_rotated, mi_cm, run_sweep

__all__ = [
    "Constellation",
    "CoordinateAlphabet",
    "MiEstimate",
    "MimoConfig",
    "SchemeSpec",
    "SnrPoint",
    "ci_enhanced",
    "coordinate_alphabets",
    "coordinate_subset",
    "entropy_bits",
    "gray_penalty",
    "is_ci_invariant",
    "label_subset",
    "log_likelihood",
    "make_constellation",
    "make_psk",
    "make_qam",
    "mi_bicm",
    "mi_ci",
    "mi_ci_rotated",
    "mi_cm",
    "noise_variance",
    "rotate",
    "run_sweep",
    "sample_channel",
    "transmit",
    "union_alphabet",
]
