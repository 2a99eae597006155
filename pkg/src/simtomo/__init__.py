"""Simultaneous tomography of a quantum state and its readout noise.

The package simulates noisy Pauli-basis measurements, decodes state
coefficients and the readout noise matrix up to a one-parameter gauge,
and fixes that gauge from prior information.
"""

__version__ = "0.1.0"

from .decoder_exact import TomographyResult, ZValues, decode_exact, run_exact
from .decoder_rand import RandomizedConfig, run_randomized, shot_budget
from .gauge_fix import (
    GaugeSolution,
    apply_gauge_solution,
    decode_bsc,
    decode_linear_prior,
    fix_block_independent,
    fix_probe,
    fix_purity,
)
from .pauli import Circuit, PauliString, enumerate_basis, pauli_from_label
from .povm import Povm, computational_povm, reduce_povm
from .sim import Device, gauge_transform

__all__ = [
    "__version__",
    "Circuit",
    "Device",
    "GaugeSolution",
    "PauliString",
    "Povm",
    "RandomizedConfig",
    "TomographyResult",
    "ZValues",
    "apply_gauge_solution",
    "computational_povm",
    "decode_bsc",
    "decode_exact",
    "decode_linear_prior",
    "enumerate_basis",
    "fix_block_independent",
    "fix_probe",
    "fix_purity",
    "gauge_transform",
    "pauli_from_label",
    "reduce_povm",
    "run_exact",
    "run_randomized",
    "shot_budget",
]
