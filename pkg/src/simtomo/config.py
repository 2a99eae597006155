"""Experiment configuration: parsing, validation and hashing.

A configuration is a JSON object. State, noise and POVM entries are small
tagged objects, for example ``{"kind": "basis", "bits": "01"}``; see the
README for the full list. Validation errors name the offending field path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, SimTomoError
from .pauli import pauli_from_label
from .povm import Povm, computational_povm, random_povm
from .scaling import PROTOCOLS, STAGES, flip_family_noise, mixed_family_state
from .sim import basis_state, bit_flip_noise, from_coefficients, random_noise, random_state

MODES = ("exact", "randomized")
GAUGE_METHODS = ("none", "purity", "probe", "block", "linear_prior", "bsc")


def _require(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ConfigError(f"{path}.{key}: required field missing")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _number(obj, key, path, default=None):
    if default is not None and key not in obj:
        return float(default)
    val = _require(obj, key, path)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    return float(val)


def _matrix(val, path, dtype=float):
    try:
        arr = np.array(val, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric matrix ({exc})") from None
    if arr.ndim != 2:
        raise ConfigError(f"{path}: expected a 2-d array")
    return arr


def build_state(spec: dict, n: int, path: str = "state") -> np.ndarray:
    """Density matrix from a state spec."""
    kind = _require(spec, "kind", path, str)
    if kind == "basis":
        bits = _require(spec, "bits", path, str)
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise ConfigError(f"{path}.bits: expected {n} binary digits")
        return basis_state(bits)
    if kind == "coefficients":
        values = _require(spec, "values", path, dict)
        try:
            coeffs = {pauli_from_label(k): float(v) for k, v in values.items()}
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.values: {exc}") from None
        if any(p.n != n for p in coeffs):
            raise ConfigError(f"{path}.values: labels must have {n} characters")
        return from_coefficients(coeffs, n)
    if kind == "matrix":
        real = _matrix(_require(spec, "real", path), f"{path}.real")
        imag = _matrix(spec.get("imag", np.zeros_like(real)), f"{path}.imag")
        if real.shape != (2**n, 2**n) or imag.shape != real.shape:
            raise ConfigError(f"{path}: expected {2**n}x{2**n} matrices")
        return real + 1j * imag
    if kind == "mixed_family":
        if n != 2:
            raise ConfigError(f"{path}: mixed_family is a two-qubit family")
        return mixed_family_state(_number(spec, "tau", path))
    if kind == "maximally_mixed":
        return np.eye(2**n, dtype=complex) / 2**n
    if kind == "random":
        rng = np.random.default_rng(int(_number(spec, "seed", path)))
        return random_state(n, rng, weight=_number(spec, "weight", path, 1.0))
    raise ConfigError(f"{path}.kind: unknown state kind {kind!r}")


def build_noise(spec: dict, num_outcomes: int, path: str = "noise") -> np.ndarray:
    """Noise matrix from a noise spec."""
    kind = _require(spec, "kind", path, str)
    if kind == "identity":
        return np.eye(num_outcomes)
    if kind == "erasure":
        return np.full((num_outcomes, num_outcomes), 1.0 / num_outcomes)
    if kind == "flip_family":
        if num_outcomes != 4:
            raise ConfigError(f"{path}: flip_family is a two-qubit family")
        return flip_family_noise(_number(spec, "tau", path))
    if kind == "bit_flip":
        probs = _require(spec, "probs", path, list)
        a = bit_flip_noise([float(p) for p in probs])
        if a.shape[0] != num_outcomes:
            raise ConfigError(f"{path}.probs: expected one flip probability per qubit")
        return a
    if kind == "matrix":
        a = _matrix(_require(spec, "values", path), f"{path}.values")
        if a.shape != (num_outcomes, num_outcomes):
            raise ConfigError(f"{path}.values: expected a {num_outcomes}x{num_outcomes} matrix")
        return a
    if kind == "random":
        rng = np.random.default_rng(int(_number(spec, "seed", path)))
        return random_noise(num_outcomes, rng, min_u=_number(spec, "min_u", path, 0.05))
    raise ConfigError(f"{path}.kind: unknown noise kind {kind!r}")


def build_povm(spec: dict | None, n: int, path: str = "povm") -> Povm:
    spec = spec or {"kind": "computational"}
    kind = _require(spec, "kind", path, str)
    if kind == "computational":
        return computational_povm(n)
    if kind == "random":
        rng = np.random.default_rng(int(_number(spec, "seed", path)))
        return random_povm(n, int(_number(spec, "outcomes", path)), rng)
    raise ConfigError(f"{path}.kind: unknown POVM kind {kind!r}")


@dataclass
class ExperimentConfig:
    """Everything needed to rerun one command.

    Only ``n`` and the sections used by the chosen command are required.
    """

    command: str = "decode"
    n: int = 2
    state: dict = field(default_factory=lambda: {"kind": "basis", "bits": "01"})
    noise: dict = field(default_factory=lambda: {"kind": "flip_family", "tau": 0.1})
    povm: dict = field(default_factory=lambda: {"kind": "computational"})
    mode: str = "exact"
    reference: str | None = None
    gauge: dict = field(default_factory=lambda: {"method": "none"})
    randomized: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"config.{sorted(extra)[0]}: unknown field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Short SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validate(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or not 1 <= self.n <= 6:
            raise ConfigError("config.n: expected an integer between 1 and 6")
        if self.mode not in MODES:
            raise ConfigError(f"config.mode: expected one of {MODES}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("config.seed: expected a nonnegative integer")
        method = _require(self.gauge, "method", "config.gauge", str)
        if method not in GAUGE_METHODS:
            raise ConfigError(f"config.gauge.method: expected one of {GAUGE_METHODS}")
        if self.reference is not None:
            try:
                ref = pauli_from_label(self.reference)
            except ValueError as exc:
                raise ConfigError(f"config.reference: {exc}") from None
            if ref.n != self.n:
                raise ConfigError(f"config.reference: expected {self.n} characters")
        if self.sweep:
            self._validate_sweep()
        if self.calibration:
            trials = self.calibration.get("trials", 50)
            if not isinstance(trials, int) or trials < 1:
                raise ConfigError("config.calibration.trials: expected a positive integer")

    def _validate_sweep(self):
        sw = self.sweep
        if _require(sw, "protocol", "config.sweep", str) not in PROTOCOLS:
            raise ConfigError(f"config.sweep.protocol: expected one of {sorted(PROTOCOLS)}")
        if sw.get("stage", "support") not in STAGES:
            raise ConfigError(f"config.sweep.stage: expected one of {sorted(STAGES)}")
        values = _require(sw, "values", "config.sweep", list)
        if not values:
            raise ConfigError("config.sweep.values: sweep grid is empty")
        trials = sw.get("trials", 50)
        if not isinstance(trials, int) or trials < 20:
            raise ConfigError("config.sweep.trials: expected an integer >= 20")

    # builders

    def _build(self, fn, *args):
        try:
            return fn(*args)
        except ConfigError:
            raise
        except (SimTomoError, ValueError) as exc:
            raise ConfigError(f"{args[-1]}: {exc}") from None

    def build_povm(self) -> Povm:
        return self._build(build_povm, self.povm, self.n, "config.povm")

    def build_state(self) -> np.ndarray:
        return self._build(build_state, self.state, self.n, "config.state")

    def build_noise(self, num_outcomes: int) -> np.ndarray:
        return self._build(build_noise, self.noise, num_outcomes, "config.noise")
