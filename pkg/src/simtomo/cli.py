"""Command-line front end.

Commands: ``run-example``, ``decode``, ``scaling``, ``calibrate``.
Exit codes: 0 success, 1 other decoding failure, 2 violated identifiability
condition, 3 golden mismatch, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_state
from .decoder_exact import check_conditions, decode_exact, run_exact
from .decoder_rand import RandomizedConfig, run_randomized
from .eliminators import PlanBook
from .errors import ConditionError, ConfigError, DomainError, GoldenMismatchError, SimTomoError
from .gauge_fix import (
    apply_gauge_solution,
    decode_bsc,
    decode_linear_prior,
    fix_block_independent,
    fix_probe,
    fix_purity,
)
from .pauli import Circuit, pauli_from_label
from .povm import computational_povm
from .scaling import DEFAULT_C_GRID, Instance, calibrate, run_sweep
from .sim import Device, basis_state, m_norm, noisy_distribution, to_coefficients, u_norm

EXIT_OK, EXIT_FAIL, EXIT_CONDITION, EXIT_GOLDEN, EXIT_CONFIG = 0, 1, 2, 3, 4
GOLDEN_TOL = 0.005

# printed two-decimal values of the two-qubit example
GOLDEN = {
    "z_identity": [0.25, 0.25, 0.25, 0.25],
    "z_ZI": [[0.53, 0.17, 0.17, 0.13], [0.17, 0.53, 0.13, 0.17], [0.17, 0.13, 0.53, 0.17], [0.13, 0.17, 0.17, 0.53]],
    "z_IZ": [[-0.03, 0.33, 0.33, 0.37], [0.33, -0.03, 0.37, 0.33], [0.33, 0.37, -0.03, 0.33], [0.37, 0.33, 0.33, -0.03]],
    "z_ZZ": [[-0.03, 0.33, 0.33, 0.37], [0.33, -0.03, 0.37, 0.33], [0.33, 0.37, -0.03, 0.33], [0.37, 0.33, 0.33, -0.03]],
    "noise_candidate": [[0.53, 0.17, 0.17, 0.13], [0.17, 0.53, 0.13, 0.17], [0.17, 0.13, 0.53, 0.17], [0.13, 0.17, 0.17, 0.53]],
    "ratio_IZ": -1.0,
    "ratio_ZZ": -1.0,
}


# --- output helpers -----------------------------------------------------------


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__}


def write_csv(path: Path, rows: list, cfg: ExperimentConfig):
    """CSV with a commented header line carrying hash, seed and version."""
    meta = _meta(cfg)
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_json(path: Path, payload: dict, cfg: ExperimentConfig):
    path.write_text(json.dumps({"meta": _meta(cfg), **payload}, indent=1, sort_keys=True), encoding="utf-8")


def _fmt_matrix(m) -> str:
    return "\n".join("  " + " ".join(f"{v:7.3f}" for v in row) for row in np.asarray(m).real)


# --- commands -----------------------------------------------------------------


def example_tables():
    """Decode the two-qubit example and return the tables that get compared."""
    povm = computational_povm(2)
    rho = basis_state("01")
    one = np.array([[0.9, 0.1], [0.1, 0.9]])
    a = np.kron(one, one)
    result = run_exact(rho, a, povm, reference="ZI")
    z = result.z
    label = pauli_from_label
    tables = {
        "z_identity": z.identity,
        "z_ZI": z.pauli[label("ZI")],
        "z_IZ": z.pauli[label("IZ")],
        "z_ZZ": z.pauli[label("ZZ")],
        "noise_candidate": result.noise,
        "ratio_IZ": result.ratios[label("IZ")],
        "ratio_ZZ": result.ratios[label("ZZ")],
    }
    sol = fix_purity(result, 1.0)
    rho_fixed, a_fixed = apply_gauge_solution(result, sol)
    return result, tables, sol, rho_fixed, a_fixed, rho, a


def golden_mismatches(tables: dict, tol: float = GOLDEN_TOL) -> list:
    out = []
    for key, expected in GOLDEN.items():
        got = np.asarray(tables[key], dtype=float)
        diff = np.abs(got - np.asarray(expected))
        for idx in zip(*np.nonzero(np.atleast_1d(diff > tol))):
            out.append(f"{key}{list(idx)}: got {np.atleast_1d(got)[idx]:.4f}, expected {np.atleast_1d(expected)[idx]}")
    return out


def cmd_run_example(args, cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    result, tables, sol, rho_fixed, a_fixed, rho, a = example_tables()
    print("z^I:", " ".join(f"{v:.3f}" for v in tables["z_identity"]))
    for key in ("z_ZI", "z_IZ", "z_ZZ"):
        print(f"{key.replace('_', '^')} [i, k]:\n{_fmt_matrix(tables[key])}")
    print(f"noise candidate (reference ZI):\n{_fmt_matrix(tables['noise_candidate'])}")
    print(f"ratios: IZ/ZI = {tables['ratio_IZ']:.3f}, ZZ/ZI = {tables['ratio_ZZ']:.3f}")
    print(f"purity gauge: alpha = {sol.alpha:.6f}")
    print(f"state after gauge fixing:\n{_fmt_matrix(rho_fixed)}")
    print(f"noise after gauge fixing:\n{_fmt_matrix(a_fixed)}")
    elapsed = time.perf_counter() - start
    print(f"elapsed: {elapsed:.3f} s")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = {
            "result": result.to_dict(),
            "tables": {k: np.asarray(v).tolist() for k, v in tables.items()},
            "gauge": {"alpha": sol.alpha, "method": sol.method},
            "state": {"real": rho_fixed.real.tolist(), "imag": rho_fixed.imag.tolist()},
            "noise": a_fixed.tolist(),
        }
        write_json(out / "run_example.json", payload, cfg)
    bad = golden_mismatches(tables)
    if bad:
        raise GoldenMismatchError("running example deviates from the printed values", bad)
    print("golden check: PASS")
    return EXIT_OK


def _gauge_solution(cfg, result, povm, rho, a):
    g = cfg.gauge
    method = g["method"]
    if method == "purity":
        nu = g.get("nu")
        if nu is None:
            nu = float(np.real(np.trace(rho @ rho)))
        return fix_purity(result, float(nu), povm)
    if method == "probe":
        probe = build_state(g.get("state", {"kind": "basis", "bits": "0" * cfg.n}), cfg.n, "config.gauge.state")
        measured = g.get("measured")
        if measured is None:
            measured = noisy_distribution(probe, a, Circuit(cfg.n, ()), povm)
        return fix_probe(result, probe, measured, povm, g.get("tol"))
    if method == "block":
        part = g.get("partition")
        if not isinstance(part, list) or len(part) != 2:
            raise ConfigError("config.gauge.partition: expected two block sizes")
        return fix_block_independent(result, part, povm)
    return None


def _decode_direct(cfg, povm, rho, a):
    """Decoders that fix the gauge themselves."""
    device = Device(rho, a, povm)
    g = cfg.gauge
    if g["method"] == "bsc":
        coeffs, flips = decode_bsc(device, cfg.n)
        return {
            "method": "bsc",
            "coefficients": {p.label: float(v) for p, v in coeffs.items()},
            "flip_probabilities": [None if np.isnan(f) else float(f) for f in flips],
        }
    try:
        state_priors = [(np.asarray(b, float), float(v)) for b, v in g.get("state_priors", [])]
        noise_priors = [(np.asarray(b, float), np.asarray(v, float)) for b, v in g.get("noise_priors", [])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.gauge: malformed prior list ({exc})") from None
    coeffs, noise = decode_linear_prior(device, state_priors, noise_priors, povm)
    return {
        "method": "linear_prior",
        "coefficients": {p.label: float(v) for p, v in coeffs.items()},
        "noise": noise.tolist(),
    }


def cmd_decode(args, cfg: ExperimentConfig) -> int:
    povm = cfg.build_povm()
    rho = cfg.build_state()
    a = cfg.build_noise(povm.num_outcomes)
    try:
        device = Device(rho, a, povm)
    except DomainError as exc:
        raise ConfigError(f"config: {exc}") from None
    check_conditions(device.rho, device.a, povm)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    payload = {"mode": cfg.mode}

    if cfg.gauge["method"] in ("bsc", "linear_prior"):
        payload["direct"] = _decode_direct(cfg, povm, device.rho, device.a)
        write_json(out / "result.json", payload, cfg)
        (out / "summary.txt").write_text(json.dumps(payload["direct"], indent=1) + "\n", encoding="utf-8")
        print(json.dumps(payload["direct"], indent=1))
        return EXIT_OK

    if cfg.mode == "exact":
        result = decode_exact(device, povm, cfg.reference, plans=PlanBook(povm))
    else:
        if not povm.is_computational:
            raise ConfigError("config.mode: randomized decoding needs computational-basis measurements")
        r = dict(cfg.randomized)
        coeffs = to_coefficients(device.rho)
        r.setdefault("beta", m_norm(coeffs) / 2)
        r.setdefault("u_norm_lb", u_norm(device.a))
        try:
            rcfg = RandomizedConfig(seed=cfg.seed, reference=pauli_from_label(cfg.reference) if cfg.reference else None, **r)
        except TypeError as exc:
            raise ConfigError(f"config.randomized: {exc}") from None
        result = run_randomized(device, rcfg)

    sol = _gauge_solution(cfg, result, povm, device.rho, device.a)
    payload["result"] = result.to_dict()
    lines = [
        f"support: {' '.join(p.label for p in result.support)}",
        f"reference: {result.reference.label}",
        "ratios: " + ", ".join(f"{p.label}={v:.6f}" for p, v in result.ratios.items()),
        f"noise candidate:\n{_fmt_matrix(result.noise)}",
    ]
    if sol is not None:
        rec = apply_gauge_solution(result, sol, povm, strict=False)
        payload["result"] = result.with_alpha(sol.alpha).to_dict()
        payload["gauge"] = {"alpha": sol.alpha, "method": sol.method, "diagnostics": sol.diagnostics, "margins": rec.margins}
        payload["state"] = {"real": rec.rho.real.tolist(), "imag": rec.rho.imag.tolist()}
        payload["noise"] = rec.noise.tolist()
        lines += [f"gauge ({sol.method}): alpha = {sol.alpha:.6f}", f"noise:\n{_fmt_matrix(rec.noise)}"]
    write_json(out / "result.json", payload, cfg)
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_scaling(args, cfg: ExperimentConfig) -> int:
    if not cfg.sweep:
        raise ConfigError("config.sweep: required for the scaling command")
    sw = cfg.sweep
    res = run_sweep(
        sw["protocol"], sw.get("stage", "support"), [float(v) for v in sw["values"]],
        seed=cfg.seed, trials=sw.get("trials", 50), points=sw.get("points", 12), threads=args.threads,
    )
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep_points.csv", res.point_rows(), cfg)
    write_csv(out / "sweep_summary.csv", res.summary_rows(), cfg)
    for row in res.summary_rows():
        flag = " (interpolated)" if row["flagged"] else ""
        print(f"{row['swept']}={row['value']:.4g}  N*={row['n_star']:.0f}{flag}")
    print(f"log-log slope: {res.slope:.3f}")
    return EXIT_OK


def cmd_calibrate(args, cfg: ExperimentConfig) -> int:
    povm = cfg.build_povm()
    if not povm.is_computational:
        raise ConfigError("config.povm: calibration needs computational-basis measurements")
    cal = dict(cfg.calibration)
    trials = cal.get("trials", 50)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("config.calibration.trials: expected a positive integer")
    rho = cfg.build_state()
    a = cfg.build_noise(povm.num_outcomes)
    coeffs = to_coefficients(rho)
    inst = Instance(rho, a, float(cal.get("beta", m_norm(coeffs) / 2)), float(cal.get("u_norm_lb", u_norm(a))))
    res = calibrate(
        inst, cal.get("grid", DEFAULT_C_GRID), trials, cfg.seed, threads=args.threads,
        epsilon=cal.get("epsilon", 0.05), epsilon_ratio=cal.get("epsilon_ratio", 1 / 3),
    )
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "calibration_rows.csv", res.rows, cfg)
    write_json(out / "calibration.json", {"c": res.c, "reached": res.reached, "rows": res.rows}, cfg)
    status = "" if res.reached else " (target not reached; best found)"
    print(f"recommended c = {res.c}{status}")
    return EXIT_OK


COMMANDS = {
    "run-example": cmd_run_example,
    "decode": cmd_decode,
    "scaling": cmd_scaling,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simtomo", description="Simultaneous state and readout-noise tomography.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    parser.add_argument("--mode", choices=("exact", "randomized"), help="decoder mode (overrides the config)")
    return parser


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        data = cfg.to_dict()
    data["command"] = args.command
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed: expected an unsigned 64-bit integer")
        data["seed"] = args.seed
    if args.mode:
        data["mode"] = args.mode
    if args.threads < 1:
        raise ConfigError("--threads: expected a positive integer")
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GoldenMismatchError as exc:
        print(f"golden mismatch: {exc}", file=sys.stderr)
        for line in exc.mismatches:
            print(f"  {line}", file=sys.stderr)
        return EXIT_GOLDEN
    except ConditionError as exc:
        print(f"condition violated: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except SimTomoError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
