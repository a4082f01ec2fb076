"""Command-line interface.

Subcommands cover the whole pipeline: ``simulate`` a measurement record,
``estimate`` a state from a record, ``sweep`` reconstruction statistics
over seeds, ``wigner`` for quasi-probability grids, ``design`` to optimize
a waveform, and ``check`` for informational completeness.

Exit codes: 0 success, 2 config/document parse error, 3 invariant
violation, 4 record/waveform fingerprint mismatch, 5 waveform not
informationally complete. All randomness comes from seeds in the config,
so every command is deterministic and re-runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import serialize
from .config import ConfigError, ExperimentConfig, config_to_document, load_config
from .control_design import completeness_report, optimize_waveform
from .dynamics import heisenberg_history
from .estimator import (
    FingerprintMismatchError,
    estimate,
    estimate_prefix_curve,
    estimate_with_nuisance,
    write_estimate,
)
from .measurement import (
    RecordFormatError,
    noiseless_values,
    read_record,
    synthesize_record,
    write_record,
)
from .metrics import fidelity
from .serialize import format_float as _f
from .spin_algebra import measured_observable
from .wigner import wigner_function, write_wigner_csv

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_FINGERPRINT = 4
EXIT_INCOMPLETE = 5


def _history_for(config: ExperimentConfig):
    sys_ = config.spin_system()
    history = heisenberg_history(
        sys_,
        config.waveform,
        measured_observable(sys_),
        n_samples=config.n_samples,
        substeps=config.substeps,
    )
    return sys_, history


def cmd_simulate(config_path: str, out_record_path: str) -> int:
    config = load_config(config_path)
    _, history = _history_for(config)
    rho0 = config.single_state
    record = synthesize_record(rho0, history, config.sigma, config.seed, config.n_averaged)
    write_record(record, out_record_path)
    clean = noiseless_values(rho0, history)
    print(f"fingerprint: {record.waveform_fingerprint}")
    print(f"noiseless_rms: {_f(float(np.sqrt(np.mean(clean**2))))}")
    return EXIT_OK


def _parse_nuisance(spec: str) -> dict[str, tuple[float, float]]:
    params = {}
    for item in spec.split(","):
        pieces = item.split(":")
        if len(pieces) != 3:
            raise ConfigError(f"bad --nuisance entry {item!r}; expected name:low:high")
        name, lo, hi = pieces
        try:
            params[name] = (float(lo), float(hi))
        except ValueError as exc:
            raise ConfigError(f"bad --nuisance bounds in {item!r}") from exc
    return params


def cmd_estimate(
    record_path: str,
    config_path: str,
    out_estimate_path: str,
    prefix_curve: str | None = None,
    stride: int = 5,
    nuisance: str | None = None,
    budget: int = 200,
) -> int:
    record = read_record(record_path)
    config = load_config(config_path)
    sys_ = config.spin_system()
    history = None
    if nuisance:
        params = _parse_nuisance(nuisance)
        result = estimate_with_nuisance(
            record, config.waveform, sys_, params, budget=budget, substeps=config.substeps
        )
        for name, value in result.nuisance.items():
            print(f"nuisance {name}: {_f(value)}")
    else:
        _, history = _history_for(config)
        result = estimate(record, history)
    write_estimate(result, out_estimate_path, record.waveform_fingerprint)

    truth = config.states[0][1] if len(config.states) == 1 else None
    if truth is not None:
        print(f"fidelity: {_f(fidelity(truth, result.rho_ml))}")
    if prefix_curve is not None:
        if truth is None:
            print("prefix curve skipped: config does not name a single true state")
        elif nuisance:
            # the record's fingerprint cannot match a rescaled waveform
            print("prefix curve skipped: not available together with --nuisance")
        else:
            points = estimate_prefix_curve(
                record, history, truth, sys_, config.waveform,
                stride=stride, substeps=config.substeps,
            )
            with open(prefix_curve, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("time,fidelity,max_eigenvalue\n")
                for t, fid, top in points:
                    fh.write(f"{_f(t)},{_f(fid)},{_f(top)}\n")
    return EXIT_OK


def cmd_sweep(config_path: str, n_trials: int, out_csv: str, jobs: int = 4) -> int:
    if n_trials < 0:
        raise ConfigError("n_trials must be nonnegative")
    config = load_config(config_path)
    sys_, history = _history_for(config)
    tasks = [
        (trial, state_index, label, rho)
        for trial in range(n_trials)
        for state_index, (label, rho) in enumerate(config.states)
    ]

    def run(task):
        trial, state_index, label, rho = task
        seed = config.seed + trial * len(config.states) + state_index
        record = synthesize_record(rho, history, config.sigma, seed, config.n_averaged)
        result = estimate(record, history)
        return trial, state_index, label, seed, fidelity(rho, result.rho_ml)

    if tasks:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            rows = sorted(pool.map(run, tasks), key=lambda r: (r[0], r[1]))
    else:
        rows = []
    with open(out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trial,state,seed,fidelity\n")
        for trial, _idx, label, seed, fid in rows:
            fh.write(f"{trial},{label},{seed},{_f(fid)}\n")
    if rows:
        fids = np.array([r[4] for r in rows])
        q1, q3 = np.percentile(fids, [25, 75])
        print(f"trials: {len(rows)}")
        print(f"mean_fidelity: {_f(float(np.mean(fids)))}")
        print(f"median_fidelity: {_f(float(np.median(fids)))}")
        print(f"iqr_fidelity: {_f(float(q3 - q1))}")
    else:
        print("trials: 0")
    return EXIT_OK


def cmd_wigner(input_path: str, out_csv: str, n_theta: int = 181, n_phi: int = 360) -> int:
    with open(input_path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"input file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("input document must be a JSON object")
    from .spin_algebra import build_spin_system, check_density_matrix

    if "rho_ml" in doc:
        rho = serialize.pairs_to_matrix(doc["rho_ml"], "rho_ml")
        rho = check_density_matrix(rho)
        sys_ = build_spin_system((rho.shape[0] - 1) / 2.0)
    else:
        config = load_config(input_path)
        sys_ = config.spin_system()
        rho = config.single_state
    grid = wigner_function(rho, sys_, n_theta=n_theta, n_phi=n_phi)
    write_wigner_csv(grid, out_csv)
    print(f"grid: {grid.n_theta}x{grid.n_phi}")
    return EXIT_OK


def cmd_design(
    config_path: str,
    out_config_path: str,
    budget: int = 50,
    seed: int = 0,
    objective: str = "min_singular_value",
    sensitivity_weight: float = 0.0,
) -> int:
    config = load_config(config_path)
    sys_ = config.spin_system()
    result = optimize_waveform(
        sys_, config.waveform, budget=budget, seed=seed,
        n_samples=config.n_samples, substeps=config.substeps,
        objective=objective, sensitivity_weight=sensitivity_weight,
    )
    doc = config_to_document(config_path)
    doc["waveform"]["phi"] = [float(p) for p in result.waveform.phi]
    serialize.dump_path(doc, out_config_path)
    print(f"objective: {_f(result.objective)}")
    print(f"evaluations: {result.evaluations}")
    print(f"fingerprint: {result.waveform.fingerprint()}")
    return EXIT_OK


def cmd_check(config_path: str) -> int:
    config = load_config(config_path)
    _, history = _history_for(config)
    report = completeness_report(history)
    print(f"rank: {report.rank}")
    print(f"required: {report.d * report.d - 1}")
    print(f"largest_singular_value: {_f(float(report.singular_values[0]))}")
    print(f"smallest_singular_value: {_f(float(report.singular_values[-1]))}")
    print(f"complete: {str(report.complete).lower()}")
    return EXIT_OK if report.complete else EXIT_INCOMPLETE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintomo",
        description="Continuous weak-measurement tomography of a driven spin, at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a measurement record from a config")
    p.add_argument("config")
    p.add_argument("out_record")

    p = sub.add_parser("estimate", help="reconstruct a state from a record")
    p.add_argument("record")
    p.add_argument("config")
    p.add_argument("out_estimate")
    p.add_argument("--prefix-curve", metavar="CSV", default=None,
                   help="also write a time-resolved fidelity/purity curve")
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--nuisance", metavar="NAME:LO:HI[,...]", default=None,
                   help="co-estimate drive scale factors (skips the fingerprint check)")
    p.add_argument("--budget", type=int, default=200)

    p = sub.add_parser("sweep", help="fidelity statistics over trial seeds")
    p.add_argument("config")
    p.add_argument("n_trials", type=int)
    p.add_argument("out_csv")
    p.add_argument("--jobs", type=int, default=4)

    p = sub.add_parser("wigner", help="Wigner-function grid of a config state or estimate")
    p.add_argument("input", help="config JSON or estimate JSON")
    p.add_argument("out_csv")
    p.add_argument("--n-theta", type=int, default=181)
    p.add_argument("--n-phi", type=int, default=360)

    p = sub.add_parser("design", help="optimize the field-angle schedule")
    p.add_argument("config")
    p.add_argument("out_config")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", default="min_singular_value",
                   choices=["min_singular_value", "condition_number", "covariance_trace"])
    p.add_argument("--sensitivity-weight", type=float, default=0.0,
                   help="penalize conditioning loss under +-1%% Larmor drift")

    p = sub.add_parser("check", help="report informational completeness")
    p.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out_record)
        if args.command == "estimate":
            return cmd_estimate(
                args.record, args.config, args.out_estimate,
                prefix_curve=args.prefix_curve, stride=args.stride,
                nuisance=args.nuisance, budget=args.budget,
            )
        if args.command == "sweep":
            return cmd_sweep(args.config, args.n_trials, args.out_csv, jobs=args.jobs)
        if args.command == "wigner":
            return cmd_wigner(args.input, args.out_csv, n_theta=args.n_theta, n_phi=args.n_phi)
        if args.command == "design":
            return cmd_design(
                args.config, args.out_config, budget=args.budget, seed=args.seed,
                objective=args.objective, sensitivity_weight=args.sensitivity_weight,
            )
        if args.command == "check":
            return cmd_check(args.config)
        raise AssertionError(f"unhandled command {args.command}")
    except FingerprintMismatchError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_FINGERPRINT
    except (ConfigError, RecordFormatError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_PARSE
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    raise SystemExit(main())
