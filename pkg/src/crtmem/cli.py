"""Command-line entry point: ``crtmem {calibrate,mermin,sweep,qpt,selftest}``.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, qcore
from . import io as cio
from .calibration import NumericalError
from .config import ConfigError, RunConfig, dump_config, load_config
from .errormodel import marginal_effect
from .gst import GateSetEstimate
from .mitigation import (
    CORRECTIONS,
    MerminReport,
    calibrate_model,
    eta_sweep,
    run_mermin_pipeline,
    run_qpt,
    sweep_curves,
)
from .selftest import run_selftest

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
_UNSET = object()

_NAMED_UNITARIES = {
    "identity": qcore.I2,
    "X": qcore.X,
    "Y": qcore.Y,
    "Z": qcore.Z,
    "H": qcore.H,
    "S": qcore.S,
    "T": qcore.T,
    "Gx": qcore.GX,
    "Gy": qcore.GY,
}


def channel_from_config(cfg: RunConfig) -> np.ndarray:
    """Unitary (applied to every qubit) or global depolarizing PTM."""
    n = cfg.qpt_n
    if cfg.channel == "depolarizing":
        return qcore.depolarizing_ptm(cfg.channel_p, n)
    if cfg.channel == "CNOT":
        return qcore.CNOT
    return qcore.kron_all([_NAMED_UNITARIES[cfg.channel]] * n)


def _shots(s: str) -> int | None:
    if s.strip().lower() == "exact":
        return None
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shots must be a positive integer or 'exact', got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"shots must be positive, got {v}")
    return v


def _seed(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {s!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (sections run, noise, mermin, flags, gst, qpt)")
    common.add_argument("--seed", type=_seed, help="override run.seed")
    common.add_argument("--out", help="override run.out_dir")
    common.add_argument("--replicas", type=int, help="override run.replicas")
    common.add_argument("--shots", type=_shots, default=_UNSET, help="override run.shots (integer or 'exact')")

    parser = argparse.ArgumentParser(prog="crtmem", description="Gamma-matrix readout error mitigation simulator")
    parser.add_argument("--version", action="version", version=f"crtmem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="T, L, Gamma and GST gatesets for one planted model")
    sub.add_parser("mermin", parents=[common], help="Mermin polynomial replicas at a single eta")
    sub.add_parser("sweep", parents=[common], help="Mermin curves over the eta grid")
    sub.add_parser("qpt", parents=[common], help="SPAM-corrected process tomography of the configured channel")
    sub.add_parser("selftest", parents=[common], help="reduced invariant suites")
    return parser


class Run:
    """Collects artifacts and writes the run report."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def report(self, results: dict) -> None:
        manifest = {name: cio.sha256(self.out / name) for name in self.files}
        cio.write_json(
            self.out / "report.json",
            {
                "tool": "crtmem",
                "version": __version__,
                "command": self.command,
                "seed": self.cfg.seed,
                "config": self.cfg.to_dict(),
                "results": results,
                "artifacts": manifest,
            },
        )


def _gateset_for(cal, q: int) -> GateSetEstimate:
    if cal.gatesets is not None:
        return cal.gatesets[q]
    sq = cal.model.per_qubit[q]
    return GateSetEstimate(rho0=sq.rho0, gx=sq.gx, gy=sq.gy, e0=marginal_effect(cal.model, q))


def cmd_calibrate(cfg: RunConfig) -> dict:
    run = Run(cfg, "calibrate")
    cal = calibrate_model(cfg.noise(), 0, cfg.bypass_gst, cfg.shots, cfg.gauge_weights)
    cio.write_stochastic(run.path("T.csv"), cal.T)
    cio.write_stochastic(run.path("gamma.csv"), cal.gamma)
    cio.write_calibration_table(run.path("calibration_table.csv"), cal.table)
    for q, L in enumerate(cal.Ls):
        cio.write_L(run.path(f"L_q{q}.csv"), L)
        source = "exact model (GST bypassed)" if cal.gatesets is None else "LGST + gauge optimization"
        run.path(f"gateset_q{q}.txt").write_text(f"# qubit {q}: {source}\n{_gateset_for(cal, q).format(4)}\n")
    results = {
        "n": cfg.n,
        "gst": not cfg.bypass_gst,
        "gamma_minus_T_frobenius": float(np.linalg.norm(cal.gamma - cal.T)),
        "povm_noise": float(np.linalg.norm(cal.model.povm.response - np.eye(2**cfg.n))),
    }
    run.report(results)
    print(f"calibrate: n={cfg.n}, ||Gamma - T||_F = {results['gamma_minus_T_frobenius']:.6g}")
    return results


def _filter_report(report: MerminReport, keep: Sequence[str]) -> dict:
    d = report.to_dict()
    drop = [c for c in CORRECTIONS if c not in keep]
    for c in drop:
        d["aggregate"].pop(c)
        for r in d["replicas"]:
            r.pop(c)
    return d


def cmd_mermin(cfg: RunConfig) -> dict:
    run = Run(cfg, "mermin")
    report = run_mermin_pipeline(cfg.mermin())
    kinds = ["exact", *[c for c in CORRECTIONS if c in cfg.corrections]]
    rows = [[r.replica, *[r.value(k) for k in kinds]] for r in report.replicas]
    cio.write_columns(run.path("per_replica.csv"), ["replica", *kinds], rows)
    results = _filter_report(report, cfg.corrections)
    run.report(results)
    for k in kinds:
        m, s = report.stats(k)
        print(f"M{cfg.order}(eta={cfg.eta}) {k:>5}: {m:.6f} +/- {s:.6f}")
    return results


def cmd_sweep(cfg: RunConfig) -> dict:
    """sweep.csv holds the plot columns (eta, exact, corrections); absolute errors go to the report."""
    run = Run(cfg, "sweep")
    reports = eta_sweep(cfg.mermin(), cfg.eta_grid)
    header, rows = sweep_curves(reports)
    chosen = [c for c in CORRECTIONS if c in cfg.corrections]
    plot = ["eta", "exact", *chosen]
    full = plot + [f"abs_{c}" for c in chosen]
    cio.write_columns(run.path("sweep.csv"), plot, [[row[header.index(h)] for h in plot] for row in rows])
    results = {"order": cfg.order, "curves": [{h: row[header.index(h)] for h in full} for row in rows]}
    run.report(results)
    print(f"sweep: {len(rows)} eta points written to {run.out / 'sweep.csv'}")
    return results


def cmd_qpt(cfg: RunConfig) -> dict:
    run = Run(cfg, "qpt")
    res = run_qpt(
        channel_from_config(cfg),
        cfg.noise(cfg.qpt_n),
        bypass_gst=cfg.bypass_gst,
        shots=cfg.shots,
        gauge_weights=cfg.gauge_weights,
        max_qubits=cfg.max_qubits,
    )
    cio.write_ptm(run.path("ptm_true.csv"), res.true_ptm)
    cio.write_ptm(run.path("ptm_est.csv"), res.estimate)
    results = {"n": cfg.qpt_n, "channel": cfg.channel, "max_deviation": res.max_deviation}
    run.report(results)
    print(f"qpt: channel={cfg.channel}, n={cfg.qpt_n}, max |PTM_est - PTM_true| = {res.max_deviation:.3e}")
    return results


COMMANDS = {"calibrate": cmd_calibrate, "mermin": cmd_mermin, "sweep": cmd_sweep, "qpt": cmd_qpt}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    if args.command == "selftest":
        results = run_selftest()
        return EXIT_OK if all(err is None for _, err in results) else EXIT_SELFTEST

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out, replicas=args.replicas)
        if args.shots is not _UNSET:
            cfg = replace(cfg, shots=args.shots)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(dump_config(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot use output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        COMMANDS[args.command](cfg)
    except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wall-clock: {time.perf_counter() - start:.3f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
