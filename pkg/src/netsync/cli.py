"""Command-line front end: synth | simulate | sweep | check.

Exit codes are a stable contract: 0 success, 1 malformed config or usage,
2 violated model assumption (including a disconnected topology), 3
integration failure. All randomness is seeded and the seeds actually used
are recorded in the output files.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    AssumptionError,
    ConfigError,
    IntegrationError,
    MatrixError,
    NetsyncError,
    TopologyError,
)
from .gains import synthesize_output_gain, synthesize_state_gain
from .linalg import expm, is_detectable, is_neutrally_stable, is_stabilizable
from .network import lyapunov_certificate, spectral_gap
from .scenario import (
    ScenarioConfig,
    build_initial_state,
    build_topology,
    load_config,
)
from .simulate import assemble, simulate, spectral_check

__all__ = ["main", "run_synth", "run_simulate", "run_sweep", "run_check"]

CSV_HEADER = "t, agent, state_index, value, ref_value, sync_error, disagreement"
SWEEP_HEADER = "value, delta, final_sync_error, runtime_seconds, status"

#: Synchronization criterion: sync_error(T*) <= TOL * (1 + sync_error(0))
#: with T* = CRITERION_HORIZON / delta.
CRITERION_TOL = 1e-4
CRITERION_HORIZON = 60.0


def _fmt(x) -> str:
    return repr(float(x))


def _synthesize(config: ScenarioConfig):
    if config.problem == "output-coupling":
        return synthesize_output_gain(config.agent)
    return synthesize_state_gain(config.agent)


def _ensure_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_yaml(path: Path, payload: dict) -> None:
    path.write_text(yaml.safe_dump(payload, sort_keys=False))


def run_synth(config: ScenarioConfig, out_dir) -> dict:
    """Synthesize the scenario's gain and write a structured gain report."""
    out = _ensure_out(out_dir)
    synthesis = _synthesize(config)
    dec = synthesis.decomposition
    residuals = {
        k: (float(v) if isinstance(v, float) else bool(v))
        for k, v in synthesis.residuals.items()
    }
    report = {
        "problem": config.problem,
        "kind": synthesis.kind,
        "n1": dec.n1,
        "n2": dec.n2,
        "gain": synthesis.gain.tolist(),
        "P": synthesis.P.tolist(),
        "S": synthesis.S.tolist(),
        "H": synthesis.H.tolist(),
        "residuals": residuals,
        "residuals_ok": True,  # synthesis validates before returning
    }
    _write_yaml(out / "gain_report.yaml", report)
    print(f"gain kind={synthesis.kind} n1={dec.n1} n2={dec.n2} -> {out / 'gain_report.yaml'}")
    return report


def _write_trajectory_csv(path: Path, run, p: int, n: int) -> None:
    lines = [CSV_HEADER]
    for k in range(run.times.size):
        t_s = _fmt(run.times[k])
        err_s = _fmt(run.sync_error[k])
        dis_s = _fmt(run.disagreement[k])
        row = run.states[k]
        ref = run.reference[k]
        for i in range(p):
            base = i * n
            for s in range(n):
                lines.append(
                    f"{t_s}, {i}, {s}, {_fmt(row[base + s])}, {_fmt(ref[s])}, "
                    f"{err_s}, {dis_s}"
                )
    path.write_text("\n".join(lines) + "\n")


def run_simulate(
    config: ScenarioConfig, out_dir, seed_override: int | None = None
) -> dict:
    """Full pipeline: synthesize, validate topology, integrate, report.

    The synchronization criterion is evaluated at T* = 60/delta via a
    one-shot matrix exponential, independent of the trajectory grid, so a
    short horizon still yields a meaningful verdict.
    """
    out = _ensure_out(out_dir)
    topology = build_topology(config, seed_override)
    if not topology.connected:
        raise TopologyError("topology not connected")
    synthesis = _synthesize(config)
    system = assemble(config.agent, synthesis, topology)
    x0, x0_seed = build_initial_state(config, topology, seed_override)

    run = simulate(system, x0, config.horizon, config.step, config.method)
    report = spectral_check(system)

    threshold = CRITERION_TOL * (1.0 + float(run.sync_error[0]))
    if not np.isfinite(report.delta):
        t_star, sync_at_star = 0.0, float(run.sync_error[0])
    elif report.delta <= 0.0:
        t_star, sync_at_star = float("inf"), float("inf")
    else:
        t_star = CRITERION_HORIZON / report.delta
        x_star = expm(system.stacked, t_star) @ x0
        ref_star = expm(system.agent.A, t_star) @ (topology.r @ x0.reshape(topology.p, -1))
        errs = np.linalg.norm(
            x_star.reshape(topology.p, -1) - ref_star[None, :], axis=1
        )
        sync_at_star = float(errs.max())
    passed = bool(sync_at_star <= threshold)

    _write_trajectory_csv(out / "trajectory.csv", run, system.p, system.n)
    topo_seed = config.topology.seed if config.topology.is_generated else None
    if config.topology.is_generated and seed_override is not None:
        topo_seed = seed_override
    summary = {
        "problem": config.problem,
        "method": config.method,
        "p": system.p,
        "n": system.n,
        "horizon": config.horizon,
        "step": config.step,
        "delta": float(report.delta) if np.isfinite(report.delta) else "inf",
        "spectral_match_error": report.match_error,
        "t_star": t_star if np.isfinite(t_star) else "inf",
        "sync_error_initial": float(run.sync_error[0]),
        "sync_error_final": float(run.sync_error[-1]),
        "sync_error_at_t_star": sync_at_star if np.isfinite(sync_at_star) else "inf",
        "criterion_threshold": threshold,
        "criterion_pass": passed,
        "disagreement_initial": float(run.disagreement[0]),
        "disagreement_final": float(run.disagreement[-1]),
        "x0_seed": x0_seed,
        "topology_seed": topo_seed,
    }
    _write_yaml(out / "summary.yaml", summary)
    print(
        f"simulated p={system.p} n={system.n} method={config.method}: "
        f"delta={summary['delta']}, criterion_pass={passed}"
    )
    return summary


def _member_config(config: ScenarioConfig, param: str, value) -> ScenarioConfig:
    topo = config.topology
    if param in ("p", "density") and not topo.is_generated:
        raise ConfigError(f"sweeping {param} requires a generated topology")
    if param == "p":
        topo = dataclasses.replace(topo, p=int(value))
    elif param == "density":
        topo = dataclasses.replace(topo, density=float(value))
    elif param == "seed":
        seeded = False
        if topo.is_generated:
            topo = dataclasses.replace(topo, seed=int(value))
            seeded = True
        x0 = config.x0
        if x0.is_random:
            x0 = dataclasses.replace(x0, seed=int(value))
            seeded = True
            config = dataclasses.replace(config, x0=x0)
        if not seeded:
            raise ConfigError("sweeping seed requires a generated topology or random x0")
    else:
        raise ConfigError(f"sweep parameter must be p, seed, or density, got {param!r}")
    return dataclasses.replace(config, topology=topo)


def run_sweep(
    config: ScenarioConfig, out_dir, param: str, values, workers: int = 1
) -> list[dict]:
    """One simulate per value; failures are recorded per row, never abort."""
    if not values:
        raise ConfigError("sweep values must be non-empty")
    out = _ensure_out(out_dir)

    def member(value):
        start = time.perf_counter()
        try:
            member_cfg = _member_config(config, param, value)
            summary = run_simulate(member_cfg, out / f"member_{param}_{value}")
            return {
                "value": value,
                "delta": summary["delta"],
                "final_sync_error": summary["sync_error_final"],
                "runtime_seconds": time.perf_counter() - start,
                "status": "ok",
            }
        except Exception as exc:  # member isolation: record, keep sweeping
            return {
                "value": value,
                "delta": "",
                "final_sync_error": "",
                "runtime_seconds": time.perf_counter() - start,
                "status": f"error: {exc}",
            }

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(member, values))

    lines = [SWEEP_HEADER]
    for row in rows:
        lines.append(
            f"{row['value']}, {row['delta']}, {row['final_sync_error']}, "
            f"{row['runtime_seconds']:.3f}, {row['status']}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"sweep {param}: {ok}/{len(rows)} members ok -> {out / 'sweep.csv'}")
    return rows


def run_check(config: ScenarioConfig, out_dir, seed_override: int | None = None) -> dict:
    """Report every model assumption; checks report rather than raise."""
    out = _ensure_out(out_dir)
    checks: dict = {}
    agent = config.agent

    stable = is_neutrally_stable(agent.A)
    if config.problem == "output-coupling":
        checks["A1_neutral_stability"] = stable
        checks["A2_detectable"] = bool(is_detectable(agent.C, agent.A))
    else:
        checks["B1_neutral_stability"] = stable
        checks["B2_stabilizable"] = bool(is_stabilizable(agent.A, agent.B))

    report: dict = {"problem": config.problem, "checks": checks}
    try:
        topology = build_topology(config, seed_override)
    except (TopologyError, MatrixError) as exc:
        checks["topology_valid"] = False
        checks["topology_connected"] = False
        report["topology_error"] = str(exc)
        topology = None
    else:
        checks["topology_valid"] = True
        checks["topology_connected"] = bool(topology.connected)

    if topology is not None and topology.connected:
        report["r"] = topology.r.tolist()
        cert = lyapunov_certificate(topology)
        ones_rt = np.outer(np.ones(topology.p), topology.r)
        hurwitz = topology.gamma - ones_rt
        res_direct = float(np.linalg.norm(
            hurwitz.T @ cert.P_cert + cert.P_cert @ hurwitz + cert.Q_cert
        ))
        res_hat = float(np.linalg.norm(
            topology.gamma.T @ cert.P_hat + cert.P_hat @ topology.gamma + cert.Q_hat
        ))
        report["certificate_residual"] = res_direct
        report["certificate_residual_projected"] = res_hat
        checks["certificate"] = bool(max(res_direct, res_hat) <= 1e-8)
        if topology.p > 1:
            delta_gamma = spectral_gap(topology)
            t_check = CRITERION_HORIZON / delta_gamma
            distance = float(np.linalg.norm(
                expm(topology.gamma, t_check) - ones_rt
            ))
            report["gamma_spectral_gap"] = delta_gamma
            report["ergodic_check_time"] = t_check
            report["ergodic_distance"] = distance
            checks["ergodic_limit"] = bool(distance <= 1e-6)

    for name, passed in checks.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
    _write_yaml(out / "check_report.yaml", report)
    return report


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="netsync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("synth", "synthesize the feedback gain and write a gain report"),
        ("simulate", "synthesize, simulate, and write trajectory + summary"),
        ("sweep", "run one simulation per sweep value and aggregate"),
        ("check", "report every model assumption for the scenario"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", required=True, help="scenario YAML file")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override every config seed")
        if name == "sweep":
            cmd.add_argument("--param", required=True, choices=("p", "seed", "density"))
            cmd.add_argument("--values", nargs="*", default=[],
                             help="sweep values (parsed per --param)")
            cmd.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out_dir = args.out or config.outputs or "out"
        if args.command == "synth":
            run_synth(config, out_dir)
        elif args.command == "simulate":
            run_simulate(config, out_dir, seed_override=args.seed)
        elif args.command == "sweep":
            caster = int if args.param in ("p", "seed") else float
            try:
                values = [caster(v) for v in args.values]
            except ValueError as exc:
                raise ConfigError(f"sweep values must be numeric: {exc}") from exc
            run_sweep(config, out_dir, args.param, values, workers=args.workers)
        elif args.command == "check":
            run_check(config, out_dir, seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MatrixError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (AssumptionError, TopologyError) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, NetsyncError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
