"""Command-line front end.

Subcommands: ``simulate``, ``analyze``, ``sweep``, ``phase-plane``,
``dataset-check``. Configs are JSON, bulk data is CSV, plots are SVG; all
file outputs are written atomically and carry the effective config as a
leading ``# config=...`` (or ``<!-- config=... -->``) metadata line so runs
can be reproduced from their artifacts.

Exit codes: 0 success, 1 I/O error, 2 validation or parse error, 3 failed
dataset-quality gate.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _svg
from .coupled_sim import (
    CouplingConfig,
    CouplingMode,
    EmpiricalVerdict,
    classify_empirical,
    simulate,
    trajectory_to_csv,
)
from .dataset_quality import load_demonstrations, quality_report
from .diffusion_controller import DiffusionParams
from .errors import ConfigError, DatasetFormatError, ParameterError, StabkitError
from .plant import ExpertPolicy, PlantModel
from .stability_analyzer import (
    AxisSpec,
    DEFAULT_SWEEP_SIM,
    StabilityVerdict,
    analytic_1d,
    analytic_ndim,
    evaluate_sweep_cell,
    stable_boundary_points,
)

_SECTION_KEYS = {
    "plant": {"A", "B", "r"},
    "policy": {"K", "Sigma", "sigma"},
    "diffusion": {"g", "alpha", "drift", "stochastic", "inner_steps"},
    "coupling": {
        "mode",
        "dt",
        "horizon",
        "e0",
        "u0",
        "seed",
        "record_stride",
        "dt_inner",
    },
    "output": None,  # free-form path map
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated run configuration."""

    plant: PlantModel | None
    policy: ExpertPolicy | None
    diffusion: DiffusionParams | None
    coupling: CouplingConfig | None
    output: dict
    effective: dict  # config document after seed overrides, for echoing


def _check_section_keys(doc: dict, section: str, violations: list[str]):
    allowed = _SECTION_KEYS[section]
    if allowed is None:
        return
    for key in doc:
        if key not in allowed:
            violations.append(f"{section}: unknown key {key!r}")


def _parse_plant(doc, violations: list[str]) -> PlantModel | None:
    _check_section_keys(doc, "plant", violations)
    if "A" not in doc or "B" not in doc:
        violations.append("plant: requires keys 'A' and 'B'")
        return None
    try:
        a = np.atleast_2d(np.asarray(doc["A"], dtype=float))
        setpoint = doc.get("r", [0.0] * a.shape[0])
        return PlantModel(A=doc["A"], B=doc["B"], setpoint=setpoint)
    except (StabkitError, TypeError, ValueError) as exc:
        violations.append(f"plant: {exc}")
        return None


def _parse_policy(doc, violations: list[str]) -> ExpertPolicy | None:
    _check_section_keys(doc, "policy", violations)
    if "K" not in doc:
        violations.append("policy: requires key 'K'")
        return None
    if ("Sigma" in doc) == ("sigma" in doc):
        violations.append("policy: provide exactly one of 'Sigma' (matrix) or 'sigma' (scalar)")
        return None
    try:
        k = np.atleast_2d(np.asarray(doc["K"], dtype=float))
        if "sigma" in doc:
            sigma = float(doc["sigma"])
            if not (sigma > 0.0):
                violations.append(f"policy: sigma must be > 0, got {sigma}")
                return None
            cov = sigma * sigma * np.eye(k.shape[0])
        else:
            cov = doc["Sigma"]
        return ExpertPolicy(K=doc["K"], Sigma=cov)
    except (StabkitError, TypeError, ValueError) as exc:
        violations.append(f"policy: {exc}")
        return None


def _parse_diffusion(doc, violations: list[str]) -> DiffusionParams | None:
    _check_section_keys(doc, "diffusion", violations)
    try:
        drift = doc.get("drift")
        return DiffusionParams(
            g=float(doc.get("g", 1.0)),
            alpha=float(doc.get("alpha", 1.0)),
            drift=None if drift is None else drift,
            stochastic=bool(doc.get("stochastic", False)),
            inner_steps=int(doc.get("inner_steps", 25)),
        )
    except (StabkitError, TypeError, ValueError) as exc:
        violations.append(f"diffusion: {exc}")
        return None


def _parse_coupling(doc, n_inputs: int | None, violations: list[str]) -> CouplingConfig | None:
    _check_section_keys(doc, "coupling", violations)
    for key in ("mode", "dt", "horizon", "e0"):
        if key not in doc:
            violations.append(f"coupling: requires key {key!r}")
    if any(v.startswith("coupling: requires") for v in violations):
        return None
    try:
        u0 = doc.get("u0")
        if u0 is None:
            u0 = [0.0] * (n_inputs if n_inputs else 1)
        return CouplingConfig(
            mode=CouplingMode(doc["mode"]),
            dt=float(doc["dt"]),
            horizon=float(doc["horizon"]),
            e0=doc["e0"],
            u0=u0,
            seed=int(doc.get("seed", 0)),
            record_stride=int(doc.get("record_stride", 1)),
            dt_inner=None if doc.get("dt_inner") is None else float(doc["dt_inner"]),
        )
    except (StabkitError, TypeError, ValueError) as exc:
        violations.append(f"coupling: {exc}")
        return None


def parse_run_config(document: dict, require: tuple[str, ...]) -> RunConfig:
    """Build a RunConfig, reporting every violated precondition at once.

    The ``STAB_SEED`` environment variable, when set, overrides the coupling
    seed before validation.
    """
    if not isinstance(document, dict):
        raise ConfigError(["config root must be a JSON object"])
    violations: list[str] = []
    effective = json.loads(json.dumps(document))  # deep copy
    for section in effective:
        if section not in _SECTION_KEYS:
            violations.append(f"unknown config section {section!r}")

    env_seed = os.environ.get("STAB_SEED")
    if env_seed is not None and "coupling" in effective:
        try:
            effective["coupling"]["seed"] = int(env_seed)
        except (TypeError, ValueError):
            violations.append(f"STAB_SEED must be an integer, got {env_seed!r}")

    plant = policy = diffusion = coupling = None
    if "plant" in effective:
        plant = _parse_plant(effective["plant"], violations)
    if "policy" in effective:
        policy = _parse_policy(effective["policy"], violations)
    diffusion = _parse_diffusion(effective.get("diffusion", {}), violations)
    if "coupling" in effective:
        coupling = _parse_coupling(
            effective["coupling"], plant.n_inputs if plant else None, violations
        )

    present = {
        "plant": plant,
        "policy": policy,
        "diffusion": diffusion,
        "coupling": coupling,
    }
    for name in require:
        if name not in ("diffusion",) and name not in effective:
            violations.append(f"missing config section {name!r}")
        elif present[name] is None and not any(
            v.startswith(f"{name}:") for v in violations
        ):
            violations.append(f"missing config section {name!r}")
    if violations:
        raise ConfigError(violations)
    return RunConfig(
        plant=plant,
        policy=policy,
        diffusion=diffusion,
        coupling=coupling,
        output=effective.get("output", {}) or {},
        effective=effective,
    )


def _load_config(path: str, require: tuple[str, ...]) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    return parse_run_config(document, require)


def _write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".stab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _config_echo_csv(config: RunConfig) -> str:
    return "# config=" + json.dumps(config.effective, sort_keys=True) + "\n"


def _config_echo_svg(config: RunConfig) -> str:
    return "<!-- config=" + json.dumps(config.effective, sort_keys=True) + " -->\n"


def _jnum(value: float):
    if math.isfinite(value):
        return value
    if value > 0:
        return "inf"
    if value < 0:
        return "-inf"
    return "nan"


def _empirical_dict(verdict: EmpiricalVerdict) -> dict:
    return {
        "label": verdict.label,
        "rate": _jnum(verdict.rate),
        "residual": _jnum(verdict.residual),
    }


def _analytic_dict(verdict: StabilityVerdict) -> dict:
    return {
        "label": verdict.label,
        "conditions": dict(verdict.conditions),
        "margins": {key: _jnum(val) for key, val in verdict.margins.items()},
        "notes": list(verdict.notes),
    }


def _resolve_output(args_value, config: RunConfig, key: str) -> str:
    if args_value:
        return args_value
    path = config.output.get(key)
    if not path:
        raise ConfigError(
            [f"output path required: pass -o or set output.{key} in the config"]
        )
    return str(path)


def cmd_simulate(args) -> int:
    config = _load_config(args.config, require=("plant", "policy", "diffusion", "coupling"))
    trajectory = simulate(config.plant, config.policy, config.diffusion, config.coupling)
    out_path = _resolve_output(args.output, config, "trajectory")
    _write_atomic(out_path, _config_echo_csv(config) + trajectory_to_csv(trajectory))
    verdict = classify_empirical(trajectory)
    print(json.dumps(_empirical_dict(verdict), sort_keys=True))
    return 0


def cmd_analyze(args) -> int:
    config = _load_config(args.config, require=("plant", "policy", "diffusion"))
    plant, policy, diffusion = config.plant, config.policy, config.diffusion
    if plant.n_states == 1 and plant.n_inputs == 1:
        verdict = analytic_1d(
            float(plant.A[0, 0]),
            float(plant.B[0, 0]),
            float(policy.K[0, 0]),
            float(np.sqrt(policy.Sigma[0, 0])),
            diffusion.g,
            diffusion.alpha,
        )
    else:
        verdict = analytic_ndim(
            plant.A, plant.B, policy.K, policy.Sigma, diffusion.g, diffusion.alpha
        )
    print(json.dumps(_analytic_dict(verdict), sort_keys=True))
    return 0


def _parse_axis_flag(text: str) -> AxisSpec:
    parts = text.split(":")
    if len(parts) != 4:
        raise ParameterError(
            f"axis spec must be name:min:max:steps, got {text!r}"
        )
    name, lo, hi, steps = parts
    try:
        return AxisSpec(name=name, start=float(lo), stop=float(hi), steps=int(steps))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, StabkitError):
            raise
        raise ParameterError(f"bad axis spec {text!r}: {exc}") from exc


def _sweep_task(payload):
    base, n1, v1, n2, v2, index, empirical, sim_config = payload
    return evaluate_sweep_cell(base, n1, v1, n2, v2, index, empirical, sim_config)


def cmd_sweep(args) -> int:
    config = _load_config(args.config, require=("plant", "policy", "diffusion"))
    plant, policy, diffusion = config.plant, config.policy, config.diffusion
    if plant.n_states != 1 or plant.n_inputs != 1:
        raise ParameterError("sweep requires a scalar plant")
    axis1 = _parse_axis_flag(args.axis1)
    axis2 = _parse_axis_flag(args.axis2)
    if axis1.name == axis2.name:
        raise ParameterError("sweep axes must name two different parameters")
    names = {axis1.name, axis2.name}
    if "kprime" in names and names & {"sigma", "g", "alpha"}:
        raise ParameterError(
            "a kprime axis fixes sigma from g and alpha and cannot be combined "
            "with a sigma, g, or alpha axis"
        )
    base = {
        "A": float(plant.A[0, 0]),
        "B": float(plant.B[0, 0]),
        "K": float(policy.K[0, 0]),
        "sigma": float(np.sqrt(policy.Sigma[0, 0])),
        "g": diffusion.g,
        "alpha": diffusion.alpha,
    }
    sim_config = config.coupling if config.coupling is not None else DEFAULT_SWEEP_SIM

    values1 = axis1.values()
    values2 = axis2.values()
    payloads = []
    index = 0
    for v1 in values1:
        for v2 in values2:
            payloads.append(
                (base, axis1.name, float(v1), axis2.name, float(v2), index,
                 bool(args.empirical), sim_config)
            )
            index += 1

    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    if jobs > 1 and len(payloads) >= 32:
        chunk = max(1, len(payloads) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            cells = list(executor.map(_sweep_task, payloads, chunksize=chunk))
    else:
        cells = [_sweep_task(payload) for payload in payloads]

    lines = ["axis1,axis2,analytic_label,analytic_margin_min,empirical_label,empirical_rate"]
    for cell in cells:
        if cell.empirical is not None:
            emp_label = cell.empirical.label
            emp_rate = f"{cell.empirical.rate:.17g}"
        else:
            emp_label = ""
            emp_rate = ""
        lines.append(
            f"{cell.axis1_value:.17g},{cell.axis2_value:.17g},"
            f"{cell.analytic.label},{cell.analytic.min_margin:.17g},"
            f"{emp_label},{emp_rate}"
        )
    out_path = _resolve_output(args.output, config, "sweep")
    _write_atomic(out_path, _config_echo_csv(config) + "\n".join(lines) + "\n")

    if args.svg:
        stable_grid = [
            [
                cells[i * axis2.steps + j].analytic.label == "stable"
                for j in range(axis2.steps)
            ]
            for i in range(axis1.steps)
        ]
        boundary = stable_boundary_points(cells, axis1.steps, axis2.steps)
        svg = _svg.region_map(
            list(values1),
            list(values2),
            stable_grid,
            boundary,
            title="stability region",
            xlabel=axis1.name,
            ylabel=axis2.name,
        )
        _write_atomic(args.svg, _config_echo_svg(config) + svg)
    return 0


def cmd_phase_plane(args) -> int:
    config = _load_config(args.config, require=("plant", "policy", "diffusion", "coupling"))
    plant, policy, diffusion, coupling = (
        config.plant,
        config.policy,
        config.diffusion,
        config.coupling,
    )
    if plant.n_states != 1 or plant.n_inputs != 1:
        raise ParameterError("phase plane requires a scalar plant")
    kprimes: list[float] = []
    if args.kprime:
        for token in args.kprime.split(","):
            token = token.strip()
            if not token:
                continue
            value = float(token)
            if not (value > 0.0):
                raise ParameterError(f"kprime values must be > 0, got {value}")
            kprimes.append(value)

    runs = [("expert", None, replace(coupling, mode=CouplingMode.EXPERT_ORACLE), policy)]
    for kp in kprimes:
        sigma = diffusion.g * math.sqrt(diffusion.alpha / kp)
        kp_policy = ExpertPolicy(K=policy.K, Sigma=[[sigma * sigma]])
        runs.append(
            (f"kprime={kp:g}", kp, replace(coupling, mode=CouplingMode.PER_STEP), kp_policy)
        )

    setpoint = float(plant.setpoint[0])
    lines = ["series,t,x,u"]
    summary = []
    svg_series = []
    for name, kp, run_config, run_policy in runs:
        trajectory = simulate(plant, run_policy, diffusion, run_config)
        xs = trajectory.states[:, 0] + setpoint
        us = trajectory.actions[:, 0]
        for t, x, u in zip(trajectory.times, xs, us):
            lines.append(f"{name},{t:.17g},{x:.17g},{u:.17g}")
        verdict = classify_empirical(trajectory)
        summary.append(
            {
                "name": name,
                "kprime": kp,
                "label": verdict.label,
                "rate": _jnum(verdict.rate),
                "diverged": trajectory.diverged,
            }
        )
        svg_series.append((name, list(xs), list(us)))

    out_path = _resolve_output(args.output, config, "phase")
    _write_atomic(out_path, _config_echo_csv(config) + "\n".join(lines) + "\n")
    if args.svg:
        svg = _svg.line_chart(
            svg_series, title="augmented phase plane", xlabel="x", ylabel="u"
        )
        _write_atomic(args.svg, _config_echo_svg(config) + svg)
    print(json.dumps({"series": summary}, sort_keys=True))
    return 0


def cmd_dataset_check(args) -> int:
    config = _load_config(args.config, require=("plant",))
    with open(args.demos, "r", encoding="utf-8") as handle:
        demos = load_demonstrations(handle)
    report = quality_report(
        config.plant, demos, config.diffusion.g, config.diffusion.alpha
    )
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    return 0 if report.verdict.label == "stable" else 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stab",
        description="Simulate and analyze LTI plants under denoising-diffusion control.",
    )
    sub = parser.add_subparsers(dest="command")

    p_sim = sub.add_parser("simulate", help="roll out the coupled system to CSV")
    p_sim.add_argument("-c", "--config", required=True)
    p_sim.add_argument("-o", "--output")
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="print the analytic stability verdict")
    p_an.add_argument("-c", "--config", required=True)
    p_an.set_defaults(func=cmd_analyze)

    p_sw = sub.add_parser("sweep", help="evaluate a 2-D parameter grid")
    p_sw.add_argument("-c", "--config", required=True)
    p_sw.add_argument("--axis1", required=True, help="name:min:max:steps")
    p_sw.add_argument("--axis2", required=True, help="name:min:max:steps")
    p_sw.add_argument("-o", "--output")
    p_sw.add_argument("--svg")
    p_sw.add_argument("--empirical", action="store_true")
    p_sw.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    p_sw.set_defaults(func=cmd_sweep)

    p_ph = sub.add_parser("phase-plane", help="expert and controller trajectories in (x, u)")
    p_ph.add_argument("-c", "--config", required=True)
    p_ph.add_argument("--kprime", help="comma-separated effective gains")
    p_ph.add_argument("-o", "--output")
    p_ph.add_argument("--svg")
    p_ph.set_defaults(func=cmd_phase_plane)

    p_dc = sub.add_parser("dataset-check", help="gate a demonstration CSV on stability")
    p_dc.add_argument("-d", "--demos", required=True)
    p_dc.add_argument("-c", "--config", required=True)
    p_dc.set_defaults(func=cmd_dataset_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 2
    except DatasetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StabkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
