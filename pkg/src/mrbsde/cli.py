"""Config ingestion, experiment orchestration, and artifact emission.

Config documents are JSON with sections problem / numerics / schedule plus
seed, threads, and output. Parsing is strict: unknown keys are errors, and
defaults exist only for the explicitly optional fields (quad_points,
basis degree, thread count). Artifacts are written atomically and the
manifest is emitted even when a run fails, with a failed marker.

The thread-count knob is recorded nowhere in the artifacts: outputs are a
pure function of (problem, numerics, schedule, seed), so artifacts stay
byte-identical across thread counts. Timings (wall_ms) are the one
non-reproducible column.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import apriori_report, deficit_metrics, rate_fit, stability_experiment
from .errors import ConfigError, MrbsdeError, NonPositiveError, NotConverged, ParseError
from .mollify import mollify_obstacle
from .oracle import (
    mean_reduction,
    skorokhod_closed_form,
    solve_mean_ode_reflected,
    unconstrained_mean_path,
)
from .paths import TimeGrid, simulate_forward
from .penalized import RegressionBasis, solve_penalized
from .presets import PRESETS, preset_config
from .problem import (
    BoundarySpec,
    DriverSpec,
    ForwardSDESpec,
    KappaSpec,
    ObstacleCurve,
    ProblemSpec,
    TerminalSpec,
    validate_problem,
)
from .reflect import ConvergenceSchedule, LevelRecord, flatness_residual, solve_reflected

_STABILITY_EPS = (0.1, 0.05, 0.025)
_ORACLE_REFINE = 200  # fine-grid nodes per solver step in oracle-check
_ORACLE_PENALTY = 1.0e6


# ---------------------------------------------------------------------------
# strict document -> object builders


def _check_keys(doc: dict, allowed: set, required: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ParseError(f"section {where} must be an object, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise ParseError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in doc:
            raise ParseError(f"missing key {key!r} in {where}")


def _num(doc: dict, key: str, where: str, default=None, integer: bool = False):
    if key not in doc:
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"key {key!r} in {where} must be a number, got {val!r}")
    if integer:
        if float(val) != int(val):
            raise ParseError(f"key {key!r} in {where} must be an integer, got {val!r}")
        return int(val)
    return float(val)


def _num_list(doc: dict, key: str, where: str) -> tuple:
    val = doc.get(key, ())
    if not isinstance(val, (list, tuple)):
        raise ParseError(f"key {key!r} in {where} must be an array")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val):
        raise ParseError(f"key {key!r} in {where} must contain only numbers")
    return tuple(float(v) for v in val)


def _build(cls, where: str, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ParseError(f"invalid {where}: {exc}") from exc


def build_problem(doc: dict) -> ProblemSpec:
    """Construct a ProblemSpec from a config 'problem' section (strict keys)."""
    _check_keys(
        doc,
        {"driver", "boundary", "terminal", "obstacle", "kappa", "brownian_dim", "horizon", "forward"},
        {"driver", "boundary", "terminal", "obstacle", "kappa", "brownian_dim", "horizon"},
        "problem",
    )

    drv = doc["driver"]
    _check_keys(drv, {"family", "coefficients", "lipschitz_L_f"}, {"family"}, "problem.driver")
    coeffs = drv.get("coefficients", {})
    if not isinstance(coeffs, dict):
        raise ParseError("problem.driver.coefficients must be an object")
    driver = _build(
        DriverSpec,
        "problem.driver",
        family=drv["family"],
        coefficients=coeffs,
        lipschitz_L_f=_num(drv, "lipschitz_L_f", "problem.driver", 0.0),
    )

    bnd = doc["boundary"]
    _check_keys(bnd, {"family", "beta", "growth_L_g", "psi"}, {"family", "beta"}, "problem.boundary")
    boundary = _build(
        BoundarySpec,
        "problem.boundary",
        family=bnd["family"],
        beta=_num(bnd, "beta", "problem.boundary"),
        growth_L_g=_num(bnd, "growth_L_g", "problem.boundary", 1.0),
        psi=_num(bnd, "psi", "problem.boundary", 0.0),
    )

    term = doc["terminal"]
    _check_keys(
        term,
        {"mode", "mean", "std", "payoff", "strike", "declared_mean"},
        {"mode"},
        "problem.terminal",
    )
    terminal = _build(
        TerminalSpec,
        "problem.terminal",
        mode=term["mode"],
        mean=_num(term, "mean", "problem.terminal", 0.0),
        std=_num(term, "std", "problem.terminal", 1.0),
        payoff=term.get("payoff", "identity"),
        strike=_num(term, "strike", "problem.terminal", 0.0),
        declared_mean=_num(term, "declared_mean", "problem.terminal", None),
    )

    obs = doc["obstacle"]
    _check_keys(
        obs,
        {"family", "value", "amplitude", "omega", "center", "intercept", "slope", "knots_t", "knots_u"},
        {"family"},
        "problem.obstacle",
    )
    obstacle = _build(
        ObstacleCurve,
        "problem.obstacle",
        family=obs["family"],
        value=_num(obs, "value", "problem.obstacle", 0.0),
        amplitude=_num(obs, "amplitude", "problem.obstacle", 0.0),
        omega=_num(obs, "omega", "problem.obstacle", math.pi),
        center=_num(obs, "center", "problem.obstacle", 0.0),
        intercept=_num(obs, "intercept", "problem.obstacle", 0.0),
        slope=_num(obs, "slope", "problem.obstacle", 0.0),
        knots_t=_num_list(obs, "knots_t", "problem.obstacle"),
        knots_u=_num_list(obs, "knots_u", "problem.obstacle"),
    )

    kap = doc["kappa"]
    _check_keys(
        kap,
        {"family", "rate", "knots_t", "knots_v", "h_kind", "h_scale"},
        {"family"},
        "problem.kappa",
    )
    kappa = _build(
        KappaSpec,
        "problem.kappa",
        family=kap["family"],
        rate=_num(kap, "rate", "problem.kappa", 0.0),
        knots_t=_num_list(kap, "knots_t", "problem.kappa"),
        knots_v=_num_list(kap, "knots_v", "problem.kappa"),
        h_kind=kap.get("h_kind", "const"),
        h_scale=_num(kap, "h_scale", "problem.kappa", 1.0),
    )

    forward = None
    if "forward" in doc and doc["forward"] is not None:
        fwd = doc["forward"]
        _check_keys(fwd, {"x0", "drift_const", "drift_lin", "sigma"}, set(), "problem.forward")
        forward = ForwardSDESpec(
            x0=_num(fwd, "x0", "problem.forward", 0.0),
            drift_const=_num(fwd, "drift_const", "problem.forward", 0.0),
            drift_lin=_num(fwd, "drift_lin", "problem.forward", 0.0),
            sigma=_num(fwd, "sigma", "problem.forward", 1.0),
        )

    return ProblemSpec(
        driver=driver,
        boundary=boundary,
        terminal=terminal,
        obstacle=obstacle,
        kappa=kappa,
        brownian_dim=_num(doc, "brownian_dim", "problem", integer=True),
        horizon=_num(doc, "horizon", "problem"),
        forward=forward,
    )


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run request."""

    spec: ProblemSpec
    M: int
    N: int
    basis: RegressionBasis
    quad_points: int
    schedule: ConvergenceSchedule
    seed: int
    threads: int
    output: str
    preset: str | None
    document: dict  # merged config document; echoed in the manifest


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def build_config(doc: dict) -> RunConfig:
    """Resolve a config document (with optional preset expansion) strictly."""
    _check_keys(
        doc,
        {"preset", "problem", "numerics", "schedule", "seed", "threads", "output"},
        set(),
        "config",
    )
    preset = doc.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ParseError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        merged = _deep_merge(preset_config(preset), {k: v for k, v in doc.items() if k != "preset"})
    else:
        merged = copy.deepcopy(doc)

    for section in ("problem", "numerics", "schedule"):
        if section not in merged:
            raise ParseError(f"missing section {section!r} in config")
    for scalar in ("seed", "output"):
        if scalar not in merged:
            raise ParseError(f"missing key {scalar!r} in config")

    spec = build_problem(merged["problem"])

    numerics = merged["numerics"]
    _check_keys(numerics, {"M", "N", "basis", "degree", "quad_points"}, {"M", "N", "basis"}, "numerics")
    m_particles = _num(numerics, "M", "numerics", integer=True)
    n_steps = _num(numerics, "N", "numerics", integer=True)
    if m_particles < 2:
        raise ConfigError(f"M must be >= 2, got {m_particles}")
    if n_steps < 2:
        raise ConfigError(f"N must be >= 2, got {n_steps}")
    basis = _build(
        RegressionBasis,
        "numerics.basis",
        kind=numerics["basis"],
        degree=_num(numerics, "degree", "numerics", 2, integer=True),
    )
    if basis.kind == "forward" and spec.forward is None:
        raise ConfigError("numerics.basis 'forward' needs forward SDE coefficients in the problem")
    quad_points = _num(numerics, "quad_points", "numerics", 64, integer=True)

    sched = merged["schedule"]
    _check_keys(
        sched,
        {"n_levels", "k_levels", "deficit_tol", "cauchy_tol"},
        {"n_levels", "k_levels", "deficit_tol", "cauchy_tol"},
        "schedule",
    )
    if not isinstance(sched["n_levels"], (list, tuple)) or not isinstance(sched["k_levels"], (list, tuple)):
        raise ParseError("schedule levels must be arrays")
    schedule = _build(
        ConvergenceSchedule,
        "schedule",
        n_levels=tuple(sched["n_levels"]),
        k_levels=tuple(int(k) for k in sched["k_levels"]),
        deficit_tol=_num(sched, "deficit_tol", "schedule"),
        cauchy_tol=_num(sched, "cauchy_tol", "schedule"),
    )

    seed = _num(merged, "seed", "config", integer=True)
    threads = _num(merged, "threads", "config", 0, integer=True)
    output = merged["output"]
    if not isinstance(output, str):
        raise ParseError("config key 'output' must be a string")

    return RunConfig(
        spec=spec,
        M=m_particles,
        N=n_steps,
        basis=basis,
        quad_points=quad_points,
        schedule=schedule,
        seed=seed,
        threads=threads,
        output=output,
        preset=preset,
        document=merged,
    )


def parse_config(path) -> RunConfig:
    """Load and strictly resolve a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config root must be a JSON object")
    return build_config(doc)


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return f"{float(x):.12g}"


def write_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _mean_path_csv(times, mean_y, mean_z, u_vals, uk_vals, K) -> bytes:
    d = mean_z.shape[1]
    header = ["t", "mean_Y"] + [f"mean_Z_{c + 1}" for c in range(d)] + ["u", "u_k", "K", "flatness_cum"]
    flat_cum = np.concatenate([[0.0], np.cumsum((mean_y[:-1] - uk_vals[:-1]) * np.diff(K))])
    lines = [",".join(header)]
    for j in range(times.shape[0]):
        row = [_fmt(times[j]), _fmt(mean_y[j])]
        row += [_fmt(mean_z[j, c]) for c in range(d)]
        row += [_fmt(u_vals[j]), _fmt(uk_vals[j]), _fmt(K[j]), _fmt(flat_cum[j])]
        lines.append(",".join(row))
    return ("\n".join(lines) + "\n").encode("ascii")


def _convergence_csv(records) -> bytes:
    header = "k,n,sup_neg_sq,integral_neg_sq,cauchy_mean_dist,flatness_residual,wall_ms"
    lines = [header]
    for rec in records:
        lines.append(
            ",".join(
                [
                    _fmt(rec.k),
                    _fmt(rec.n),
                    _fmt(rec.sup_neg_sq),
                    _fmt(rec.integral_neg_sq),
                    _fmt(rec.cauchy_mean_dist),
                    _fmt(rec.flatness_residual),
                    _fmt(rec.wall_ms),
                ]
            )
        )
    return ("\n".join(lines) + "\n").encode("ascii")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _report_json(manifest: dict, diagnostics: dict) -> bytes:
    payload = _jsonable({"manifest": manifest, "diagnostics": diagnostics})
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("ascii")


@dataclass(frozen=True)
class RunArtifacts:
    """Paths and payloads of one experiment run."""

    outdir: Path
    manifest: dict
    diagnostics: dict
    files: tuple


# ---------------------------------------------------------------------------
# experiment dispatch


def _rate_summary(levels, values, name: str) -> dict:
    positive = [(lv, v) for lv, v in zip(levels, values) if v > 0.0]
    below = [lv for lv, v in zip(levels, values) if v <= 0.0]
    out: dict = {"below_noise_floor": below}
    if len(positive) >= 3:
        fit = rate_fit([lv for lv, _ in positive], [v for _, v in positive])
        out.update({"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared})
    else:
        out.update({"slope": None, "intercept": None, "r_squared": None})
        out["note"] = f"fewer than 3 positive {name} values; no fit"
    return out


def _oracle_paths(spec: ProblemSpec, grid: TimeGrid):
    """Reference mean path and compensator on the solver grid, plus oracle name."""
    reduction = mean_reduction(spec)
    if reduction is None:
        raise ConfigError(
            "oracle-check needs a mean-closed problem "
            "(zero/affine driver, zero/linear boundary, deterministic clock, direct-sampler terminal)"
        )
    problem, y_independent = reduction
    stride = _ORACLE_REFINE
    n_fine = stride * grid.N
    fine_times = np.linspace(0.0, grid.T, n_fine + 1)
    if y_independent:
        m_fine = unconstrained_mean_path(problem, fine_times)
        u_fine = spec.obstacle.evaluate(fine_times)
        mean_o, k_o = skorokhod_closed_form(m_fine, u_fine)
        kind = "running-maximum closed form"
    else:
        mean_o, k_o = solve_mean_ode_reflected(problem, n_penalty=_ORACLE_PENALTY, n_fine=n_fine)
        kind = "self-refined penalized mean equation"
    return mean_o[::stride], k_o[::stride], kind


def run_experiment(config: RunConfig, subcommand: str) -> RunArtifacts:
    """Run one subcommand and emit its artifacts atomically.

    The manifest lands in report.json in every case; failed runs carry
    status "failed" plus the error message alongside whatever partial
    tables were produced.
    """
    if subcommand not in ("solve", "rates", "stability", "oracle-check"):
        raise ValueError(f"unknown subcommand {subcommand!r}")

    outdir = Path(config.output)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {outdir} is not writable: {exc}") from exc

    echo = {k: v for k, v in config.document.items() if k not in ("threads", "output")}
    manifest = {
        "package": "mrbsde",
        "version": __version__,
        "subcommand": subcommand,
        "seed": config.seed,
        "preset": config.preset,
        "config": echo,
        "status": "ok",
        "error": None,
    }

    files: list[str] = []
    diagnostics: dict = {}
    try:
        report = validate_problem(config.spec, samples=1000, seed=config.seed)
        failed = [c for c in report.checks if c.status == "fail"]
        if failed:
            raise ConfigError(
                "problem validation failed: " + "; ".join(f"{c.assumption}: {c.detail}" for c in failed)
            )
        diagnostics["validation"] = [
            {"assumption": c.assumption, "status": c.status, "detail": c.detail} for c in report.checks
        ]

        grid = TimeGrid(config.spec.horizon, config.N)
        cloud = simulate_forward(config.spec, grid, config.M, config.seed)
        times = grid.times
        u_vals = config.spec.obstacle.evaluate(times)

        if subcommand in ("solve", "oracle-check"):
            refl = solve_reflected(config.spec, grid, cloud, config.schedule, config.basis, config.quad_points)
            apri = apriori_report(refl.solution, config.spec, cloud)
            final = refl.trace[-1]
            diagnostics["final_level"] = {"k": final.k, "n": final.n}
            diagnostics["sup_deficit"] = final.sup_deficit
            diagnostics["flatness_residual"] = final.flatness_residual
            diagnostics["K_T"] = float(refl.K[-1])
            diagnostics["compensator_warnings"] = list(refl.warnings)
            diagnostics["apriori"] = {
                "sup_mean_sq_y": apri.sup_mean_sq_y,
                "integral_mean_sq_z": apri.integral_mean_sq_z,
                "terminal_sq": apri.terminal_sq,
                "integral_f_origin_sq": apri.integral_f_origin_sq,
                "integral_psi_sq_dkappa": apri.integral_psi_sq_dkappa,
                "compensator_terminal_sq": apri.compensator_terminal_sq,
                "ratio": apri.ratio,
                "degenerate": apri.degenerate,
            }
            mean_z = refl.Z.mean(axis=1)
            write_atomic(
                outdir / "mean_path.csv",
                _mean_path_csv(times, refl.mean_path, mean_z, u_vals, refl.obstacle.values, refl.K),
            )
            files.append("mean_path.csv")
            write_atomic(outdir / "convergence.csv", _convergence_csv(refl.trace))
            files.append("convergence.csv")

            if subcommand == "oracle-check":
                mean_o, k_o, kind = _oracle_paths(config.spec, grid)
                diagnostics["oracle"] = {
                    "kind": kind,
                    "mean_gap": float(np.max(np.abs(refl.mean_path - mean_o))),
                    "K_gap": float(np.max(np.abs(refl.K - k_o))),
                }

        elif subcommand == "rates":
            k = max(config.schedule.k_levels)
            u_k = mollify_obstacle(config.spec.obstacle, k, grid, config.quad_points)
            records = []
            sup_vals, int_vals, cauchy_vals = [], [], []
            prev_mean = None
            last_sol = None
            for n in config.schedule.n_levels:
                t0 = time.perf_counter()
                sol = solve_penalized(config.spec, u_k, n, cloud, config.basis)
                wall_ms = (time.perf_counter() - t0) * 1000.0
                sup_sq, integral_sq = deficit_metrics(sol, u_k, cloud.mean_kappa)
                cauchy = (
                    float(np.max(np.abs(sol.mean_path - prev_mean))) if prev_mean is not None else None
                )
                records.append(
                    LevelRecord(
                        k=k,
                        n=n,
                        sup_deficit=math.sqrt(sup_sq),
                        sup_neg_sq=sup_sq,
                        integral_neg_sq=integral_sq,
                        cauchy_mean_dist=cauchy,
                        flatness_residual=flatness_residual(sol.mean_path, u_k.values, sol.K),
                        mollify_gap=u_k.sup_gap,
                        wall_ms=wall_ms,
                    )
                )
                sup_vals.append(sup_sq)
                int_vals.append(integral_sq)
                if cauchy is not None:
                    cauchy_vals.append(cauchy)
                prev_mean = sol.mean_path
                last_sol = sol

            diagnostics["rates"] = {
                "k": k,
                "sup_neg_sq": _rate_summary(config.schedule.n_levels, sup_vals, "sup_neg_sq"),
                "integral_neg_sq": _rate_summary(config.schedule.n_levels, int_vals, "integral_neg_sq"),
                "cauchy_mean_dist": _rate_summary(
                    config.schedule.n_levels[: len(cauchy_vals)], cauchy_vals, "cauchy"
                ),
            }
            apri = apriori_report(last_sol, config.spec, cloud)
            diagnostics["apriori_ratio"] = apri.ratio
            write_atomic(outdir / "convergence.csv", _convergence_csv(records))
            files.append("convergence.csv")

        else:  # stability
            k = max(config.schedule.k_levels)
            n = max(config.schedule.n_levels)
            u_k = mollify_obstacle(config.spec.obstacle, k, grid, config.quad_points)
            rows = stability_experiment(
                config.spec, grid, cloud, _STABILITY_EPS, u_k, n, config.basis
            )
            diagnostics["stability"] = {
                "k": k,
                "n": n,
                "rows": [
                    {
                        "epsilon": r.epsilon,
                        "sup_mean_sq_dy": r.sup_mean_sq_dy,
                        "integral_mean_sq_dz": r.integral_mean_sq_dz,
                    }
                    for r in rows
                ],
            }
            try:
                fit = rate_fit([r.epsilon for r in rows], [r.sup_mean_sq_dy for r in rows])
                diagnostics["stability"]["slope"] = fit.slope
                diagnostics["stability"]["r_squared"] = fit.r_squared
            except NonPositiveError:
                diagnostics["stability"]["slope"] = None
                diagnostics["stability"]["r_squared"] = None

    except NotConverged as exc:
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        if exc.trace:
            write_atomic(outdir / "convergence.csv", _convergence_csv(exc.trace))
            files.append("convergence.csv")
        write_atomic(outdir / "report.json", _report_json(manifest, diagnostics))
        files.append("report.json")
        raise
    except MrbsdeError as exc:
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        write_atomic(outdir / "report.json", _report_json(manifest, diagnostics))
        files.append("report.json")
        raise

    write_atomic(outdir / "report.json", _report_json(manifest, diagnostics))
    files.append("report.json")
    return RunArtifacts(outdir=outdir, manifest=manifest, diagnostics=diagnostics, files=tuple(files))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mrbsde",
        description="Mean-reflected McKean-Vlasov BSDE experiments",
    )
    parser.add_argument("subcommand", choices=["solve", "rates", "stability", "oracle-check"])
    parser.add_argument("--config", help="JSON config path")
    parser.add_argument("--preset", help=f"preset name: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, help="worker count knob (0 = auto); never affects outputs")
    parser.add_argument("--out", help="override the output directory")
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            path = Path(args.config)
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ParseError(f"cannot read config {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ParseError(
                    f"invalid JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
                ) from exc
            if not isinstance(doc, dict):
                raise ParseError("config root must be a JSON object")
        elif args.preset is not None:
            doc = {}
        else:
            print("error: provide --config and/or --preset", file=sys.stderr)
            return 1

        if args.preset is not None:
            doc["preset"] = args.preset
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.threads is not None:
            doc["threads"] = args.threads
        if args.out is not None:
            doc["output"] = args.out

        config = build_config(doc)
        run_experiment(config, args.subcommand)
        return 0
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return 2
    except MrbsdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
