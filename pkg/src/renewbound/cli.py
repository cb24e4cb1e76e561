"""Command-line pipeline for certificates, searches, simulation, and checks.

Subcommands: bound (assemble a certificate), optimize (search the rate),
simulate (tail curves and coupling traces), verify (the empirical property
suite), report (certified vs fitted empirical rate).  One JSON config file
drives everything; --seed, --out, and --threads override it.  All file
outputs are deterministic: given the same config and seed they are
byte-identical across runs and thread counts, so no timings, paths, or
thread counts are ever written into them.

Config schema (JSON object; blocks are used by the subcommands that need
them)::

    {
      "distribution": {"kind": "exponential", "rate": 1.0},
      "component": {"c": 1.0, "L": 1.0, "eta_tilde": 0.02},
      "component_search": {
        "windows": [[0.40, 0.40], [0.45, 0.45]],
        "eta_tilde_fractions": [0.70, 0.80],   // or "eta_tilde_values"
        "grid": 2049
      },
      "params": {"beta": 0.5, "delta": 0.5, "theta": 1.2e-7},
      "search": {
        "beta_range": [0.2, 1.0],              // omit for (1e-3, alpha)
        "delta_range": [0.05, 0.95],
        "theta_range": [0.001, 1.0],
        "n_beta": 24, "n_delta": 16, "n_theta": 16,
        "budget": 2000
      },
      "simulation": {
        "replicas": 1000, "seed": 0, "x": [2.0],
        "t_grid": {"count": 32},               // or {"values": [...]}
        "n_traces": 3
      },
      "verify": {"replicas": 20000, "seed": 0, "x": [2.0], "t_count": 12},
      "out": "runs/example"
    }

Exit codes: 0 success, 1 a verify check failed, 2 infeasible certificate,
3 config or missing-input error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np
from scipy import stats

from . import dist, sim
from .bounds import (
    BoundCertificate,
    GeomSumSpec,
    BoundParams,
    InvalidCertificateError,
    assemble_certificate,
    geometric_sum_bound,
)
from .dist import InterArrivalModel, InvalidInputError, UniformComponent
from .optimize import (
    EVAL_FIELDS,
    SearchSpace,
    component_candidates,
    optimize_rate,
)

__all__ = ["main", "run_command"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_USAGE = 64

TAIL_HEADER = ("x", "t", "survival", "stderr", "bound")
CURVE_HEADER = ("x", "t", "survival", "stderr", "bound", "fit")

log = logging.getLogger("renewbound")

# stream-id spacing between independent verify checks (one seed, many
# disjoint replica ranges)
_STRIDE = 10**8


class ConfigError(Exception):
    """Configuration could not be parsed or fails a field requirement."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# config plumbing

_MISSING = object()


def _cfg_get(cfg: dict, path: str, default=_MISSING):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is _MISSING:
                raise ConfigError(f"config field '{path}' is required")
            return default
        cur = cur[part]
    return cur


def _cfg_float(cfg, path, default=_MISSING) -> float:
    val = _cfg_get(cfg, path, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"config field '{path}' must be a number")
    return float(val)


def _cfg_int(cfg, path, default=_MISSING) -> int:
    val = _cfg_get(cfg, path, default)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"config field '{path}' must be an integer")
    return int(val)


def _cfg_floats(cfg, path, default=_MISSING) -> list:
    val = _cfg_get(cfg, path, default)
    if val is default:
        return val
    if not isinstance(val, list):
        raise ConfigError(f"config field '{path}' must be an array of numbers")
    out = []
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"config field '{path}[{i}]' must be a number")
        out.append(float(v))
    return out


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {path}: {exc.msg} "
            f"at line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _build_model(cfg: dict) -> InterArrivalModel:
    spec = _cfg_get(cfg, "distribution")
    try:
        return dist.from_spec(spec)
    except KeyError as exc:
        raise ConfigError(
            f"config field 'distribution': missing field {exc}"
        ) from exc
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'distribution': {exc}") from exc


def _build_component(cfg: dict, model: InterArrivalModel) -> UniformComponent:
    block = _cfg_get(cfg, "component")
    if not isinstance(block, dict):
        raise ConfigError("config field 'component' must be an object")
    try:
        comp = UniformComponent(
            _cfg_float(block, "c"),
            _cfg_float(block, "L"),
            _cfg_float(block, "eta_tilde"),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"config field 'component': {exc}") from exc
    margin = dist.verify_uniform_component(model, comp)
    if margin < 0:
        raise ConfigError(
            "config field 'component': the window density dips below the "
            f"uniform level (margin {margin:.3e}); shrink eta_tilde or the window"
        )
    return comp


def _build_params(cfg: dict) -> BoundParams:
    block = _cfg_get(cfg, "params")
    if not isinstance(block, dict):
        raise ConfigError("config field 'params' must be an object")
    try:
        return BoundParams(
            _cfg_float(block, "beta"),
            _cfg_float(block, "delta"),
            _cfg_float(block, "theta"),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"config field 'params': {exc}") from exc


def _build_space(cfg: dict, model: InterArrivalModel) -> SearchSpace:
    if "component_search" in cfg:
        block = cfg["component_search"]
        if not isinstance(block, dict):
            raise ConfigError("config field 'component_search' must be an object")
        windows = block.get("windows")
        if not isinstance(windows, list) or not windows:
            raise ConfigError(
                "config field 'component_search.windows' must be a nonempty "
                "array of [c, L] pairs"
            )
        for i, win in enumerate(windows):
            if not (isinstance(win, list) and len(win) == 2):
                raise ConfigError(
                    f"config field 'component_search.windows[{i}]' must be [c, L]"
                )
        fracs = block.get("eta_tilde_fractions")
        vals = block.get("eta_tilde_values")
        try:
            comps = component_candidates(
                model, windows,
                eta_tilde_fractions=fracs, eta_tilde_values=vals,
                grid=_cfg_int(block, "grid", 2049),
            )
        except InvalidInputError as exc:
            raise ConfigError(f"config field 'component_search': {exc}") from exc
    elif "component" in cfg:
        comps = (_build_component(cfg, model),)
    else:
        raise ConfigError(
            "optimize needs a 'component' or 'component_search' block"
        )
    block = _cfg_get(cfg, "search", {})
    if not isinstance(block, dict):
        raise ConfigError("config field 'search' must be an object")

    def _range(name, default):
        pair = block.get(name, default)
        if pair is None:
            return None
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"config field 'search.{name}' must be [lo, hi]")
        return (float(pair[0]), float(pair[1]))

    try:
        return SearchSpace(
            components=comps,
            beta_range=_range("beta_range", None),
            delta_range=_range("delta_range", [0.05, 0.95]),
            theta_range=_range("theta_range", [1e-3, 1.0]),
            n_beta=_cfg_int(block, "n_beta", 24),
            n_delta=_cfg_int(block, "n_delta", 16),
            n_theta=_cfg_int(block, "n_theta", 16),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"config field 'search': {exc}") from exc


# ---------------------------------------------------------------------------
# deterministic output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return repr(v)
    return obj


def _write_json(path: str, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _read_csv(path: str, header) -> list:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != tuple(header):
        raise ConfigError(f"{path} does not start with header {','.join(header)}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ConfigError(f"{path}: row has {len(parts)} fields, expected {len(header)}")
        rows.append([float(p) for p in parts])
    return rows


# ---------------------------------------------------------------------------
# simulation block

def _sim_block(cfg: dict, model: InterArrivalModel, seed_override) -> dict:
    block = _cfg_get(cfg, "simulation", {})
    if not isinstance(block, dict):
        raise ConfigError("config field 'simulation' must be an object")
    seed = _cfg_int(block, "seed", 0)
    if seed_override is not None:
        seed = int(seed_override)
    xs = _cfg_floats(block, "x", None)
    if xs is None:
        xs = [2.0 * model.mean]
    grid = block.get("t_grid", {"count": 32})
    if isinstance(grid, list):
        grid = {"values": grid}
    if not isinstance(grid, dict):
        raise ConfigError("config field 'simulation.t_grid' must be an object or array")
    return {
        "replicas": _cfg_int(block, "replicas", 1000),
        "seed": seed,
        "x": xs,
        "t_grid": grid,
        "n_traces": _cfg_int(block, "n_traces", 3),
        "step_cap": _cfg_int(block, "step_cap", sim.DEFAULT_STEP_CAP),
        "iter_cap": _cfg_int(block, "iter_cap", sim.DEFAULT_ITER_CAP),
    }


def _grid_for(spec: dict, x: float, rate: float) -> np.ndarray:
    if "values" in spec:
        vals = [float(v) for v in spec["values"] if float(v) >= x]
        if not vals:
            raise ConfigError(
                f"config field 'simulation.t_grid.values' has no t >= x for x={x}"
            )
        return np.asarray(sorted(vals))
    count = int(spec.get("count", 32))
    if count < 2:
        raise ConfigError("config field 'simulation.t_grid.count' must be >= 2")
    return sim.default_time_grid(x, rate, count)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_bound(cfg, args, outdir) -> int:
    model = _build_model(cfg)
    comp = _build_component(cfg, model)
    params = _build_params(cfg)
    cert = assemble_certificate(model, comp, params)
    _write_json(os.path.join(outdir, "certificate.json"), cert.to_dict())
    status = "ok" if cert.valid else "infeasible"
    _write_json(os.path.join(outdir, "summary.json"), {
        "command": "bound",
        "status": status,
        "certificate": cert.to_dict(),
        "files": ["certificate.json"],
    })
    if not cert.valid:
        log.warning("certificate invalid: q = %s is not < 1", cert.q)
        return EXIT_INFEASIBLE
    log.info("certified rate %s (q = %s)", cert.rate, cert.q)
    return EXIT_OK


def _cmd_optimize(cfg, args, outdir) -> int:
    model = _build_model(cfg)
    space = _build_space(cfg, model)
    budget = _cfg_int(cfg, "search.budget", 2000)
    result = optimize_rate(model, space, budget=budget)
    _write_csv(
        os.path.join(outdir, "gridpoints.csv"), EVAL_FIELDS, result.evaluations
    )
    files = ["gridpoints.csv"]
    if result.feasible:
        _write_json(
            os.path.join(outdir, "certificate.json"),
            result.certificate.to_dict(),
        )
        files.append("certificate.json")
    _write_json(os.path.join(outdir, "summary.json"), {
        "command": "optimize",
        "status": "ok" if result.feasible else "infeasible",
        "result": result.to_dict(),
        "n_gridpoints": len(result.evaluations),
        "files": sorted(files),
    })
    if not result.feasible:
        log.warning(
            "no feasible point in the search space (best q = %s)", result.best_q
        )
        return EXIT_INFEASIBLE
    log.info(
        "best rate %s at beta=%s delta=%s theta=%s",
        result.rate, result.params.beta, result.params.delta, result.params.theta,
    )
    return EXIT_OK


def _load_or_build_certificate(cfg, model, outdir) -> BoundCertificate:
    if "params" in cfg:
        comp = _build_component(cfg, model)
        return assemble_certificate(model, comp, _build_params(cfg))
    path = os.path.join(outdir, "certificate.json")
    if not os.path.exists(path):
        raise ConfigError(
            "no 'params' block and no certificate.json in the output "
            "directory; run `bound` or `optimize` first"
        )
    with open(path, "r", encoding="utf-8") as f:
        return BoundCertificate.from_json(f.read())


def _cmd_simulate(cfg, args, outdir) -> int:
    model = _build_model(cfg)
    cert = _load_or_build_certificate(cfg, model, outdir)
    blk = _sim_block(cfg, model, args.seed)
    if not cert.valid:
        _write_json(os.path.join(outdir, "summary.json"), {
            "command": "simulate", "status": "infeasible",
            "certificate": cert.to_dict(), "files": [],
        })
        log.warning("certificate invalid: q = %s is not < 1", cert.q)
        return EXIT_INFEASIBLE
    comp = cert.component
    n = blk["replicas"]
    seed = blk["seed"]
    rows = []
    curves = []
    traces = []
    stride = n + blk["n_traces"]
    for i, x in enumerate(blk["x"]):
        grid = _grid_for(blk["t_grid"], x, cert.rate)
        tail = sim.estimate_tail(
            model, comp, cert, x, t_grid=grid, n=n, seed=seed,
            stream_base=i * stride, threads=args.threads,
            step_cap=blk["step_cap"], iter_cap=blk["iter_cap"],
        )
        for t, s, se in zip(tail.t_grid, tail.survival, tail.stderr):
            rows.append((x, t, s, se, cert.tail_bound(x, t)))
        curves.append({"x": x, "n": n, "seed": seed})
        for j in range(blk["n_traces"]):
            rng = sim.SeedableRngStream(seed, i * stride + n + j)
            tr = sim.run_coupling(
                model, comp, cert, x, rng,
                step_cap=blk["step_cap"], iter_cap=blk["iter_cap"],
            )
            item = {"x": x, "t_star": tr.t_star, "n_cycles": tr.n_cycles}
            if args.debug:
                item["iterations"] = tr.to_dict()["iterations"]
            traces.append(item)
    _write_csv(os.path.join(outdir, "tail.csv"), TAIL_HEADER, rows)
    _write_json(os.path.join(outdir, "summary.json"), {
        "command": "simulate",
        "status": "ok",
        "certificate": cert.to_dict(),
        "tail": curves,
        "traces": traces,
        "files": ["tail.csv"],
    })
    log.info("wrote %d tail rows and %d traces", len(rows), len(traces))
    return EXIT_OK


def _cmd_report(cfg, args, outdir) -> int:
    cert_path = os.path.join(outdir, "certificate.json")
    tail_path = os.path.join(outdir, "tail.csv")
    for path, cmd in ((cert_path, "bound"), (tail_path, "simulate")):
        if not os.path.exists(path):
            raise ConfigError(
                f"missing {os.path.basename(path)}; run `{cmd}` first"
            )
    with open(cert_path, "r", encoding="utf-8") as f:
        cert = BoundCertificate.from_json(f.read())
    rows = _read_csv(tail_path, TAIL_HEADER)
    by_x = {}
    for x, t, s, se, b in rows:
        by_x.setdefault(x, []).append((t, s, se, b))
    fits = []
    curve_rows = []
    for x in sorted(by_x):
        pts = by_x[x]
        ts = np.array([p[0] for p in pts])
        ss = np.array([p[1] for p in pts])
        ses = np.array([p[2] for p in pts])
        w = np.zeros_like(ses)
        nz = ses > 0
        w[nz] = 1.0 / ses[nz] ** 2
        entry = {"x": x, "n_points": len(pts)}
        try:
            fit = sim.fit_exponential_rate(ts, ss, weights=w)
            entry.update(
                empirical_rate=fit.rate, amplitude=fit.amplitude,
                residual=fit.residual, n_used=fit.n_used,
                rate_ratio=(fit.rate / cert.rate if cert.rate > 0 else None),
            )
        except InvalidInputError as exc:
            fit = None
            entry.update(empirical_rate=None, error=str(exc))
        fits.append(entry)
        for t, s, se, b in pts:
            fitted = (
                fit.amplitude * math.exp(-fit.rate * t) if fit is not None
                else float("nan")
            )
            curve_rows.append((x, t, s, se, b, fitted))
    rates = sorted(e["empirical_rate"] for e in fits if e.get("empirical_rate"))
    overall = rates[len(rates) // 2] if rates else None
    report = {
        "certified_rate": cert.rate,
        "certified_q": cert.q,
        "certified_prefactor": cert.prefactor,
        "empirical_rate": overall,
        "rate_ratio": (
            overall / cert.rate if overall and cert.rate > 0 else None
        ),
        "per_x": fits,
    }
    _write_json(os.path.join(outdir, "report.json"), report)
    _write_csv(os.path.join(outdir, "curves.csv"), CURVE_HEADER, curve_rows)
    _write_json(os.path.join(outdir, "summary.json"), {
        "command": "report",
        "status": "ok",
        "report": report,
        "files": ["curves.csv", "report.json"],
    })
    if overall is not None:
        log.info(
            "certified rate %s, empirical %s, ratio %s",
            cert.rate, overall, report["rate_ratio"],
        )
    else:
        log.info("bound-only report (no usable simulation rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: the empirical property suite

def _verify_block(cfg, model, seed_override) -> dict:
    block = _cfg_get(cfg, "verify", {})
    if not isinstance(block, dict):
        raise ConfigError("config field 'verify' must be an object")
    seed = _cfg_int(block, "seed", _cfg_int(cfg, "simulation.seed", 0))
    if seed_override is not None:
        seed = int(seed_override)
    xs = _cfg_floats(block, "x", None)
    if xs is None:
        xs = _cfg_floats(cfg, "simulation.x", None) or [2.0 * model.mean]
    horizons = block.get("horizons", [1, 2, 5, 10, 20])
    if not (isinstance(horizons, list) and all(
        isinstance(h, int) and h > 0 for h in horizons
    )):
        raise ConfigError("config field 'verify.horizons' must be positive integers")
    return {
        "replicas": _cfg_int(block, "replicas", 20000),
        "seed": seed,
        "x": xs,
        "t_count": _cfg_int(block, "t_count", 12),
        "horizons": tuple(horizons),
    }


def _check_hitting_moment(model, cert, blk, base) -> dict:
    """Exponential moment of the band-entry time against e^{beta x}.

    Also checks the rescaled variant at half the exponent, whose cap scales
    the exponent of the original in proportion.
    """
    beta = cert.params.beta
    lam = cert.params.delta * beta
    n = blk["replicas"]
    points = []
    passed = True
    for i, x in enumerate(blk["x"]):
        t, _, _, _ = sim.walk_hit_times(
            model, x, cert.r, n, blk["seed"], stream_base=base + i * n,
        )
        for lp, cap in ((lam, math.exp(beta * x)),
                        (lam / 2.0, math.exp(beta * x / 2.0))):
            vals = np.exp(lp * t)
            mu = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(n))
            ok = mu <= cap + 3.0 * se
            passed = passed and ok
            points.append({
                "x": x, "lam": lp, "mean": mu, "stderr": se,
                "cap": cap, "passed": ok,
            })
    return {"name": "hitting_moment", "passed": passed, "points": points}


def _check_split_floor(model, cert, blk, base) -> dict:
    """Split success frequency and max-epoch Laplace caps at three gaps."""
    comp = cert.component
    gamma = cert.params.theta * cert.params.beta
    lbar = float(dist.conditional_max_laplace(model, comp.c + comp.L, gamma))
    eta = comp.eta
    n = blk["replicas"]
    points = []
    passed = True
    for i, frac in enumerate((0.1, 0.5, 1.0)):
        z = frac * cert.r
        succ, hi, _, _ = sim.split_attempts(
            model, comp, z, n, blk["seed"], stream_base=base + i * n,
        )
        k = math.ceil(z / comp.L) if z > 0 else 0
        floor = eta**k
        freq = float(succ.mean())
        se0 = math.sqrt(floor * (1.0 - floor) / n)
        ok = freq >= floor - 3.0 * se0
        passed = passed and ok
        point = {
            "z": z, "k": k, "success_rate": freq, "floor": floor,
            "floor_stderr": se0, "passed": ok,
        }
        cap = math.exp(gamma * (z + math.floor(z / comp.L) * comp.c)) * lbar
        for label, mask in (("fail", succ == 0), ("success", succ == 1)):
            m = int(mask.sum())
            if m < 2:
                point[f"laplace_{label}"] = None
                continue
            vals = np.exp(gamma * hi[mask])
            mu = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(m))
            ok = mu <= cap + 3.0 * se
            passed = passed and ok
            point[f"laplace_{label}"] = {
                "mean": mu, "stderr": se, "cap": cap, "passed": ok,
            }
        points.append(point)
    return {"name": "split_floor", "passed": passed, "points": points}


def _check_tail_domination(model, cert, blk, base) -> dict:
    """Empirical coupling-tail survival against the certified tail bound.

    A point fails only when the observed exceedance count is beyond the
    99% binomial quantile under the bound itself.
    """
    comp = cert.component
    n = blk["replicas"]
    points = []
    passed = True
    for i, x in enumerate(blk["x"]):
        grid = sim.default_time_grid(x, cert.rate, blk["t_count"])
        tail = sim.estimate_tail(
            model, comp, cert, x, t_grid=grid, n=n, seed=blk["seed"],
            stream_base=base + i * n,
        )
        for t, s in zip(tail.t_grid, tail.survival):
            bound = cert.tail_bound(x, t)
            k = int(round(s * n))
            if s <= bound:
                ok = True
            else:
                ok = k <= float(stats.binom.ppf(0.99, n, min(bound, 1.0)))
            passed = passed and ok
            points.append({
                "x": x, "t": float(t), "survival": float(s),
                "bound": bound, "passed": ok,
            })
    return {"name": "tail_domination", "passed": passed, "points": points}


def _check_tv_bound(model, cert, blk, base) -> dict:
    """Binned TV lower estimate against the certified all-time TV bound."""
    comp = cert.component
    n = blk["replicas"]
    mean = model.mean
    points = []
    passed = True
    slot = 0
    for x in blk["x"]:
        for t in (x + 2.0 * mean, x + 10.0 * mean):
            est = sim.estimate_tv(
                model, comp, cert, x, t, n, seed=blk["seed"],
                stream_base=base + slot * 4 * n,
            )
            slot += 1
            bound = cert.tv_bound(x, t)
            ok = est.lower <= bound + 3.0 * est.lower_stderr
            passed = passed and ok
            points.append({
                "x": x, "t": t, "tv_lower": est.lower,
                "tv_lower_stderr": est.lower_stderr, "tv_upper": est.upper,
                "bound": bound, "passed": ok,
            })
    return {"name": "tv_bound", "passed": passed, "points": points}


def _check_count_comparison(model, cert, blk, base, u0_rate) -> dict:
    """Joint count inequality on a small (t, window) grid at the largest x."""
    comp = cert.component
    n = blk["replicas"]
    mean = model.mean
    x = max(blk["x"])
    points = []
    passed = True
    slot = 0
    for t in (2.0 * mean, 10.0 * mean):
        for h in (0.5 * mean, mean):
            u0 = u0_rate * h if u0_rate is not None else None
            res = sim.check_count_inequality(
                model, comp, cert, x, t, h, n, blk["seed"],
                u0=u0, stream_base=base + slot * 2 * n,
            )
            slot += 1
            passed = passed and res.holds
            points.append(dict(res.to_dict(), x=x, passed=res.holds))
    return {"name": "count_inequality", "passed": passed, "points": points}


def _check_drift(model, cert, blk, base) -> dict:
    """Supermartingale property of the drift functional along the walk."""
    beta = cert.params.beta
    lam = cert.params.delta * beta
    x = max(blk["x"])
    try:
        res = sim.check_supermartingale(
            model, beta, lam, cert.r, x,
            horizons=blk["horizons"], n=blk["replicas"], seed=blk["seed"],
            stream_base=base,
        )
    except InvalidInputError as exc:
        return {"name": "drift_supermartingale", "passed": False,
                "error": str(exc)}
    return dict(res.to_dict(), name="drift_supermartingale",
                passed=res.holds, x=x, beta=beta, lam=lam)


def _check_geometric_sum(blk) -> dict:
    """Closed-form geometric-sum bound: series exactness plus sharpness.

    The bound must match direct series summation to 1e-12 relative, and an
    i.i.d. exponential-summand construction (whose transform attains the
    bound exactly) must match it within three standard errors.
    """
    points = []
    passed = True
    for p in (0.05, 0.3, 0.5, 0.9):
        for psi in (0.0, 0.05, 0.26, 0.64):
            if math.exp(psi) * (1.0 - p) >= 1.0:
                continue
            bound = geometric_sum_bound(GeomSumSpec(p, psi))
            term = p * math.exp(psi)
            ratio = (1.0 - p) * math.exp(psi)
            series = 0.0
            while term > series * 1e-18:
                series += term
                term *= ratio
            rel = abs(bound - series) / series
            ok = rel <= 1e-12
            passed = passed and ok
            points.append({"p": p, "psi": psi, "bound": bound,
                           "series": series, "rel_err": rel, "passed": ok})
    p, mu, gamma = 0.5, 10.0, 1.0
    psi = math.log(mu / (mu - gamma))
    bound = geometric_sum_bound(GeomSumSpec(p, psi))
    n = blk["replicas"]
    rng = np.random.default_rng(blk["seed"])
    counts = rng.geometric(p, size=n)
    draws = rng.standard_exponential(int(counts.sum())) / mu
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    sums = np.add.reduceat(draws, starts)
    vals = np.exp(gamma * sums)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n))
    ok = abs(mean - bound) <= 3.0 * se
    passed = passed and ok
    sharp = {"p": p, "mu": mu, "gamma": gamma, "bound": bound,
             "mean": mean, "stderr": se, "passed": ok}
    return {"name": "geometric_sum", "passed": passed,
            "points": points, "sharpness": sharp}


def _cmd_verify(cfg, args, outdir) -> int:
    model = _build_model(cfg)
    cert = _load_or_build_certificate(cfg, model, outdir)
    blk = _verify_block(cfg, model, args.seed)
    if not cert.valid:
        _write_json(os.path.join(outdir, "summary.json"), {
            "command": "verify", "status": "infeasible",
            "certificate": cert.to_dict(), "files": [],
        })
        log.warning("certificate invalid: q = %s is not < 1", cert.q)
        return EXIT_INFEASIBLE
    spec = _cfg_get(cfg, "distribution")
    u0_rate = (
        float(spec["rate"]) if spec.get("kind") == "exponential" else None
    )
    checks = [
        _check_hitting_moment(model, cert, blk, 0 * _STRIDE),
        _check_split_floor(model, cert, blk, 1 * _STRIDE),
        _check_tail_domination(model, cert, blk, 2 * _STRIDE),
        _check_tv_bound(model, cert, blk, 3 * _STRIDE),
        _check_count_comparison(model, cert, blk, 4 * _STRIDE, u0_rate),
        _check_drift(model, cert, blk, 5 * _STRIDE),
        _check_geometric_sum(blk),
    ]
    all_passed = all(c["passed"] for c in checks)
    _write_json(os.path.join(outdir, "summary.json"), {
        "command": "verify",
        "status": "pass" if all_passed else "fail",
        "certificate": cert.to_dict(),
        "replicas": blk["replicas"],
        "seed": blk["seed"],
        "checks": checks,
        "files": [],
    })
    for c in checks:
        log.info("check %-22s %s", c["name"], "pass" if c["passed"] else "FAIL")
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# dispatch

_COMMANDS = {
    "bound": _cmd_bound,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="path to the JSON run config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for simulation batches")
    level = common.add_mutually_exclusive_group()
    level.add_argument("--quiet", action="store_true",
                       help="warnings and errors only")
    level.add_argument("--debug", action="store_true",
                       help="verbose logging; simulate dumps full traces")
    parser = _Parser(
        prog="renewbound",
        description="certified renewal-convergence rates and their empirical checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bound": "assemble a certificate from explicit parameters",
        "optimize": "search parameters and components for the best rate",
        "simulate": "estimate coupling tails and record traces",
        "verify": "run the empirical property suite",
        "report": "compare certified and fitted empirical rates",
    }
    for name in _COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
    else:
        # repeated in-process calls must follow the current stderr object;
        # assign directly since the old stream may already be closed
        for h in log.handlers:
            if isinstance(h, logging.StreamHandler) and h.stream is not sys.stderr:
                h.stream = sys.stderr
    if args.quiet:
        log.setLevel(logging.WARNING)
    elif args.debug:
        log.setLevel(logging.DEBUG)
    else:
        log.setLevel(logging.INFO)
    try:
        if args.command == "report" and args.config is None:
            cfg = {}
        else:
            if args.config is None:
                raise ConfigError(f"`{args.command}` needs --config")
            cfg = _load_config(args.config)
        outdir = args.out or _cfg_get(cfg, "out", ".")
        if not isinstance(outdir, str):
            raise ConfigError("config field 'out' must be a string")
        os.makedirs(outdir, exist_ok=True)
        return _COMMANDS[args.command](cfg, args, outdir)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except InvalidCertificateError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except (InvalidInputError, dist.QuadratureError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
