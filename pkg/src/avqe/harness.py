"""Experiment configs, reproducible runs and file emission."""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from .ansatz import (Ansatz, conjugated_generators, energy_and_sigma, geometric_tensor, prepare,
                     prepare_batch)
from .bounds import bp_bounds, epsilon_adjust, shot_bounds, tracking_constants
from .errors import ConfigInvalid, InvalidParams, RetryExceeded, StallDetected, TrackingLost
from .models import Model, build_model
from .oracle import PathOracle, gap_profile
from .pauli import AdiabaticPath, PauliSum, interpolate, path_norm_sup
from .shots import GAUSSIAN, ShotConfig
from .tracker import (TrackerConfig, estimate_gamma, optimize_slice, reference_minimizer,
                      track_path)
from .verifier import run_self_verifying

EXIT_OK = 0
EXIT_CERTIFICATION = 2
EXIT_STALL = 3
EXIT_CONFIG = 64

_num_or_auto = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]}
_records = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["coefficient", "string"],
        "properties": {"coefficient": {"type": "number"},
                       "string": {"type": "string", "pattern": "^[IXYZ]+$"}},
        "additionalProperties": False,
    },
}

CONFIG_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["single_qubit", "tfim", "random_2local", "custom"]},
                "params": {"type": "object"},
                "h_initial": _records,
                "h_final": _records,
            },
            "required": ["family"],
        },
        "ansatz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generators": {"type": "array", "items": {"type": "string", "pattern": "^[IXYZ]+$"},
                               "minItems": 1},
                "theta0": {"type": "array", "items": {"type": "number"}},
            },
        },
        "tracker": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta": _num_or_auto,
                "K": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}]},
                "dlambda": _num_or_auto,
                "gamma": _num_or_auto,
                "optimizer": {"enum": ["vanilla", "natural_gradient"]},
                "mode": {"enum": ["option1", "option2"]},
                "regularizer": {"type": "number", "exclusiveMinimum": 0},
                "max_slices": {"type": "integer", "minimum": 1},
            },
        },
        "verifier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta_c": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "oracle"}]},
                "delta_c_scale": {"type": "number", "exclusiveMinimum": 0},
                "retry_cap": {"type": "integer", "minimum": 1},
            },
        },
        "shots": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "S": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}]},
                "model": {"enum": ["bernoulli", "gaussian_proxy"]},
                "delta_fail": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "trials": {"type": "integer", "minimum": 1},
            },
        },
        "bp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambdas": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "eps_q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "samples": {"type": "integer", "minimum": 1000},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"grid": {"type": "integer", "minimum": 2},
                           "eps_target": {"type": "number", "exclusiveMinimum": 0}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "command": {"enum": ["track", "verify", "bounds", "oracle", "bp-variance"]},
                "parameter": {"type": "string"},
                "values": {"type": "array", "minItems": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
            "required": ["parameter", "values"],
        },
        "guarantee": {"type": "boolean"},
        "use_oracle": {"type": "boolean"},
        "seed": {"type": "integer"},
        "output": {"type": "object", "properties": {"dir": {"type": "string"}},
                   "additionalProperties": False},
    },
}

DEFAULTS: dict = {
    "model": {"family": "single_qubit", "params": {}},
    "ansatz": {},
    "tracker": {"eta": 0.25, "K": 4, "dlambda": 0.02, "gamma": "auto", "optimizer": "vanilla",
                "mode": "option1", "regularizer": 1e-8, "max_slices": 1_000_000},
    "verifier": {"delta_c": "oracle", "delta_c_scale": 1.0, "retry_cap": 100},
    "shots": {"enabled": False, "S": "auto", "model": "gaussian_proxy", "delta_fail": 0.05,
              "trials": 200},
    "bp": {"lambdas": [0.25, 0.5, 0.75], "eps_q": 0.5, "samples": 100_000},
    "oracle": {"grid": 1001},
    "guarantee": False,
    "use_oracle": True,
    "seed": 0,
    "output": {},
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: Any) -> dict:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if cfg["model"]["family"] == "custom":
        if "h_initial" not in cfg["model"] or "h_final" not in cfg["model"]:
            raise ConfigInvalid("model: custom family needs h_initial and h_final")
        if "generators" not in cfg["ansatz"] or "theta0" not in cfg["ansatz"]:
            raise ConfigInvalid("ansatz: custom family needs generators and theta0")
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None) -> dict:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if overrides:
        raw = _merge(raw, overrides) if isinstance(raw, dict) else raw
    return validate_config(raw)


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def resolve_model(cfg: dict) -> Model:
    spec = cfg["model"]
    if spec["family"] == "custom":
        path = AdiabaticPath(PauliSum.from_records(spec["h_initial"]),
                             PauliSum.from_records(spec["h_final"]))
        model = Model("custom", path, Ansatz.from_generators(cfg["ansatz"]["generators"]),
                      np.array(cfg["ansatz"]["theta0"], dtype=float))
    else:
        try:
            model = build_model(spec["family"], spec.get("params", {}), seed=cfg["seed"])
        except (InvalidParams, ValueError) as exc:
            raise ConfigInvalid(f"model: {exc}") from exc
        ans = cfg["ansatz"]
        if "generators" in ans:
            model = Model(model.name, model.path, Ansatz.from_generators(ans["generators"]),
                          np.array(ans.get("theta0", [0.0] * len(ans["generators"])), dtype=float),
                          model.params)
        elif "theta0" in ans:
            model = Model(model.name, model.path, model.ansatz, np.array(ans["theta0"], dtype=float),
                          model.params)
    if len(model.theta0) != model.ansatz.n_params:
        raise ConfigInvalid("ansatz: theta0 length does not match the generator count")
    if model.ansatz.n_qubits != model.path.n_qubits:
        raise ConfigInvalid("ansatz: generator length does not match the Hamiltonian")
    return model


# ---------------------------------------------------------------- CSV output

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


TRACK_COLUMNS = ["t", "lambda", "energy", "grad_norm", "sigma_H", "sigma_D", "delta_lambda",
                 "fidelity", "gap", "theta_dist"]
CERT_COLUMNS = ["t", "lambda", "sigma_H", "sigma_D", "delta_c", "pass", "strong", "fid_lower",
                "dlambda_V", "dlambda_used", "retries"]


def track_rows(records) -> list[list]:
    return [[r.t, r.lam, r.energy, r.grad_norm, r.sigma_h, r.sigma_d, r.dlambda, r.fidelity,
             r.gap, r.theta_dist] for r in records]


def cert_rows(slices) -> list[list]:
    rows = []
    for s in slices:
        c = s.certificate
        rows.append([s.record.t, c.lam, c.sigma_h, c.sigma_d, c.delta_c, c.passed, c.strong,
                     c.fidelity_lower_bound, c.dlambda_v, s.dlambda_used, s.retries])
    return rows


@dataclass
class RunOutcome:
    """In-memory result of one subcommand: files to write plus a summary record."""

    command: str
    summary: dict
    files: dict[str, str] = field(default_factory=dict)
    exit_code: int = EXIT_OK


def write_outcome(outcome: RunOutcome, out_dir: str | Path, wall_time: float) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in outcome.files.items():
        target = out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    sidecar = dict(outcome.summary)
    sidecar["wall_time_s"] = wall_time
    sidecar["timestamp"] = datetime.now(timezone.utc).isoformat()
    sidecar["exit_code"] = outcome.exit_code
    (out / "summary.json").write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n")
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# ---------------------------------------------------------------- flows

@dataclass
class Context:
    cfg: dict
    model: Model
    oracle: PathOracle | None

    @property
    def path(self) -> AdiabaticPath:
        return self.model.path


def make_context(cfg: dict) -> Context:
    model = resolve_model(cfg)
    return Context(cfg, model, PathOracle(model.path) if cfg["use_oracle"] else None)


def _gamma(ctx: Context) -> float:
    g = ctx.cfg["tracker"]["gamma"]
    if g != "auto":
        return float(g)
    if ctx.model.ansatz.n_params == 1 and ctx.model.name == "single_qubit":
        return 1.0  # a single Y rotation on a real state has unit metric everywhere
    oracle = ctx.oracle or PathOracle(ctx.path)
    return estimate_gamma(ctx.path, ctx.model.ansatz, ctx.model.theta0, oracle=oracle)


def path_constants(ctx: Context, gamma: float | None = None, eps_target: float | None = None):
    grid = ctx.cfg["oracle"]["grid"]
    norms = path_norm_sup(ctx.path, grid)
    gaps = gap_profile(ctx.path, grid)
    gamma = _gamma(ctx) if gamma is None else gamma
    constants = tracking_constants(gamma, gaps.delta_min, ctx.model.ansatz.n_params, norms.h_op,
                                   norms.dh_op, eps_target=eps_target, mode=ctx.cfg["tracker"]["mode"])
    return constants, norms, gaps


def tracker_config(ctx: Context, constants=None) -> TrackerConfig:
    t = ctx.cfg["tracker"]
    guarantee = ctx.cfg["guarantee"]

    def pick(key, auto_value):
        v = t[key]
        if v == "auto":
            if auto_value is None:
                raise ConfigInvalid(f"tracker/{key}: 'auto' needs guarantee-mode constants")
            return auto_value
        return v

    shots = None
    if ctx.cfg["shots"]["enabled"]:
        s = ctx.cfg["shots"]["S"]
        if s == "auto":
            raise ConfigInvalid("shots/S: 'auto' is only meaningful for the shots subcommand")
        shots = ShotConfig(int(s), ctx.cfg["seed"], ctx.cfg["shots"]["model"])
    return TrackerConfig(
        eta=float(pick("eta", constants.eta if constants else None)),
        k_steps=int(pick("K", constants.k_min if constants else None)),
        dlambda=float(pick("dlambda", constants.dlambda_a if constants else None)),
        optimizer=t["optimizer"], mode=t["mode"], regularizer=t["regularizer"],
        max_slices=t["max_slices"], guarantee=guarantee,
        gamma=constants.gamma if constants else None, shots=shots,
    )


def _guarantee_setup(ctx: Context):
    if ctx.cfg["guarantee"]:
        constants, _, _ = path_constants(ctx)
        return constants
    return None


def flow_track(ctx: Context) -> RunOutcome:
    constants = _guarantee_setup(ctx)
    config = tracker_config(ctx, constants)
    summary = {"command": "track", "config_digest": config_digest(ctx.cfg), "completed": False}
    exit_code = EXIT_OK
    try:
        result = track_path(ctx.path, ctx.model.ansatz, ctx.model.theta0, config,
                            oracle=ctx.oracle, constants=constants)
        records = result.records
        summary["completed"] = True
    except TrackingLost as exc:
        records = exc.records
        summary["error"] = str(exc)
        exit_code = EXIT_CERTIFICATION
    n_updates = sum(r.steps for r in records)
    last = records[-1] if records else None
    summary.update({
        "slices": len(records), "n_updates": n_updates,
        "final_lambda": last.lam if last else None, "final_energy": last.energy if last else None,
        "final_fidelity": last.fidelity if last else None,
    })
    if constants is not None:
        summary["n_updates_bound"] = constants.n_updates_bound
        summary["within_bound"] = n_updates <= constants.n_updates_bound
        summary["constants"] = constants.as_record()
    return RunOutcome("track", summary, {"slices.csv": csv_text(TRACK_COLUMNS, track_rows(records))},
                      exit_code)


def _delta_c(ctx: Context) -> float:
    v = ctx.cfg["verifier"]
    if v["delta_c"] == "oracle":
        return v["delta_c_scale"] * gap_profile(ctx.path, ctx.cfg["oracle"]["grid"]).delta_min
    return float(v["delta_c"])


def flow_verify(ctx: Context) -> RunOutcome:
    constants = _guarantee_setup(ctx)
    config = tracker_config(ctx, constants)
    delta_c = _delta_c(ctx)
    summary = {"command": "verify", "config_digest": config_digest(ctx.cfg), "delta_c": delta_c}
    exit_code = EXIT_OK
    try:
        run = run_self_verifying(ctx.path, ctx.model.ansatz, ctx.model.theta0, delta_c, config,
                                 retry_cap=ctx.cfg["verifier"]["retry_cap"], oracle=ctx.oracle,
                                 constants=constants)
    except RetryExceeded as exc:
        run, exit_code = exc.summary, EXIT_CERTIFICATION
        summary["error"] = str(exc)
    except StallDetected as exc:
        run, exit_code = exc.summary, EXIT_STALL
        summary["error"] = str(exc)
    last = run.slices[-1] if run.slices else None
    summary.update({
        "completed": run.completed, "slices": len(run.slices), "n_updates": run.n_updates,
        "retries_total": sum(run.retries_used), "final_lambda": run.final_lambda,
        "final_fidelity_bound": run.final_fidelity_bound,
        "final_energy": last.record.energy if last else None,
        "final_fidelity": last.certificate.exact_fidelity if last else None,
        "final_pass": last.certificate.passed if last else None,
    })
    if constants is not None:
        summary["n_updates_bound"] = constants.n_updates_bound
    files = {"certificates.csv": csv_text(CERT_COLUMNS, cert_rows(run.slices)),
             "slices.csv": csv_text(TRACK_COLUMNS, track_rows([s.record for s in run.slices]))}
    return RunOutcome("verify", summary, files, exit_code)


def flow_bounds(ctx: Context) -> RunOutcome:
    constants, norms, gaps = path_constants(ctx, eps_target=ctx.cfg["oracle"].get("eps_target"))
    rows = constants.table()
    s = shot_bounds(1, constants.n_params, norms.h2_sup, constants.hessian_lipschitz, constants.gamma,
                    constants.delta_min, constants.k_min, ctx.cfg["shots"]["delta_fail"])
    rows.append(("S_min", "8 M |h|^2 L_H^2 / (gamma Delta)^4 (1 + sqrt(2 ln(K/delta)/M))^2", s.s_min))
    width = max(len(r[0]) for r in rows)
    fwidth = max(len(r[1]) for r in rows)
    text = "\n".join(f"{n:<{width}}  {f:<{fwidth}}  {fmt(v)}" for n, f, v in rows) + "\n"
    summary = {"command": "bounds", "config_digest": config_digest(ctx.cfg),
               "inputs": {"gamma": constants.gamma, "delta_min": gaps.delta_min,
                          "M": constants.n_params, "h_op": norms.h_op, "dh_op": norms.dh_op,
                          "h2_sup": norms.h2_sup},
               "constants": {n: v for n, _, v in rows}}
    return RunOutcome("bounds", summary, {"bounds.txt": text,
                                          "bounds.csv": csv_text(["name", "formula", "value"],
                                                                 [list(r) for r in rows])})


def flow_oracle(ctx: Context) -> RunOutcome:
    grid = ctx.cfg["oracle"]["grid"]
    prof = gap_profile(ctx.path, grid)
    oracle = ctx.oracle or PathOracle(ctx.path)
    dim = ctx.path.h_initial.dim
    header = ["lambda", "gap"] + [f"E{j}" for j in range(dim)]
    rows = []
    for lam, gap in zip(prof.lambdas, prof.gaps):
        w = np.linalg.eigvalsh(interpolate(ctx.path, lam).matrix)
        rows.append([lam, gap, *w])
    summary = {"command": "oracle", "config_digest": config_digest(ctx.cfg),
               "delta_min": prof.delta_min, "argmin": prof.argmin,
               "ground_energy_final": oracle.ground_energy(1.0)}
    return RunOutcome("oracle", summary, {"spectrum.csv": csv_text(header, rows)})


# ---------------------------------------------------------------- shot-noise trial

def reference_trajectory(path: AdiabaticPath, ansatz: Ansatz, theta0, lambdas,
                         oracle: PathOracle | None = None) -> list[np.ndarray]:
    """Reference minimizers along ``lambdas``, each warm-started from the previous one."""
    oracle = oracle or PathOracle(path)
    out = []
    theta = np.array(theta0, dtype=float)
    for lam in lambdas:
        theta = reference_minimizer(ansatz, interpolate(path, lam), theta, oracle.ground_energy(lam))
        out.append(theta)
    return out


@dataclass
class InvarianceResult:
    trials: int
    successes: int
    shots: int
    r_pl: float
    worst_distance: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials


def shot_invariance_trial(ctx: Context, trials: int, seed: int, delta_fail: float = 0.05,
                          shots: int | None = None) -> InvarianceResult:
    """Guarantee-mode tracking with Gaussian-proxy gradient noise at the shot budget;
    a trial succeeds if every optimization step stays within r_PL of theta*."""
    constants, norms, _ = path_constants(ctx)
    budget = shot_bounds(1, constants.n_params, norms.h2_sup, constants.hessian_lipschitz,
                         constants.gamma, constants.delta_min, constants.k_min, delta_fail)
    s = budget.s_min if shots is None else shots
    n_slices = constants.n_slices
    lambdas = [min(1.0, t * constants.dlambda_a) for t in range(1, n_slices + 1)]
    lambdas[-1] = 1.0
    stars = reference_trajectory(ctx.path, ctx.model.ansatz, ctx.model.theta0, lambdas, ctx.oracle)
    successes = 0
    worst = 0.0
    for trial in range(trials):
        cfg = TrackerConfig(eta=constants.eta, k_steps=constants.k_min, dlambda=constants.dlambda_a,
                            shots=ShotConfig(s, seed, GAUSSIAN, key=(trial,), h2_sup=norms.h2_sup))
        theta = np.array(ctx.model.theta0, dtype=float)
        ok = True
        for t, (lam, star) in enumerate(zip(lambdas, stars), start=1):
            dists: list[float] = []
            rec = optimize_slice(ctx.path, ctx.model.ansatz, theta, lam, cfg, t=t,
                                 callback=lambda k, th, star=star: dists.append(
                                     float(np.linalg.norm(th - star))))
            theta = rec.theta
            d = max(dists)
            worst = max(worst, d)
            if d > constants.r_pl:
                ok = False
                break
        successes += ok
    return InvarianceResult(trials, successes, s, constants.r_pl, worst)


def flow_shots(ctx: Context) -> RunOutcome:
    constants, norms, _ = path_constants(ctx)
    delta_fail = ctx.cfg["shots"]["delta_fail"]
    rows = []
    for k in sorted({1, constants.k_min, 2 * constants.k_min, 10 * constants.k_min}):
        b = shot_bounds(1, constants.n_params, norms.h2_sup, constants.hessian_lipschitz,
                        constants.gamma, constants.delta_min, k, delta_fail)
        rows.append([k, delta_fail, b.s_min_raw, b.s_min])
    s_cfg = ctx.cfg["shots"]["S"]
    res = shot_invariance_trial(ctx, ctx.cfg["shots"]["trials"], ctx.cfg["seed"], delta_fail,
                                None if s_cfg == "auto" else int(s_cfg))
    summary = {"command": "shots", "config_digest": config_digest(ctx.cfg), "shots": res.shots,
               "trials": res.trials, "successes": res.successes, "success_rate": res.rate,
               "required_rate": 1 - delta_fail, "pass": res.rate >= 1 - delta_fail,
               "r_pl": res.r_pl, "worst_distance": res.worst_distance}
    files = {"s_min.csv": csv_text(["K", "delta_fail", "S_min_raw", "S_min"], rows),
             "invariance.csv": csv_text(["shots", "trials", "successes", "success_rate"],
                                        [[res.shots, res.trials, res.successes, res.rate]])}
    return RunOutcome("shots", summary, files)


# ---------------------------------------------------------------- barren plateau

@dataclass
class BPResult:
    lam: float
    empirical_var: float
    var_lower: float
    passed: bool
    dtheta_q: float
    gamma: float
    delta_min: float
    deficits: np.ndarray
    samples: int


def tangent_deficits(ansatz: Ansatz, theta, ground_state: np.ndarray) -> np.ndarray:
    """1 - |<g|P~_k|g>|^2 for each Heisenberg-conjugated generator."""
    pt = conjugated_generators(ansatz, theta)
    expect = np.einsum("i,kij,j->k", ground_state.conj(), pt, ground_state)
    return np.clip(1.0 - np.abs(expect) ** 2, 0.0, 1.0)


def bp_variance_experiment(
    path: AdiabaticPath,
    ansatz: Ansatz,
    lam: float,
    eps_q: float,
    samples: int,
    seed: int,
    theta_init=None,
    oracle: PathOracle | None = None,
    delta_min: float | None = None,
    batch: int = 20_000,
) -> BPResult:
    if samples < 1000:
        raise InvalidParams("at least 1000 samples are needed")
    oracle = oracle or PathOracle(path)
    h = interpolate(path, lam)
    theta_init = np.zeros(ansatz.n_params) if theta_init is None else theta_init
    star = reference_minimizer(ansatz, h, theta_init, oracle.ground_energy(lam))
    gamma = geometric_tensor(ansatz, star).gamma_floored
    delta_min = gap_profile(path).delta_min if delta_min is None else delta_min
    h_op = path_norm_sup(path).h_op
    deficits = tangent_deficits(ansatz, star, oracle.ground_state(lam))
    b = bp_bounds(eps_q, gamma, delta_min, ansatz.n_params, h_op, deficits)
    rng = np.random.default_rng(seed)
    hm = h.matrix
    energies = np.empty(samples)
    for start in range(0, samples, batch):
        stop = min(samples, start + batch)
        thetas = star + rng.normal(0.0, b.dtheta_q, size=(stop - start, ansatz.n_params))
        psi = prepare_batch(ansatz, thetas)
        energies[start:stop] = np.einsum("si,si->s", psi.conj(), psi @ hm.T).real
    var = float(np.var(energies, ddof=1))
    passed = var >= b.var_lower * (1 - 3 / math.sqrt(samples))
    return BPResult(lam=float(lam), empirical_var=var, var_lower=b.var_lower, passed=passed,
                    dtheta_q=b.dtheta_q, gamma=gamma, delta_min=delta_min, deficits=deficits,
                    samples=samples)


def bp_sweep(ctx: Context, lambdas, eps_q: float, samples: int, seed: int) -> list[BPResult]:
    oracle = ctx.oracle or PathOracle(ctx.path)
    delta = gap_profile(ctx.path, ctx.cfg["oracle"]["grid"]).delta_min
    # walk the ground branch from lambda = 0 so each minimizer is the tracked one
    grid = sorted({round(float(x), 12) for x in np.linspace(0, 1, 21)} | {float(x) for x in lambdas})
    lookup = dict(zip(grid, reference_trajectory(ctx.path, ctx.model.ansatz, ctx.model.theta0,
                                                 grid, oracle)))
    return [bp_variance_experiment(ctx.path, ctx.model.ansatz, lam, eps_q, samples, seed + i,
                                   theta_init=lookup[float(lam)], oracle=oracle, delta_min=delta)
            for i, lam in enumerate(lambdas)]


def flow_bp(ctx: Context) -> RunOutcome:
    bp = ctx.cfg["bp"]
    results = bp_sweep(ctx, bp["lambdas"], bp["eps_q"], bp["samples"], ctx.cfg["seed"])
    rows = [[r.lam, r.samples, r.dtheta_q, r.gamma, r.delta_min, float(np.sum(r.deficits)),
             r.empirical_var, r.var_lower, r.passed] for r in results]
    header = ["lambda", "samples", "dtheta_q", "gamma", "delta_min", "deficit_sum",
              "empirical_var", "var_lower", "pass"]
    summary = {"command": "bp-variance", "config_digest": config_digest(ctx.cfg),
               "all_pass": all(r.passed for r in results)}
    return RunOutcome("bp-variance", summary, {"bp_variance.csv": csv_text(header, rows)})


# ---------------------------------------------------------------- representability

@dataclass
class EpsilonResult:
    eps: float
    delta_c: float
    admissible: bool
    attempted: bool
    completed: bool | None = None
    consistent: bool | None = None
    detail: str = ""


def measure_epsilon(path: AdiabaticPath, ansatz: Ansatz, theta0, n_points: int = 21,
                    oracle: PathOracle | None = None) -> float:
    """Largest gap between the best reachable energy and the exact ground energy on a grid."""
    oracle = oracle or PathOracle(path)
    theta = np.array(theta0, dtype=float)
    eps = 0.0
    for lam in np.linspace(0.0, 1.0, n_points):
        h = interpolate(path, lam)
        theta = reference_minimizer(ansatz, h, theta, None, tol=1e-9)
        e = energy_and_sigma(prepare(ansatz, theta), h).energy
        eps = max(eps, e - oracle.ground_energy(lam))
    return max(eps, 0.0)


def representability_check(ctx: Context, config: TrackerConfig, delta_c: float | None = None,
                           retry_cap: int = 100) -> EpsilonResult:
    """Measure eps, gate certification on eps <= delta_c / 4, and audit any pass against the oracle."""
    oracle = ctx.oracle or PathOracle(ctx.path)
    constants, _, gaps = path_constants(ctx, gamma=1.0)
    delta_c = gaps.delta_min if delta_c is None else delta_c
    eps = measure_epsilon(ctx.path, ctx.model.ansatz, ctx.model.theta0, oracle=oracle)
    if eps >= constants.delta_min:
        return EpsilonResult(eps, delta_c, False, False, detail="eps exceeds the minimum gap")
    adj = epsilon_adjust(constants, eps, delta_c)
    if not adj.admissible:
        return EpsilonResult(eps, delta_c, False, False, detail="eps > delta_c/4, certification skipped")
    try:
        run = run_self_verifying(ctx.path, ctx.model.ansatz, ctx.model.theta0, delta_c, config,
                                 retry_cap=retry_cap, oracle=oracle)
    except (RetryExceeded, StallDetected) as exc:
        return EpsilonResult(eps, delta_c, True, True, False, True, f"certification refused: {exc}")
    consistent = all(
        s.certificate.exact_fidelity >= s.certificate.fidelity_lower_bound - 1e-9
        for s in run.slices if s.certificate.passed and s.certificate.branch == 0)
    return EpsilonResult(eps, delta_c, True, True, run.completed, consistent,
                         f"final fidelity {run.slices[-1].certificate.exact_fidelity:.6f}, "
                         f"bound {run.final_fidelity_bound:.6f}")


# ---------------------------------------------------------------- gap scaling

@dataclass
class ScalingPoint:
    scale: float
    delta_min: float
    n_slices: int
    k_steps: int
    n_updates: int
    n_updates_bound: float
    normalized: float  # realized N * (gamma Delta)^3 / (M^3 |H|^2 |dH|)


def gap_scaling_point(scale: float, use_oracle: bool = True) -> ScalingPoint:
    """Guarantee-mode tracking on the single-qubit path with H_f = scale * X."""
    cfg = validate_config({"model": {"family": "single_qubit", "params": {"final_scale": scale}},
                           "guarantee": True, "use_oracle": use_oracle,
                           "tracker": {"eta": "auto", "K": "auto", "dlambda": "auto", "gamma": 1.0}})
    ctx = make_context(cfg)
    constants, _, _ = path_constants(ctx, gamma=1.0)
    config = tracker_config(ctx, constants)
    result = track_path(ctx.path, ctx.model.ansatz, ctx.model.theta0, config,
                        oracle=ctx.oracle, constants=constants)
    c = constants
    norm = (c.gamma * c.delta_min) ** 3 / (c.n_params**3 * c.h_op**2 * c.dh_op)
    return ScalingPoint(scale, c.delta_min, len(result.records), c.k_min, result.n_updates,
                        c.n_updates_bound, result.n_updates * norm)


# ---------------------------------------------------------------- dispatch and sweep

FLOWS: dict[str, Callable[[Context], RunOutcome]] = {
    "track": flow_track,
    "verify": flow_verify,
    "bounds": flow_bounds,
    "shots": flow_shots,
    "oracle": flow_oracle,
    "bp-variance": flow_bp,
}


def run(command: str, cfg: dict) -> RunOutcome:
    if command == "sweep":
        return flow_sweep(cfg)
    return FLOWS[command](make_context(cfg))


def _set_path(cfg: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return out


def _sweep_member(args):
    command, member_cfg = args
    t0 = time.perf_counter()
    outcome = run(command, member_cfg)
    return outcome, time.perf_counter() - t0


def flow_sweep(cfg: dict) -> RunOutcome:
    sweep = cfg.get("sweep")
    if not sweep:
        raise ConfigInvalid("sweep: section missing")
    command = sweep.get("command", "track")
    members = []
    for value in sweep["values"]:
        raw = _set_path({k: v for k, v in cfg.items() if k != "sweep"}, sweep["parameter"], value)
        try:
            members.append((command, validate_config(raw)))
        except ConfigInvalid as exc:
            raise ConfigInvalid(f"sweep value {value!r}: {exc}") from exc
    workers = sweep.get("workers", 1)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_member, members))
    else:
        results = [_sweep_member(m) for m in members]
    files: dict[str, str] = {}
    rows = []
    for i, ((outcome, _), value) in enumerate(zip(results, sweep["values"])):
        for name, text in outcome.files.items():
            files[f"run_{i:03d}/{name}"] = text
        s = outcome.summary
        rows.append([i, json.dumps(value), outcome.exit_code, s.get("completed"), s.get("slices"),
                     s.get("n_updates"), s.get("n_updates_bound"), s.get("final_fidelity")])
    files["sweep.csv"] = csv_text(["run", "value", "exit_code", "completed", "slices", "n_updates",
                                   "n_updates_bound", "final_fidelity"], rows)
    worst = max((o.exit_code for o, _ in results), default=EXIT_OK)
    summary = {"command": "sweep", "config_digest": config_digest(cfg), "runs": len(results),
               "parameter": sweep["parameter"],
               "members": [o.summary for o, _ in results]}
    return RunOutcome("sweep", summary, files, worst)
