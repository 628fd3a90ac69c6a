"""Experiment configuration files, orchestration and run records.

A config is a TOML file::

    mode = "kam"                 # magnus | kam | measure | evolve | sweep
    output = "runs/reference"
    omega_over_M = [2.0]         # or: omega = [400.0]

    [model]                      # any ModelConfig field
    nu = 1
    mass = 1.0

    [[potential]]
    k = [1]
    p = 1
    re = 0.5
    im = 0.0

    [sweep]                      # only for mode = "sweep"
    axis = "M"
    values = [50, 100, 200, 400]
    metric = "magnus_norm"

Optional tables ``[kam]``, ``[evolve]`` and ``[measure]`` tune the
corresponding pipelines.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .config import ModelConfig, PotentialSpec
from .exceptions import ConfigInvalid, KGReduceError, UnknownMetric
from .kam import compose_transformation, eta_of, kam_run
from .magnus import magnus_normal_form, verify_magnus_conjugation, verify_pauli_cancellations
from .melnikov import (FrequencySampler, MEASURE_COLUMNS, estimate_measure, fit_through_origin,
                       in_omega0, in_U_alpha)
from .opnorms import NormParams, analytic_norm, block_norm
from .spectral import assemble_V, assemble_W, eigenvalues_B

MODES = ("magnus", "kam", "measure", "evolve", "sweep")
SWEEP_METRICS = ("magnus_norm", "transformation_distance", "eta0", "final_eta")
OUTPUT_ENV = "KG_REDUCE_OUTPUT"


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    potential: PotentialSpec
    mode: str
    output: str = "run"
    omega: tuple | None = None
    omega_over_M: tuple | None = None
    sweepAxis: tuple | None = None  # (parameter name, values)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigInvalid("mode", f"must be one of {', '.join(MODES)}")
        if self.omega is not None and self.omega_over_M is not None:
            raise ConfigInvalid("omega", "give either omega or omega_over_M, not both")
        freq = self.omega if self.omega is not None else self.omega_over_M
        if freq is not None and len(freq) != self.model.nu:
            raise ConfigInvalid("omega", f"expected {self.model.nu} components")
        if self.mode in ("magnus", "kam", "evolve", "sweep") and freq is None:
            raise ConfigInvalid("omega", f"mode {self.mode!r} needs a frequency vector")
        if self.mode == "sweep":
            if self.sweepAxis is None:
                raise ConfigInvalid("sweep", "mode 'sweep' needs a [sweep] table")
            name, values = self.sweepAxis
            if name not in {f.name for f in dataclasses.fields(ModelConfig)}:
                raise ConfigInvalid("sweep.axis", f"unknown parameter {name!r}")
            if not values:
                raise ConfigInvalid("sweep.values", "value list is empty")
            metric = self.options.get("sweep", {}).get("metric", "magnus_norm")
            if metric not in SWEEP_METRICS:
                raise ConfigInvalid("sweep.metric", f"must be one of {', '.join(SWEEP_METRICS)}")
        if self.mode == "measure":
            values = self.options.get("measure", {}).get("values")
            if values is not None and not values:
                raise ConfigInvalid("measure.values", "value list is empty")
        try:
            self.potential.validate(nu=self.model.nu)
        except KGReduceError as exc:
            raise ConfigInvalid("potential", str(exc)) from None

    def frequency(self, model: ModelConfig | None = None) -> np.ndarray:
        model = model or self.model
        if self.omega is not None:
            return np.array(self.omega, dtype=float)
        return np.array(self.omega_over_M, dtype=float) * model.M

    # serialization -------------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"mode": self.mode, "output": self.output}
        if self.omega is not None:
            d["omega"] = list(self.omega)
        if self.omega_over_M is not None:
            d["omega_over_M"] = list(self.omega_over_M)
        d["model"] = self.model.to_dict()
        d["potential"] = self.potential.to_records()
        for name, table in self.options.items():
            if isinstance(table, dict):
                d[name] = dict(table)
        if self.sweepAxis is not None:
            d["sweep"] = {**d.get("sweep", {}), "axis": self.sweepAxis[0], "values": list(self.sweepAxis[1])}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {"mode", "output", "omega", "omega_over_M", "model", "potential", "sweep", "kam", "evolve", "measure"}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown key")
        if "mode" not in data:
            raise ConfigInvalid("mode", "missing")
        model_d = data.get("model", {})
        if not isinstance(model_d, dict):
            raise ConfigInvalid("model", "must be a table")
        try:
            model = ModelConfig.from_dict(model_d)
        except TypeError as exc:
            raise ConfigInvalid("model", str(exc)) from None
        potential = PotentialSpec.from_records(data.get("potential", []))
        options = {name: dict(data[name]) for name in ("kam", "evolve", "measure", "sweep") if name in data}
        sweep_axis = None
        if "sweep" in options:
            sw = options["sweep"]
            if "axis" not in sw or "values" not in sw:
                raise ConfigInvalid("sweep", "needs 'axis' and 'values'")
            sweep_axis = (sw.pop("axis"), tuple(sw.pop("values")))
            if not sw:
                options.pop("sweep")
        if data["mode"] == "measure" and "seed" not in model_d:
            raise ConfigInvalid("model.seed", "stochastic mode needs an explicit seed")
        omega = tuple(float(w) for w in data["omega"]) if "omega" in data else None
        rel = tuple(float(w) for w in data["omega_over_M"]) if "omega_over_M" in data else None
        return cls(model, potential, data["mode"], str(data.get("output", "run")), omega, rel, sweep_axis, options)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid("file", f"not valid TOML ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigInvalid("file", str(exc)) from None
        return cls.from_toml(text)

    def content_hash(self) -> str:
        d = self.to_dict()
        d.pop("output", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def output_dir(self) -> Path:
        out = Path(self.output)
        root = os.environ.get(OUTPUT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out


# --- helpers -----------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: arrays to lists, complex to [re, im], non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def write_csv(path, columns, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def operator_record(A) -> list:
    """Nonzero Fourier modes as {k, re, im} with nested arrays."""
    return [{"k": list(k), "re": m.real.tolist(), "im": m.imag.tolist()} for k, m in A.to_dict().items()]


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def reference_phi0(J: int, seed: int) -> np.ndarray:
    """Smooth random initial datum: coefficients decaying like j^-2."""
    rng = np.random.default_rng(seed)
    return (rng.normal(size=J) + 1j * rng.normal(size=J)) / np.arange(1, J + 1) ** 2


def transformation_distance(state, magnus, n_theta: int = 32) -> float:
    """max over a theta grid of the spectral norm of T(theta) - 1."""
    J = state.V.J
    grid = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    thetas = np.stack(np.meshgrid(*([grid] * state.V.nu), indexing="ij"), -1).reshape(-1, state.V.nu)
    if len(thetas) > 256:
        thetas = thetas[:: len(thetas) // 256]
    return max(float(np.linalg.norm(compose_transformation(state, th, magnus) - np.eye(2 * J), 2)) for th in thetas)


# --- pipelines ----------------------------------------------------------------

def _magnus(cfg: ExperimentConfig, model: ModelConfig):
    V = assemble_V(cfg.potential, model)
    omega = cfg.frequency(model)
    res = magnus_normal_form(V, omega, model)
    return V, omega, res


def _run_magnus(cfg, model, rec):
    V, omega, res = _magnus(cfg, model)
    W = assemble_W(V, model)
    rng = np.random.default_rng(model.seed)
    thetas = rng.uniform(0, 2 * np.pi, size=(4, model.nu))
    conj = verify_magnus_conjugation(W, res, model, thetas)
    pauli = verify_pauli_cancellations(res.X, model, thetas)
    norm_V = block_norm(res.V, NormParams(s=model.s0, rho=model.rho / 2, alphaW=1.0, betaW=0.0))
    norm_X = analytic_norm(res.X, model.rho / 2, model.s0)
    scale = max(res.diagnostics["W_scale"], 1e-300)
    rec["diagnostics"]["magnus"] = {**res.diagnostics, "conjugation_residual": conj, "pauli": pauli,
                                    "V_block_norm": norm_V, "X_analytic_norm": norm_X}
    rec["results"]["magnus"] = {"omega": omega, "X": operator_record(res.X),
                                "Vd": operator_record(res.Vd), "Vo": operator_record(res.Vo)}
    rec["checks"]["magnus_homological_residual"] = res.diagnostics["homological_residual"] <= 1e-12 * scale
    rec["checks"]["magnus_conjugation"] = conj <= 1e-8 * max(scale, 1e-300) or conj == 0.0
    rec["checks"]["pauli_ad3"] = pauli["ad3"] <= 1e-10 * max(pauli["scale3"], 1e-300) or pauli["ad3"] == 0.0
    rec["checks"]["magnus_symmetry"] = res.diagnostics["V_symmetry_defect"] <= 1e-12 * max(scale, 1e-300) or \
        res.diagnostics["V_symmetry_defect"] == 0.0
    return res


def _run_kam(cfg, model, rec):
    res = _run_magnus(cfg, model, rec)
    opts = cfg.options.get("kam", {})
    lam = eigenvalues_B(model.mass, model.J)
    state, ladder = kam_run(res.V, lam, res.omega, model, maxSteps=int(opts.get("maxSteps", 12)),
                            etaTol=float(opts.get("etaTol", 1e-12)))
    sched = state.schedule
    etas = sched.etas
    eta_rows = [{"n": n, "eta_n": e, "bound_template": etas[0] * math.exp(1 - 1.5**n)} for n, e in enumerate(etas)]
    eps_rows = ladder.table(model.alpha)
    rec["diagnostics"]["kam"] = {"schedule": sched.as_dict(), "steps": state.log,
                                 "eta0_times_e": etas[0] * math.e, "k0": model.k0,
                                 "final_offdiag": state.V.max_abs()}
    rec["tables"]["eta"] = eta_rows
    rec["tables"]["eps"] = eps_rows
    rec["results"]["eigenvalues"] = {"lambda0": ladder.rows[0], "lambdaInf": ladder.final, "eps": ladder.eps}
    tol = float(opts.get("etaTol", 1e-12))
    decreasing = all(b < a for a, b in zip(etas, etas[1:]))
    contraction = all(math.log(b) / math.log(a) >= 1.4 for a, b in zip(etas[1:], etas[2:]) if 0 < a < 1 and b > 0)
    sup_eps = float(np.max(np.arange(1, model.J + 1) ** model.alpha * np.abs(ladder.eps)))
    bound = 2 * model.gammaKam / model.M**model.alpha * etas[0] * math.e
    rec["diagnostics"]["kam"]["sup_j_alpha_eps"] = sup_eps
    rec["diagnostics"]["kam"]["eps_bound"] = bound
    rec["checks"]["kam_eta_decreasing"] = decreasing
    rec["checks"]["kam_converged"] = etas[-1] < tol
    rec["checks"]["kam_contraction"] = contraction
    rec["checks"]["kam_eps_bound"] = sup_eps <= bound
    return res, state, ladder


def _run_evolve(cfg, model, rec):
    from .evolve import (EvolutionRun, floquet_compare, hamiltonian, integrate, norm_bound_report, pair,
                         periodic_dt)
    res, state, ladder = _run_kam(cfg, model, rec)
    opts = cfg.options.get("evolve", {})
    T = float(opts.get("T", 50.0))
    r_list = [float(r) for r in opts.get("r", [0, 1, 2])]
    omega = res.omega
    lam_max = float(eigenvalues_B(model.mass, model.J)[-1])
    max_dt = 0.1 / max(float(np.linalg.norm(omega)), lam_max)
    dt = float(opts.get("dt", periodic_dt(omega[0], max_dt) if model.nu == 1 else max_dt))
    W = assemble_W(assemble_V(cfg.potential, model), model)
    phi0 = pair(reference_phi0(model.J, model.seed))
    run = EvolutionRun(phi0, T, dt, omega, sample_every=int(opts.get("sample_every", 400)))
    traj = integrate(hamiltonian(W, model), run, model)
    comp = floquet_compare(traj, res, state, model)
    report = norm_bound_report(traj, r_list)
    band = 1 + 20 / model.M ** ((1 - model.alpha) / 2)
    rec["tables"]["norm_trace"] = [{"t": float(t), "r": r, "norm": float(np.sqrt(np.sum(
        (1 + np.arange(1, model.J + 1) ** 2.0) ** r * np.abs(s[: model.J]) ** 2)))}
        for r in r_list for t, s in zip(traj.times, traj.states)]
    rec["tables"]["reconstruction"] = [{"t": float(t), "reconstruction_error": float(e)}
                                       for t, e in zip(comp["times"], comp["errors"])]
    rec["tables"]["norm_bounds"] = report
    rec["diagnostics"]["evolve"] = {"dt": dt, "T": T, "reality_defect": traj.reality_defect(),
                                    "max_error": comp["max_error"], "first_half_max": comp["first_half_max"],
                                    "second_half_max": comp["second_half_max"], "norm_band": band}
    rec["checks"]["floquet_error"] = comp["max_error"] <= float(opts.get("error_tol", 1e-3))
    rec["checks"]["floquet_no_secular_growth"] = comp["second_half_max"] <= 2 * comp["first_half_max"]
    rec["checks"]["sobolev_band"] = all(row["ratio"] <= band for row in report)


def _run_measure(cfg, model, rec):
    opts = cfg.options.get("measure", {})
    which = opts.get("set", "omega0")
    param = opts.get("param", "gamma0" if which == "omega0" else "gammaTilde")
    values = [float(v) for v in opts.get("values", [getattr(model, param)])]
    count = int(opts.get("count", 2000))
    sampler = FrequencySampler(model.nu, model.M, model.seed, count)
    rows = []
    lam = eigenvalues_B(model.mass, model.J)
    for v in values:
        m = model.replace(**{param: v})
        if which == "omega0":
            pred = lambda w, m=m: in_omega0(w, m)
        elif which == "U_alpha":
            pred = lambda w, m=m: in_omega0(w, m).member and in_U_alpha(w, lam, m).member
        else:
            raise ConfigInvalid("measure.set", "must be 'omega0' or 'U_alpha'")
        frac, (lo, hi) = estimate_measure(pred, sampler)
        rows.append({"gamma": v, "M": model.M, "nu": model.nu, "excluded_fraction": frac,
                     "ci_low": lo, "ci_high": hi, "n_samples": count, "seed": model.seed})
    rec["tables"]["measure"] = rows
    if len(values) > 1:
        c, r2 = fit_through_origin(values, [r["excluded_fraction"] for r in rows])
        rec["diagnostics"]["measure"] = {"slope_through_origin": c, "r2": r2}
        rec["checks"]["measure_linear_fit"] = r2 >= float(opts.get("r2_min", 0.9))


def sweep_metric(cfg: ExperimentConfig, model: ModelConfig, metric: str) -> float:
    V, omega, res = _magnus(cfg, model)
    if metric == "magnus_norm":
        return block_norm(res.V, NormParams(s=model.s0, rho=model.rho / 2, alphaW=1.0, betaW=0.0))
    if metric == "eta0":
        return eta_of(res.V, model.rho0, model)
    lam = eigenvalues_B(model.mass, model.J)
    opts = cfg.options.get("kam", {})
    state, _ = kam_run(res.V, lam, omega, model, maxSteps=int(opts.get("maxSteps", 12)),
                       etaTol=float(opts.get("etaTol", 1e-12)))
    if metric == "final_eta":
        return state.eta
    return transformation_distance(state, res)


def _run_sweep(cfg, model, rec):
    name, values = cfg.sweepAxis
    opts = cfg.options.get("sweep", {})
    metric = opts.get("metric", "magnus_norm")
    rows = []
    for v in values:
        m = model.replace(**{name: int(v) if isinstance(getattr(model, name), int) else float(v)})
        rows.append({"value": float(v), "metric": sweep_metric(cfg, m, metric)})
    rec["tables"]["sweep"] = rows
    if len(rows) > 1 and all(r["value"] > 0 and r["metric"] > 0 for r in rows):
        slope = loglog_slope([r["value"] for r in rows], [r["metric"] for r in rows])
        rec["diagnostics"]["sweep"] = {"axis": name, "metric": metric, "loglog_slope": slope}
        if "expect_slope" in opts:
            rec["checks"]["sweep_slope"] = abs(slope - float(opts["expect_slope"])) <= float(opts.get("slope_tol", 0.1))


PIPELINES = {"magnus": _run_magnus, "kam": _run_kam, "evolve": _run_evolve,
             "measure": _run_measure, "sweep": _run_sweep}


def run(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Execute one experiment; returns the run record and writes it (plus CSVs) to the output dir."""
    rec = {"config": cfg.to_dict(), "config_hash": cfg.content_hash(), "mode": cfg.mode,
           "diagnostics": {}, "results": {}, "tables": {}, "checks": {}, "errors": []}
    t0 = time.perf_counter()
    try:
        PIPELINES[cfg.mode](cfg, cfg.model, rec)
    except ConfigInvalid:
        raise
    except KGReduceError as exc:
        rec["errors"].append({"stage": cfg.mode, "type": type(exc).__name__, "message": str(exc)})
        rec["checks"]["pipeline_completed"] = False
    rec["timing"] = {"seconds": time.perf_counter() - t0}
    rec["passed"] = all(rec["checks"].values())
    rec = _clean(rec)
    if write:
        save_record(rec, cfg.output_dir())
    return rec


TABLE_FILES = {
    "eta": ("eta_decay.csv", ["n", "eta_n", "bound_template"]),
    "eps": ("eigenvalues.csv", ["j", "lambda0", "lambdaInf", "eps", "j_alpha_abs_eps"]),
    "measure": ("measure.csv", MEASURE_COLUMNS),
    "sweep": ("sweep.csv", ["value", "metric"]),
    "norm_trace": ("norm_trace.csv", ["t", "r", "norm"]),
    "reconstruction": ("reconstruction.csv", ["t", "reconstruction_error"]),
    "norm_bounds": ("norm_bounds.csv", ["r", "min", "max", "ratio"]),
}


def save_record(rec: dict, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "record.json"
    path.write_text(json.dumps(rec, indent=1, sort_keys=True))
    for name, rows in rec["tables"].items():
        fname, cols = TABLE_FILES[name]
        write_csv(out / fname, cols, rows)
    return path


# --- plot data -------------------------------------------------------------------

PLOT_METRICS = {
    "eta-decay": ("eta", ["n", "eta_n", "bound_template"],
                  "n: KAM step; eta_n: measured size; bound_template: eta_0*exp(1-(3/2)^n)"),
    "eps-asymptotics": ("eps", ["j", "eps", "j_alpha_abs_eps"],
                        "j: mode; eps: lambda_j^inf - lambda_j; j_alpha_abs_eps: j^alpha*|eps|"),
    "norm-trace": ("norm_trace", ["t", "r", "norm"], "t: time; r: Sobolev index; norm: H^r norm of phi(t)"),
    "reconstruction": ("reconstruction", ["t", "reconstruction_error"],
                       "t: time; reconstruction_error: relative H^0 distance to the integrated state"),
    "measure": ("measure", MEASURE_COLUMNS, "gamma: swept parameter; excluded_fraction with Wilson 95% interval"),
    "sweep": ("sweep", ["value", "metric"], "value: swept parameter; metric: measured quantity"),
}


def emit_plotdata(record: dict, which: str, path) -> Path:
    """Flat CSV for one metric of a run record; the first line documents the columns."""
    if which not in PLOT_METRICS:
        raise UnknownMetric(which)
    table, cols, doc = PLOT_METRICS[which]
    tables = record.get("tables", {})
    if table not in tables and record.get("mode") not in _PRODUCERS.get(table, ()):
        raise UnknownMetric(which)
    rows = tables.get(table, [])
    write_csv(path, cols, rows, comment=f"columns: {doc}")
    return Path(path)


_PRODUCERS = {
    "eta": ("kam", "evolve"), "eps": ("kam", "evolve"), "norm_trace": ("evolve",),
    "reconstruction": ("evolve",), "measure": ("measure",), "sweep": ("sweep",),
}
