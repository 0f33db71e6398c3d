"""Scenario runner: ``sojourn-lab <scenario> --config <path> [--out <dir>] [--seed <u64>]``.

Configurations are YAML (JSON is accepted as a subset), validated against
a versioned schema before anything runs. Each run writes ``report.json``
and, for sweeps, ``kappa_sweep.csv`` into the output directory.

Exit codes: 0 success, 1 a bound was violated beyond tolerance, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from . import __version__

logger = logging.getLogger("sojourn_lab")

SCHEMA_VERSION = 1
SCENARIOS = ("width", "sojourn", "fgr-sweep", "floquet", "ac-stark", "multistate", "verify")
SWEEP_COLUMNS = ("kappa", "lambda2", "gamma_fgr", "delta_e", "sojourn_lb", "sojourn_trunc", "ratio")

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Solver(_Strict):
    tol: PositiveFloat = 1e-10
    max_iter: PositiveInt = 200


class Discretization(_Strict):
    n: PositiveInt = 4001
    cutoff: PositiveFloat = 50.0


class LorentzianSpec(_Strict):
    kind: Literal["lorentzian"] = "lorentzian"
    E_r: float = 0.0
    Gamma: PositiveFloat = 1.0
    discretize: Optional[Discretization] = None


class WWSpec(_Strict):
    kind: Literal["wigner_weisskopf"] = "wigner_weisskopf"
    E0: float = 0.0
    band: tuple[float, float] = (-2.0, 2.0)
    n_levels: Annotated[int, Field(ge=200)] = 2000
    g: PositiveFloat = 1.3


class TightBindingSpec(_Strict):
    kind: Literal["tight_binding"] = "tight_binding"
    L: Annotated[int, Field(ge=200)] = 401
    hopping: PositiveFloat = 1.0
    defect_energy: float = 3.0
    boundary: Literal["dirichlet", "periodic"] = "dirichlet"


class WidthConfig(_Strict):
    schema_version: Literal[1] = 1
    model: Annotated[Union[LorentzianSpec, WWSpec, TightBindingSpec],
                     Field(discriminator="kind")] = LorentzianSpec()
    kappa: float = 0.1
    lambdas: Optional[list[float]] = None
    search_interval: Optional[tuple[float, float]] = None
    solver: Solver = Solver()


class SojournConfig(_Strict):
    schema_version: Literal[1] = 1
    model: Annotated[Union[LorentzianSpec, WWSpec], Field(discriminator="kind")] = LorentzianSpec()
    kappa: float = 0.1
    horizon: Optional[PositiveFloat] = None
    horizon_fraction: PositiveFloat = 0.4
    lam: Optional[float] = None
    eps: Optional[PositiveFloat] = None
    n_quad: Optional[PositiveInt] = None
    solver: Solver = Solver()


class FgrSweepConfig(_Strict):
    schema_version: Literal[1] = 1
    model: WWSpec = WWSpec()
    kappa_grid: list[Annotated[float, Field(ge=0)]] = [0.02, 0.04, 0.08, 0.16]
    eta: Optional[PositiveFloat] = None
    eta_list: Optional[list[PositiveFloat]] = None
    horizon_fraction: Optional[PositiveFloat] = 0.4
    bound_tol: Annotated[float, Field(ge=0, lt=1)] = 0.02
    solver: Solver = Solver()


class DrivenSpec(_Strict):
    E0: float = 0.0
    band: tuple[float, float] = (-2.0, 2.0)
    n_levels: PositiveInt = 400
    omega: PositiveFloat = 1.0
    kappa: float = 0.08
    g: PositiveFloat = 1.0
    second_level: Optional[float] = 2.5
    rabi: float = 0.3


class FloquetConfig(_Strict):
    schema_version: Literal[1] = 1
    model: DrivenSpec = DrivenSpec()
    N: PositiveInt = 16
    N_sojourn: PositiveInt = 4
    howland_periods: PositiveInt = 1
    n_t: PositiveInt = 16
    n_t0: PositiveInt = 16
    horizon_fraction: PositiveFloat = 0.4
    eta: Optional[PositiveFloat] = None
    rel_tol: PositiveFloat = 0.01


class PotentialSpec(_Strict):
    kind: Literal["gaussian", "harmonic", "sech2"] = "gaussian"
    depth: PositiveFloat = 1.0
    width: PositiveFloat = 1.0


class GridSpec(_Strict):
    length: PositiveFloat = 200.0
    points: Annotated[int, Field(ge=16)] = 2000


class Harmonic(_Strict):
    n: PositiveInt
    re: float
    im: float = 0.0


class GaugeSpec(_Strict):
    potential: PotentialSpec = PotentialSpec(kind="harmonic")
    grid: GridSpec = GridSpec(length=40.0, points=512)
    periods: PositiveFloat = 2.0
    steps: list[PositiveInt] = [100, 200, 400, 800]


class AcStarkConfig(_Strict):
    schema_version: Literal[1] = 1
    potential: PotentialSpec = PotentialSpec()
    grid: GridSpec = GridSpec()
    field: list[Harmonic] = [Harmonic(n=1, re=0.5)]
    omega: PositiveFloat = 0.9
    kappa: float = 0.1
    eta: Optional[PositiveFloat] = None
    gauge: Optional[GaugeSpec] = GaugeSpec()


class PredissociationSpec(_Strict):
    n_bound: PositiveInt = 5
    bound_spacing: PositiveFloat = 1.5
    E0: float = 0.0
    band: tuple[float, float] = (-2.0, 2.0)
    n_levels: Annotated[int, Field(ge=200)] = 2000
    g: PositiveFloat = 1.3
    index: Annotated[int, Field(ge=0)] = 2


class MultistateConfig(_Strict):
    schema_version: Literal[1] = 1
    model: PredissociationSpec = PredissociationSpec()
    kappa: float = 0.1
    kappa_grid: list[Annotated[float, Field(ge=0)]] = [0.02, 0.04, 0.08, 0.16]
    eta: Optional[PositiveFloat] = None
    horizon_fraction: PositiveFloat = 0.4
    bound_tol: Annotated[float, Field(ge=0, lt=1)] = 0.02
    solver: Solver = Solver()


class VerifyConfig(_Strict):
    schema_version: Literal[1] = 1


CONFIGS = {
    "width": WidthConfig,
    "sojourn": SojournConfig,
    "fgr-sweep": FgrSweepConfig,
    "floquet": FloquetConfig,
    "ac-stark": AcStarkConfig,
    "multistate": MultistateConfig,
    "verify": VerifyConfig,
}


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def load_config(scenario: str, path: Optional[Path]) -> BaseModel:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
            raw = yaml.safe_load(text) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        declared = raw.pop("scenario", scenario)
        if declared != scenario:
            raise ConfigError(f"scenario: config is for {declared!r}, not {scenario!r}")
    try:
        return CONFIGS[scenario].model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def config_hash(cfg: BaseModel) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def emit_tables(report: dict, out_dir) -> list[Path]:
    """Write ``kappa_sweep.csv`` for reports carrying a sweep; returns the paths written."""
    out_dir = Path(out_dir)
    written = []
    sweep = report.get("results", {}).get("sweep")
    if sweep is not None:
        path = out_dir / "kappa_sweep.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_COLUMNS)
            for row in sweep.get("rows", []):
                writer.writerow([_fmt(row.get(c)) for c in SWEEP_COLUMNS])
        written.append(path)
    return written


def _sweep_rows(sweep) -> list[dict]:
    return [{"kappa": r.kappa, "lambda2": r.lambda2, "gamma_fgr": r.gamma_fgr, "delta_e": r.delta_e,
             "sojourn_lb": r.sojourn_lb, "sojourn_trunc": r.sojourn_trunc, "ratio": r.ratio,
             "horizon": r.horizon} for r in sweep.rows]


# --------------------------------------------------------------------------
# scenarios; each returns (results dict, bound_ok)
# --------------------------------------------------------------------------

def _ww_family(spec: WWSpec):
    from .models import WignerWeisskopfSpec, wigner_weisskopf

    g = spec.g
    return wigner_weisskopf(WignerWeisskopfSpec(spec.E0, tuple(spec.band), spec.n_levels,
                                                lambda e: np.full_like(e, g)))


def _measure_for(model, kappa: float):
    """(measure or analytic model, default lambda)."""
    from .models import LorentzianModel, lorentzian_discretize, tight_binding_defect
    from .spectral import spectral_measure

    if isinstance(model, LorentzianSpec):
        lor = LorentzianModel(model.E_r, model.Gamma)
        if model.discretize is None:
            return lor, model.E_r
        d = model.discretize
        return lorentzian_discretize(lor, d.n, d.cutoff * model.Gamma), model.E_r
    if isinstance(model, WWSpec):
        fam = _ww_family(model)
        return spectral_measure(fam.hamiltonian(kappa), fam.psi), model.E0
    H, state = tight_binding_defect(model.L, model.hopping, model.defect_energy,
                                    boundary=model.boundary)
    mu = spectral_measure(H, state)
    return mu, mu.mean()


def run_width(cfg: WidthConfig, seed: int):
    from .width import best_lambda, energy_width

    mu, lam0 = _measure_for(cfg.model, cfg.kappa)
    lambdas = cfg.lambdas if cfg.lambdas is not None else [lam0]
    rows = []
    for lam in lambdas:
        w = energy_width(mu, lam, cfg.solver.tol, cfg.solver.max_iter)
        rows.append({"lam": w.lam, "delta_e": w.delta_e, "f_at_solution": w.f_at_solution,
                     "iterations": w.iterations, "zero_width": w.zero_width,
                     "sojourn_lb": w.sojourn_lower_bound,
                     "f_evaluations": [list(p) for p in w.trace]})
    out = {"widths": rows}
    if cfg.search_interval is not None:
        lam, w = best_lambda(mu, cfg.search_interval, cfg.solver.tol)
        out["best"] = {"lam": lam, "delta_e": w.delta_e, "sojourn_lb": w.sojourn_lower_bound}
    return out, True


def run_sojourn(cfg: SojournConfig, seed: int):
    from .sojourn import lemma_bound_check, sojourn_truncated
    from .width import energy_width

    mu, lam0 = _measure_for(cfg.model, cfg.kappa)
    lam = cfg.lam if cfg.lam is not None else lam0
    w = energy_width(mu, lam, cfg.solver.tol, cfg.solver.max_iter)
    if cfg.horizon is not None:
        horizon = cfg.horizon
    elif math.isfinite(mu.heisenberg_time()):
        horizon = cfg.horizon_fraction * mu.heisenberg_time()
    elif w.delta_e > 0:
        horizon = 30.0 / w.delta_e
    else:
        # a single atom never decays; there is no natural horizon
        out = {"lam": lam, "delta_e": 0.0, "sojourn_lb": math.inf,
               "sojourn": {"value": math.inf, "horizon": math.inf}}
        return out, True
    est = sojourn_truncated(mu, horizon, cfg.n_quad)
    out = {"lam": lam, "delta_e": w.delta_e, "sojourn_lb": w.sojourn_lower_bound,
           "sojourn": {"value": est.value, "horizon": est.horizon, "tail_bound": est.tail_bound,
                       "upper_estimate": est.upper_estimate,
                       "heisenberg_time": est.heisenberg_time, "n_quad": est.n_quad}}
    ok = est.upper_estimate >= 0.98 * w.sojourn_lower_bound if w.delta_e > 0 else True
    if cfg.eps is not None:
        rep = lemma_bound_check(mu, lam, cfg.eps, horizon, n_quad=cfg.n_quad)
        out["lemma"] = rep
        ok = ok and rep.ok
    return out, ok


def run_fgr_sweep(cfg: FgrSweepConfig, seed: int):
    from .perturbation import default_eta_list, eta_extrapolation, kappa_sweep

    fam = _ww_family(cfg.model)
    lo, hi = fam.admissible_window()
    etas = cfg.eta_list if cfg.eta_list is not None else default_eta_list(fam)
    ex = eta_extrapolation(fam, 1.0, etas)
    eta = cfg.eta if cfg.eta is not None else lo
    sweep = kappa_sweep(fam, cfg.kappa_grid, eta, tol=cfg.solver.tol,
                        horizon_fraction=cfg.horizon_fraction)
    ratios = [r.ratio for r in sweep.rows if r.ratio is not None]
    ok = all(r >= 1.0 - cfg.bound_tol for r in ratios)
    out = {
        "eta_window": [lo, hi],
        "eta": eta,
        "extrapolation": {"coefficient": ex.gamma_limit, "quality": ex.quality,
                          "etas": ex.etas, "values": ex.gammas, "slope": ex.slope},
        "sweep": {"rows": _sweep_rows(sweep), "slope": sweep.slope, "prefactor": sweep.prefactor,
                  "coefficient_at_eta": sweep.coefficient,
                  "scaled_widths": sweep.scaled_widths},
    }
    return out, ok


def run_floquet(cfg: FloquetConfig, seed: int):
    from .floquet import averaged_sojourn, floquet_fgr, howland_check
    from .models import driven_level_continuum

    m = cfg.model
    kw = dict(g=m.g, second_level=m.second_level, rabi=m.rabi)
    fp, psi = driven_level_continuum(m.E0, tuple(m.band), m.n_levels, m.omega, m.kappa,
                                     N=cfg.N, **kw)
    spacing = (m.band[1] - m.band[0]) / m.n_levels
    eta = cfg.eta if cfg.eta is not None else 3.0 * spacing
    howland = howland_check(fp, fp.embed(psi), cfg.howland_periods * fp.period, n_t=cfg.n_t)
    gamma = floquet_fgr(fp, psi, m.E0, eta)
    fp_s, _ = driven_level_continuum(m.E0, tuple(m.band), m.n_levels, m.omega, m.kappa,
                                     N=cfg.N_sojourn, **kw)
    horizon = cfg.horizon_fraction * 2.0 * math.pi / spacing
    avg = averaged_sojourn(fp_s, psi, horizon, cfg.n_t0, rel_tol=cfg.rel_tol)
    out = {"howland_residual": howland, "floquet_fgr": gamma, "eta": eta,
           "averaged_sojourn": avg}
    return out, bool(avg.jensen_ok and avg.bound_ok)


def _potential(spec: PotentialSpec):
    a, s = spec.depth, spec.width
    if spec.kind == "gaussian":
        return (lambda x: -a * np.exp(-0.5 * (x / s) ** 2),
                lambda x: a * x / s ** 2 * np.exp(-0.5 * (x / s) ** 2))
    if spec.kind == "sech2":
        return (lambda x: -a / np.cosh(x / s) ** 2,
                lambda x: 2 * a / s * np.tanh(x / s) / np.cosh(x / s) ** 2)
    return (lambda x: 0.5 * a * (x / s) ** 2, lambda x: a * x / s ** 2)


def _grid(spec: GridSpec) -> np.ndarray:
    return np.linspace(-0.5 * spec.length, 0.5 * spec.length, spec.points, endpoint=False)


def run_ac_stark(cfg: AcStarkConfig, seed: int):
    from .floquet import ac_stark_scenario, eacs_width, floquet_fgr, gauge_convergence

    F = {h.n: complex(h.re, h.im) for h in cfg.field}
    W, dW = _potential(cfg.potential)
    sc = ac_stark_scenario(W, F, cfg.omega, cfg.kappa, _grid(cfg.grid))
    if cfg.eta is not None:
        eta = cfg.eta
    else:
        vals = sc.problem.H0.eigenvalues
        target = sc.E0 + min(F) * sc.omega
        near = np.sort(vals[np.argsort(np.abs(vals - target))[:12]])
        eta = 3.0 * float(np.max(np.diff(near)))
    out = {"E0": sc.E0, "eta": eta,
           "eacs_width": eacs_width(sc, eta, dW),
           "eacs_width_fd": eacs_width(sc, eta),
           "floquet_fgr": floquet_fgr(sc.problem, sc.psi, sc.E0, eta)}
    if cfg.gauge is not None:
        g = cfg.gauge
        W2, _ = _potential(g.potential)
        sc2 = ac_stark_scenario(W2, F, cfg.omega, cfg.kappa, _grid(g.grid))
        res, order = gauge_convergence(sc2, 0.0, g.periods * sc2.problem.period, g.steps)
        out["gauge"] = {"steps": g.steps, "residuals": res, "order": order}
    return out, True


def run_multistate(cfg: MultistateConfig, seed: int):
    from .models import predissociation_model
    from .multistate import as_family, ms_fgr, ms_pipeline, ms_sweep

    m = cfg.model
    model = predissociation_model(n_bound=m.n_bound, bound_spacing=m.bound_spacing, E0=m.E0,
                                  band=tuple(m.band), n_levels=m.n_levels, g=m.g,
                                  kappa=cfg.kappa, index=m.index)
    eta = cfg.eta if cfg.eta is not None else as_family(model).admissible_window()[0]
    rep = ms_pipeline(model, eta=eta, tol=cfg.solver.tol, horizon_fraction=cfg.horizon_fraction,
                      bound_tol=cfg.bound_tol)
    sweep = ms_sweep(model, cfg.kappa_grid, eta, tol=cfg.solver.tol,
                     horizon_fraction=cfg.horizon_fraction)
    ratios = [r.ratio for r in sweep.rows if r.ratio is not None]
    ok = rep.bound_ok and all(r >= 1.0 - cfg.bound_tol for r in ratios)
    out = {"eta": eta, "ms_fgr": ms_fgr(model, eta), "pipeline": rep,
           "sweep": {"rows": _sweep_rows(sweep), "slope": sweep.slope,
                     "prefactor": sweep.prefactor, "coefficient_at_eta": sweep.coefficient}}
    return out, ok


def run_verify(cfg: VerifyConfig, seed: int):
    from .verify import run_suite

    checks = run_suite(seed)
    return {"checks": [c.as_dict() for c in checks]}, all(c.ok for c in checks)


RUNNERS = {
    "width": run_width,
    "sojourn": run_sojourn,
    "fgr-sweep": run_fgr_sweep,
    "floquet": run_floquet,
    "ac-stark": run_ac_stark,
    "multistate": run_multistate,
    "verify": run_verify,
}


def run(scenario: str, cfg: BaseModel, *, seed: int = 0, out_dir=None,
        timestamp: Optional[str] = None) -> tuple[int, dict]:
    """Execute a validated config. Returns ``(exit_code, report)``; writes files if ``out_dir``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results, ok = RUNNERS[scenario](cfg, seed)
    report = {
        "scenario": scenario,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg.model_dump(mode="json"),
        "seed": seed,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "bound_ok": bool(ok),
        "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
        "results": to_jsonable(results),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True,
                                                    allow_nan=False) + "\n")
        emit_tables(report, out)
    return (EXIT_OK if ok else EXIT_BOUND), report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sojourn-lab", description=__doc__.split("\n")[0])
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", type=Path, default=None, help="YAML or JSON config; defaults if omitted")
    p.add_argument("--out", type=Path, default=Path("sojourn-lab-out"), help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized suites (u64)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2 ** 64:
        print("config error: seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.scenario, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, report = run(args.scenario, cfg, seed=args.seed, out_dir=args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__module__}.{type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    status = "ok" if code == EXIT_OK else "BOUND VIOLATED"
    print(f"{args.scenario}: {status} -> {args.out / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
