"""Command line front end: flat key=value configs, sweeps, reports and re-fits.

    gbeams run --config exp.cfg [--workers N] [--out-dir D]
    gbeams check-admissibility --config exp.cfg
    gbeams rates --in results.csv
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .analysis import (MeasurementPlan, RateError, epsilon_sweep, evaluate_targets, fit_rate, fit_semilog,
                       targets_for)
from .geometry import export_json, jacobian_bounds, min_delta
from .problems import (MEDIA, PHASES, PROFILES, AssumptionError, InitialData, ProblemSpec)
from .superposition import CutoffSpec, build_lattice, check_admissibility, select_eta

SCHEMA = "gbeams-report/1"
CSV_COLUMNS = ("epsilon", "k", "s", "t_slice", "l2_err", "h1_err", "h1eps_err", "max_away", "max_caustic",
               "max_outside", "residual_l2", "runtime_sec")


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and line."""


# --------------------------------------------------------------------------
# value parsers
# --------------------------------------------------------------------------
def _number(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return float(base) ** float(exp)
    return float(text)


def _floats(text: str) -> tuple:
    return tuple(_number(v) for v in text.replace(";", ",").split(",") if v.strip())


def _epsilons(text: str) -> tuple:
    """Comma list of numbers; ``2^-4..2^-9`` expands over the integer exponents."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part and "^" in part:
            lo, hi = part.split("..")
            base, e0 = lo.split("^")
            base1, e1 = hi.split("^")
            if float(base) != float(base1):
                raise ValueError("range ends need the same base")
            a, b = int(e0), int(e1)
            step = 1 if b >= a else -1
            out += [float(base) ** e for e in range(a, b + step, step)]
        else:
            out.append(_number(part))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _eta(text: str):
    t = text.strip().lower()
    if t == "auto":
        return "auto"
    if t in ("inf", "infinite", "infinity"):
        return math.inf
    v = _number(t)
    if not v > 0:
        raise ValueError("eta must be positive")
    return v


def _choice(options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {t!r}")
        return t

    return parse


def _str(text: str) -> str:
    return text.strip()


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _targets(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# key -> (parser, default); None means "derived" or "not set"
KEYS = {
    "preset": (_choice({"none", "figure1", "free_focusing"}), "none"),
    "name": (_str, "experiment"),
    "equation": (_choice({"schrodinger", "wave"}), None),
    "dimension": (_int, None),
    "order": (_int, None),
    "T": (_number, None),
    "epsilons": (_epsilons, None),
    "medium": (_choice(set(MEDIA)), "free"),
    "medium.omega": (_number, 1.0),
    "medium.c0": (_number, 1.0),
    "medium.amp": (_number, None),
    "medium.center": (_floats, None),
    "medium.width": (_number, None),
    "phase0": (_choice(set(PHASES)), "focusing_quadratic"),
    "phase.a": (_number, 1.0),
    "phase.ripple": (_number, 0.0),
    "phase.wavenumber": (_number, 2.0),
    "phase.direction": (_floats, None),
    "phase.curvature": (_number, 0.5),
    "amplitude": (_choice(set(PROFILES)), "gaussian"),
    "amplitude.center": (_floats, None),
    "amplitude.radius": (_number, 1.0),
    "amplitude.width": (_number, None),
    "b1": (_choice({"zero", "one_way"}), "zero"),
    "k0_lo": (_floats, None),
    "k0_hi": (_floats, None),
    "fatten": (_number, None),
    "caustic_times": (_floats, ()),
    "eta": (_eta, "auto"),
    "extra_etas": (_floats, ()),
    "delta": (_number, 0.2),
    "delta_outside": (_number, 0.5),
    "gamma": (_number, 4.0),
    "ppw": (_number, 16.0),
    "pad": (_number, None),
    "slices": (_int, 16),
    "slice_times": (_floats, None),
    "s_max": (_int, 1),
    "regions": (_bool, True),
    "residual": (_bool, False),
    "residual_stencil": (_number, 1.0 / 64),
    "reference": (_bool, True),
    "initial": (_bool, True),
    "probes": (_int, 2048),
    "seed": (_int, 0),
    "beam_step": (_number, None),
    "reference_dt": (_number, None),
    "targets": (_targets, ("all",)),
    "timing": (_bool, True),
    "save_fields": (_bool, False),
    "out_dir": (_str, "results"),
}

REQUIRED = ("equation", "dimension", "order", "T", "epsilons")

PRESETS = {
    # cusp example: wave speed 1, the minus mode focuses near t = 0.5
    "figure1": {
        "equation": "wave", "dimension": 2, "order": 1, "T": 1.2, "medium": "const_speed",
        "phase0": "figure1", "amplitude": "bump", "amplitude.center": (0.0, 0.0), "amplitude.radius": 1.0,
        "k0_lo": (-1.0, -1.0), "k0_hi": (1.0, 1.0), "fatten": 0.1,
    },
    "free_focusing": {
        "equation": "schrodinger", "dimension": 1, "medium": "free", "phase0": "focusing_quadratic",
        "amplitude": "gaussian", "amplitude.center": (0.0,), "amplitude.radius": 4.3, "amplitude.width": 0.5,
        "T": 1.5, "caustic_times": (1.0,),
    },
}


@dataclass
class ExperimentConfig:
    values: dict
    lines: dict = field(default_factory=dict)  # key -> line number in the source file
    source: str = ""

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> str:
        """Canonical key=value text that reproduces this configuration."""
        out = []
        for key in KEYS:
            v = self.values.get(key)
            if v is None:
                continue
            out.append(f"{key} = {_format(v)}")
        return "\n".join(out) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            raw[key] = KEYS[key][0](value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{no}: bad value for {key!r}: {exc}") from None
        lines[key] = no
    values = {k: d for k, (_, d) in KEYS.items()}
    preset = raw.get("preset", "none")
    values.update(PRESETS.get(preset, {}))
    values.update(raw)
    cfg = ExperimentConfig(values, lines, source)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def _where(cfg: ExperimentConfig, key: str) -> str:
    no = cfg.lines.get(key)
    return f"{cfg.source}:{no}" if no else f"{cfg.source} ({key} from defaults)"


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    for key in REQUIRED:
        if v.get(key) is None:
            raise ConfigError(f"{cfg.source}: missing required key {key!r}")
    if v["dimension"] not in (1, 2):
        raise ConfigError(f"{_where(cfg, 'dimension')}: dimension must be 1 or 2")
    if v["order"] not in (1, 2, 3, 4):
        raise ConfigError(f"{_where(cfg, 'order')}: order k must be in 1..4")
    if not v["T"] > 0:
        raise ConfigError(f"{_where(cfg, 'T')}: T must be positive")
    if not v["epsilons"]:
        raise ConfigError(f"{_where(cfg, 'epsilons')}: need at least one epsilon")
    for e in v["epsilons"]:
        if not 0 < e <= 1:
            raise ConfigError(f"{_where(cfg, 'epsilons')}: epsilon {e} violates the assumption 0 < eps <= 1")
    n = v["dimension"]
    for key in ("k0_lo", "k0_hi", "amplitude.center", "phase.direction"):
        if v.get(key) is not None and len(v[key]) != n:
            raise ConfigError(f"{_where(cfg, key)}: {key} needs {n} entries")
    if v["equation"] == "wave" and MEDIA[v["medium"]]().role != "speed":
        raise ConfigError(f"{_where(cfg, 'medium')}: the wave equation needs a speed medium")
    if v["equation"] == "schrodinger" and MEDIA[v["medium"]]().role != "potential":
        raise ConfigError(f"{_where(cfg, 'medium')}: the Schrödinger equation needs a potential")
    if v["equation"] == "schrodinger" and v["b1"] != "zero":
        raise ConfigError(f"{_where(cfg, 'b1')}: B1 only applies to the wave equation")
    if v["phase0"] == "figure1" and n != 2:
        raise ConfigError(f"{_where(cfg, 'phase0')}: the figure1 phase is two-dimensional")
    known = set(targets_for_equation(v["equation"]))
    for t in v["targets"]:
        if t not in known | {"all", "none"}:
            raise ConfigError(f"{_where(cfg, 'targets')}: unknown target {t!r}; known: {sorted(known)}")


def targets_for_equation(equation: str) -> dict:
    if equation == "schrodinger":
        return {"l2": 0, "h1": 0, "residual_l2": 0, "max_away_from_caustic": 0, "max_near_caustic": 0,
                "max_outside_support": 0, "initial_max": 0, "initial_l2": 0}
    return {"energy_err": 0, "residual_l2": 0, "max_away_from_caustic": 0, "max_near_caustic": 0,
            "max_outside_support": 0, "initial_max": 0, "initial_l2": 0}


# --------------------------------------------------------------------------
# building problems
# --------------------------------------------------------------------------
def _medium(v):
    name = v["medium"]
    n = v["dimension"]
    if name == "free":
        return MEDIA[name]()
    if name == "harmonic":
        return MEDIA[name](v["medium.omega"])
    if name == "const_speed":
        return MEDIA[name](v["medium.c0"])
    kw = {}
    if v.get("medium.amp") is not None:
        kw["amp"] = v["medium.amp"]
    kw["center"] = v["medium.center"] if v.get("medium.center") is not None else (0.0,) * n
    if v.get("medium.width") is not None:
        kw["width"] = v["medium.width"]
    if name == "gaussian_bump_speed":
        kw["c0"] = v["medium.c0"]
    return MEDIA[name](**kw)


def _phase(v):
    name = v["phase0"]
    if name == "focusing_quadratic":
        return PHASES[name](v["phase.a"], v["phase.ripple"], v["phase.wavenumber"])
    if name in ("linear", "curved_front"):
        d = v.get("phase.direction") or (1.0,) + (0.0,) * (v["dimension"] - 1)
        return PHASES[name](d) if name == "linear" else PHASES[name](d, v["phase.curvature"])
    return PHASES[name]()


def build_spec(cfg: ExperimentConfig) -> ProblemSpec:
    v = cfg.values
    n = v["dimension"]
    center = v["amplitude.center"] if v.get("amplitude.center") is not None else (0.0,) * n
    radius = v["amplitude.radius"]
    if v["amplitude"] == "gaussian":
        b0 = PROFILES["gaussian"](center, radius, v.get("amplitude.width"))
    else:
        b0 = PROFILES["bump"](center, radius)
    lo = v["k0_lo"] if v.get("k0_lo") is not None else tuple(c - radius for c in center)
    hi = v["k0_hi"] if v.get("k0_hi") is not None else tuple(c + radius for c in center)
    medium = _medium(v)
    data = InitialData(_phase(v), b0, lo, hi, b1_kind=v["b1"],
                       speed=medium if v["equation"] == "wave" else None)
    eta = v["eta"] if v["eta"] != "auto" else math.inf
    spec = ProblemSpec(v["equation"], medium, data, v["T"], v["order"], list(v["epsilons"]), eta,
                       tuple(v["caustic_times"]))
    if spec.equation == "wave":
        data.check_gradient(v.get("fatten"))
    return spec


def build_plan(cfg: ExperimentConfig) -> MeasurementPlan:
    v = cfg.values
    return MeasurementPlan(
        n_slices=v["slices"], slices=v.get("slice_times"), s_max=v["s_max"], delta=v["delta"],
        delta_outside=v["delta_outside"], regions=v["regions"], residual=v["residual"],
        residual_stencil=v["residual_stencil"], reference=v["reference"], initial=v["initial"],
        probes_per_region=v["probes"], seed=v["seed"], eta=v["eta"], gamma=v["gamma"], ppw=v["ppw"],
        pad=v.get("pad"), reference_dt=v.get("reference_dt"), beam_step=v.get("beam_step"),
        extra_etas=tuple(v["extra_etas"]), keep_fields=v["save_fields"],
    )


def enabled_targets(cfg: ExperimentConfig, spec: ProblemSpec) -> list:
    v = cfg.values
    chosen = v["targets"]
    if "none" in chosen:
        return []
    keys = list(targets_for(spec))
    if "all" not in chosen:
        return [k for k in keys if k in chosen]
    out = []
    for k in keys:
        if k == "residual_l2" and not v["residual"]:
            continue
        if k.startswith("max_") and not v["regions"]:
            continue
        if k.startswith("initial") and not v["initial"]:
            continue
        if k != "residual_l2" and not v["reference"]:
            continue
        out.append(k)
    return out


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------
def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite numbers to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path, rows, timing: bool = True) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            vals = []
            for col in CSV_COLUMNS:
                x = row.get(col, math.nan)
                if col == "runtime_sec" and not timing:
                    x = 0.0
                vals.append(repr(float(x)) if col not in ("k", "s") else str(int(x)))
            w.writerow(vals)
    return path


def _fit_all(sweep) -> dict:
    keys = set()
    for summary in sweep.per_eps.values():
        keys |= {k for k, v in summary.items() if isinstance(v, float) and "floor" not in k}
    keys -= {"runtime_sec", "eta"}
    fits = {}
    for key in sorted(keys):
        eps, vals = sweep.series(key)
        kind = "residual" if key.startswith("residual") else (
            "max" if key.startswith(("max_", "initial_max", "cutoff")) else "l2")
        floors = [sweep.per_eps[e].get("floor_" + kind, 0.0) for e in eps]
        try:
            fits[key] = fit_rate(eps, vals, floors).as_dict()
        except RateError as exc:
            fits[key] = {"error": str(exc)}
        if key.startswith("cutoff_diff"):
            # exponentially small: report the semilog fit as well
            try:
                fits[key + "_semilog"] = fit_semilog(eps, vals).as_dict()
            except RateError as exc:
                fits[key + "_semilog"] = {"error": str(exc)}
    return fits


def run(cfg: ExperimentConfig, workers: int | None = None, out_dir=None) -> tuple[int, dict]:
    """Execute the sweep, write every artifact and return (exit code, report)."""
    spec = build_spec(cfg)
    plan = build_plan(cfg)
    out = Path(out_dir or cfg.values["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or os.cpu_count() or 1
    sweep = epsilon_sweep(spec, list(cfg.values["epsilons"]), plan, workers=workers)
    enabled = enabled_targets(cfg, spec)
    timing = cfg.values["timing"]
    if not sweep.per_eps:
        verdict, code = {}, 2
    else:
        verdict = evaluate_targets(sweep, enabled)
        code = 0 if all(v["pass"] for v in verdict.values()) else 1
    geo = sweep.geometry
    per_eps = {repr(e): {k: v for k, v in s.items() if timing or k != "runtime_sec"}
               for e, s in sorted(sweep.per_eps.items())}
    report = {
        "schema": SCHEMA,
        "config": cfg.echo(),
        "backend": _kernels.backend(),
        "admissibility": {"eta": sweep.eta, "w4": sweep.w4},
        "per_epsilon": per_eps,
        "fits": _fit_all(sweep),
        "targets": verdict,
        "failures": {repr(e): msg for e, msg in sweep.failures.items()},
        "exit_code": code,
    }
    if geo is not None and geo.cloud is not None:
        report["geometry"] = {"min_delta": min_delta(geo.lattice), "tau": geo.cloud.tau,
                              "jacobian": {k: v for k, v in jacobian_bounds(geo.lattice).items()
                                           if k != "min_abs_det"}}
        extra = {"bbox": _clean([geo.bbox[0], geo.bbox[1]]), "eta": _clean(sweep.eta)}
        if geo.probes_outside is not None:
            extra["probes_outside"] = geo.probes_outside.to_json()
        export_json(out / "geometry.json", geo.cloud, geo.probes, extra)
        _write_cloud(out / "plots" / "caustic_cloud.dat", geo.cloud.points)
    report["reports"] = [
        {"t": r.t, "eps": r.eps, "l2": r.l2, "hs": r.hs, "hs_eps": r.hs_eps, "max_by_region": r.max_by_region,
         "flags": r.flags, "extra": r.extra} for r in sweep.reports
    ]
    write_csv(out / "results.csv", sweep.rows, timing)
    (out / "report.json").write_text(json.dumps(_clean(report), indent=1, sort_keys=True))
    (out / "config.echo.cfg").write_text(cfg.echo())
    _write_plots(out / "plots", sweep)
    if sweep.fields:
        (out / "fields").mkdir(exist_ok=True)
    for eps, flds in sorted(sweep.fields.items()):
        for tag, f in flds.items():
            f.save(out / "fields" / f"{tag}_eps{eps:.6g}.bin")
    return code, report


def _write_plots(folder: Path, sweep) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    keys = ("l2", "h1", "h1eps", "energy_err", "dt_l2", "residual_l2", "initial_max", "initial_l2",
            "max_away_from_caustic", "max_near_caustic", "max_outside_support")
    for key in keys:
        eps, vals = sweep.series(key)
        rows = [(e, v) for e, v in zip(eps, vals) if np.isfinite(v)]
        if not rows:
            continue
        with (folder / f"{key}.dat").open("w") as fh:
            fh.write("# epsilon error\n")
            for e, v in rows:
                fh.write(f"{e!r} {v!r}\n")


def _write_cloud(path: Path, points) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("# t y...\n")
        for p in np.asarray(points):
            fh.write(" ".join(repr(float(x)) for x in p) + "\n")


# --------------------------------------------------------------------------
# other commands
# --------------------------------------------------------------------------
def admissibility(cfg: ExperimentConfig) -> dict:
    spec = build_spec(cfg)
    per_axis = 64 if spec.dim == 1 else 24
    lat = build_lattice(spec, spacing=float(np.max(spec.data.k0_hi - spec.data.k0_lo)) / per_axis)
    eta = cfg.values["eta"]
    res = select_eta(lat) if eta == "auto" else check_admissibility(lat, CutoffSpec(float(eta)))
    return {"admissible": res.admissible, "eta": res.eta, "w4": res.w4, "witness": res.witness}


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def refit(rows, floor: float | None = None) -> dict:
    """Sup over slices per epsilon of every error column, then a rate fit per column."""
    cols = [c for c in CSV_COLUMNS if c not in ("epsilon", "k", "s", "t_slice", "runtime_sec")]
    eps = sorted({r["epsilon"] for r in rows})
    out = {}
    for col in cols:
        sup = []
        for e in eps:
            vals = [r[col] for r in rows if r["epsilon"] == e and np.isfinite(r[col])]
            sup.append(max(vals) if vals else math.nan)
        if all(not np.isfinite(v) for v in sup):
            continue
        try:
            out[col] = fit_rate(eps, sup, floor).as_dict()
        except RateError as exc:
            out[col] = {"error": str(exc), "eps": eps, "errors": sup}
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gbeams", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an epsilon sweep and write results")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--out-dir", default=None)
    p_adm = sub.add_parser("check-admissibility", help="find or check the cutoff radius")
    p_adm.add_argument("--config", required=True)
    p_rates = sub.add_parser("rates", help="re-fit rates from a results CSV")
    p_rates.add_argument("--in", dest="inp", required=True)
    p_rates.add_argument("--floor", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            code, report = run(load_config(args.config), args.workers, args.out_dir)
            for key, v in report["targets"].items():
                slope = v.get("slope")
                shown = "n/a" if slope is None else f"{slope:.3f}"
                print(f"{'PASS' if v['pass'] else 'FAIL'} {key}: slope {shown} (target >= {v['target']:.2f})")
            if report["failures"]:
                print(f"failed epsilons: {report['failures']}", file=sys.stderr)
            return code
        if args.command == "check-admissibility":
            res = admissibility(load_config(args.config))
            print(json.dumps(_clean(res), indent=1))
            return 0 if res["admissible"] else 1
        res = refit(read_csv(args.inp), args.floor)
        print(json.dumps(_clean(res), indent=1))
        return 0
    except (ConfigError, AssumptionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
