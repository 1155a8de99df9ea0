"""Scenario runner: ``vlasov --config scenario.json --out results/``.

One JSON document describes the equilibrium, the wave, the numerics and a
command.  Outputs are deterministic for a given config: every CSV starts
with ``#`` lines carrying the tool version and the fully resolved config,
floats are written in shortest round-trip form, and JSON reports embed the
same header under ``"meta"``.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .dispersion import DispersionEvaluator, find_roots
from .equilibrium import EquilibriumDistribution, Family, WaveConfig
from .grid import PerturbationField, VelocityGrid
from .initial import FAMILIES, emit_initial_field, resolve_spec
from .modes import (adjoint_mode, default_delta_weights, eigen_residual, inner_product,
                    magnetized_mode, normalization)
from .oracle import DiscreteOperator, integrate_direct
from .resolvent import ContourSpec, evolve, series_resolvent

log = logging.getLogger("vlasov_spectral")

COMMANDS = ("dispersion-scan", "find-roots", "mode-audit", "evolve", "integrate", "compare")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_AUTO_INT = {"oneOf": [{"type": "integer", "minimum": 0, "maximum": 200}, {"const": "auto"}]}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_TIMES = {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1e4}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["equilibrium", "wave", "command"],
    "additionalProperties": False,
    "properties": {
        "equilibrium": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": [f.value for f in Family]},
                "params": {"type": "object", "additionalProperties": _NUM},
            },
        },
        "wave": {
            "type": "object",
            "required": ["k_perp", "k_par"],
            "additionalProperties": False,
            "properties": {
                "k_perp": {"type": "number", "minimum": 0, "maximum": 100},
                "k_par": {"type": "number", "minimum": 0, "maximum": 100},
                "omega_p": {"type": "number", "minimum": 0, "maximum": 100},
                "omega_0": {"type": "number", "minimum": 0, "maximum": 100},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_par": {"type": "integer", "minimum": 4, "maximum": 4096},
                "n_perp": {"type": "integer", "minimum": 1, "maximum": 1024},
                "v_cut": {"type": "number", "exclusiveMinimum": 0, "maximum": 50},
                "m_max": _AUTO_INT,
                "n_max": _AUTO_INT,
                "method": {"enum": ["quadrature", "analytic"]},
                "continuation": {"enum": ["plus", "none"]},
                "root_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
            },
        },
        "command": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": list(COMMANDS)},
                "function": {"enum": ["epsilon", "epsilon0"]},
                "re_range": _PAIR,
                "im": _NUM,
                "n_points": {"type": "integer", "minimum": 2, "maximum": 100000},
                "region": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                "roots": {"type": "array", "items": _PAIR},
                "real_mu": {"type": "array", "items": _NUM},
                "delta_kinds": {"type": "array", "items": {"enum": ["gaussian", "ring", "shift+1", "shift-1"]}},
                "refinement": {"type": "array", "items": {"type": "integer", "minimum": 4, "maximum": 4096}},
                "times": _TIMES,
                "dt": {"oneOf": [_POS, {"const": "auto"}]},
                "tolerance": _POS,
                "initial_field": {
                    "type": "object",
                    "required": ["family"],
                    "properties": {"family": {"enum": list(FAMILIES)}},
                },
                "contour": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "offset_plus": _POS,
                        "offset_minus": {"type": "number", "exclusiveMaximum": 0},
                        "re_span": _PAIR,
                        "n_nodes": {"type": "integer", "minimum": 2, "maximum": 256},
                        "mode": {"enum": ["two-line", "residue-sum"]},
                        "tol": _POS,
                    },
                },
            },
        },
    },
}

DEFAULTS = {
    "numerics": {"n_par": 64, "n_perp": 24, "v_cut": 8.0, "m_max": "auto", "n_max": "auto",
                 "method": "quadrature", "continuation": "plus", "root_tol": 1e-9},
    "wave": {"omega_p": 1.0, "omega_0": 0.0},
    "command": {
        "dispersion-scan": {"function": "epsilon", "re_range": [0.0, 4.0], "im": 0.0, "n_points": 201},
        "find-roots": {"function": "epsilon", "region": [-4.0, 4.0, 0.05, 2.0]},
        "mode-audit": {"region": [-4.0, 4.0, 0.05, 2.0], "real_mu": [], "refinement": [32, 64, 128],
                       "delta_kinds": ["gaussian", "ring", "shift+1"]},
        "evolve": {"times": [0.0, 5.0, 10.0], "initial_field": {"family": "maxwellian-bump"}, "contour": {}},
        "integrate": {"times": [0.0, 5.0, 10.0], "initial_field": {"family": "maxwellian-bump"}, "dt": "auto"},
        "compare": {"times": [0.0, 5.0, 10.0], "initial_field": {"family": "maxwellian-bump"}, "contour": {},
                    "dt": "auto", "tolerance": 1e-3},
    },
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = problems
        super().__init__("; ".join(f"{p['path']}: {p['message']}" for p in problems))


# -- configuration ---------------------------------------------------------

def validate(config: dict):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    problems = [{"path": "/".join(str(p) for p in err.absolute_path) or "<root>", "message": err.message}
                for err in validator.iter_errors(config)]
    if problems:
        raise ConfigError(sorted(problems, key=lambda p: p["path"]))


def resolve(config: dict) -> dict:
    """Validate, fill defaults and expand every ``auto`` value."""
    validate(config)
    cfg = copy.deepcopy(config)
    cfg["numerics"] = {**DEFAULTS["numerics"], **cfg.get("numerics", {})}
    cfg["wave"] = {**DEFAULTS["wave"], **cfg["wave"]}
    cfg["equilibrium"] = _equilibrium(cfg).to_dict()
    name = cfg["command"]["name"]
    cfg["command"] = {"name": name, **DEFAULTS["command"][name], **cfg["command"]}
    try:
        wave = _wave(cfg)
    except ValueError as exc:
        raise ConfigError([{"path": "wave", "message": str(exc)}]) from exc
    if "initial_field" in cfg["command"]:
        try:
            cfg["command"]["initial_field"] = resolve_spec(cfg["command"]["initial_field"])
        except ValueError as exc:
            raise ConfigError([{"path": "command/initial_field", "message": str(exc)}]) from exc
    num = cfg["numerics"]
    if num["m_max"] == "auto":
        num["m_max"] = 1 if wave.magnetized and wave.k_perp > 0 else 0
    if num["n_max"] == "auto":
        num["n_max"] = _evaluator(cfg).n_max
    return cfg


def _equilibrium(cfg):
    eq = cfg["equilibrium"]
    try:
        return EquilibriumDistribution(eq["family"], dict(eq.get("params", {})))
    except ValueError as exc:
        raise ConfigError([{"path": "equilibrium/params", "message": str(exc)}]) from exc


def _wave(cfg):
    w = cfg["wave"]
    return WaveConfig(w["k_perp"], w["k_par"], w["omega_p"], w["omega_0"])


def _grid(cfg, n_par=None):
    n = cfg["numerics"]
    return VelocityGrid(n_par or n["n_par"], n["n_perp"], n["v_cut"], n["m_max"])


def _evaluator(cfg, n_par=None, method=None):
    n = cfg["numerics"]
    return DispersionEvaluator(_equilibrium(cfg), _wave(cfg), _grid(cfg, n_par), n["n_max"],
                               n["continuation"], method or n["method"])


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- output helpers --------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def _meta(cfg):
    return {"tool": "vlasov_spectral", "version": __version__, "config": cfg}


def write_csv(path: Path, cfg, header, rows):
    lines = [f"# vlasov_spectral {__version__}",
             "# config " + json.dumps(cfg, sort_keys=True, separators=(",", ":")),
             ",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_json(path: Path, cfg, payload):
    doc = {"meta": _meta(cfg), **_jsonable(payload)}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_csv(path) -> tuple[list, np.ndarray]:
    rows = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    header = rows[0].split(",")
    return header, np.array([[float(v) for v in r.split(",")] for r in rows[1:]])


# -- commands --------------------------------------------------------------

def cmd_dispersion_scan(cfg, out: Path):
    c = cfg["command"]
    ev = _evaluator(cfg)
    x = np.linspace(c["re_range"][0], c["re_range"][1], c["n_points"])
    z = x + 1j * c["im"]
    func = ev.epsilon0 if c["function"] == "epsilon0" else ev.epsilon
    eps = np.asarray(func(z))
    write_csv(out / "scan.csv", cfg, ["re_z", "im_z", "re_eps", "im_eps"],
              zip(z.real, z.imag, eps.real, eps.imag))
    return {"n_points": int(x.size), "sign_changes": int(np.sum(np.diff(np.sign(eps.real)) != 0))}


def _roots(cfg, ev, region, function="epsilon"):
    func = ev.epsilon0 if function == "epsilon0" else ev.epsilon
    return find_roots(func, region, root_tol=cfg["numerics"]["root_tol"])


def cmd_find_roots(cfg, out: Path):
    c = cfg["command"]
    roots = _roots(cfg, _evaluator(cfg), c["region"], c["function"])
    count_ok = sum(r.multiplicity_hint for r in roots if r.converged) == roots.count
    write_csv(out / "roots.csv", cfg, ["re_z", "im_z", "residual", "count_check"],
              [(r.z.real, r.z.imag, r.residual, "ok" if count_ok else "mismatch") for r in roots])
    return {"count": roots.count, "found": len(roots), "count_check": count_ok}


def _delta_family(ev, mu, kind):
    if kind.startswith("shift"):
        return default_delta_weights(ev, mu, "gaussian", int(kind[5:]))
    return default_delta_weights(ev, mu, kind)


def cmd_mode_audit(cfg, out: Path):
    c = cfg["command"]
    ev = _evaluator(cfg)
    if "roots" in c:
        roots = [complex(*r) for r in c["roots"]]
    else:
        # closed-form roots stay fixed across the refinement levels
        found = _roots(cfg, _evaluator(cfg, method="analytic"), c["region"])
        roots = [r.z for r in found if r.converged and r.z.imag != 0]
    levels = [int(n) for n in c["refinement"]]
    report = {"complex": [], "real": [], "orthogonality": []}

    direct = [magnetized_mode(ev, z) for z in roots]
    adjoint = [adjoint_mode(ev, z) for z in roots]
    for z, g, a in zip(roots, direct, adjoint):
        res = []
        for n in levels:
            evn = _evaluator(cfg, n_par=n)
            # unpolished on purpose: coarse levels miss the root and the residual shows it
            res.append(eigen_residual(magnetized_mode(evn, z, root_tol=1.0, polish=False)))
        report["complex"].append({"z": z, "grid_root": g.eigenvalue, "normalization": normalization(g),
                                  "adjoint_normalization": normalization(a),
                                  "residuals": [{"n_par": n, "residual": r} for n, r in zip(levels, res)]})
    report["orthogonality"] = [[abs(inner_product(a, g)) for g in direct] for a in adjoint]

    for mu in c["real_mu"]:
        entry = {"mu": mu, "families": {}}
        for kind in c["delta_kinds"]:
            m = magnetized_mode(ev, mu, _delta_family(ev, mu, kind))
            res = []
            for n in levels:
                evn = _evaluator(cfg, n_par=n)
                res.append(eigen_residual(magnetized_mode(evn, mu, _delta_family(evn, mu, kind))))
            entry["families"][kind] = {"normalization": normalization(m),
                                       "residuals": [{"n_par": n, "residual": r} for n, r in zip(levels, res)]}
        entry["adjoint_normalization"] = normalization(adjoint_mode(ev, mu))
        report["real"].append(entry)
    write_json(out / "mode_audit.json", cfg, report)
    return {"complex_modes": len(roots), "real_modes": len(c["real_mu"])}


def _initial(cfg):
    return emit_initial_field(cfg["command"]["initial_field"], _grid(cfg), _wave(cfg))


def _contour(cfg):
    return ContourSpec(**{k: (tuple(v) if k == "re_span" else v)
                          for k, v in cfg["command"].get("contour", {}).items()})


def _series_rows(snapshots):
    return [(s.t, s.moment.real, s.moment.imag, s.field.l2_norm()) for s in snapshots]


SERIES_HEADER = ["t", "re_moment", "im_moment", "field_l2"]


def _run_evolve(cfg):
    ev = _evaluator(cfg)
    f0 = _initial(cfg)
    outs = evolve(ev, f0, cfg["command"]["times"], _contour(cfg))
    padded = PerturbationField(series_resolvent(ev, f0.grid).pad(f0), outs[0].field.grid, f0.wave)
    return outs, padded


def cmd_evolve(cfg, out: Path):
    outs, f0 = _run_evolve(cfg)
    write_csv(out / "evolve.csv", cfg, SERIES_HEADER, _series_rows(outs))
    report = {"diagnostics": [{"t": o.t, **{k: v for k, v in o.diagnostics.items() if k != "residues"}}
                              for o in outs]}
    zero = [o for o in outs if o.t == 0]
    if zero:
        report["t0_field_error"] = (zero[0].field - f0).l2_norm() / f0.l2_norm()
    write_json(out / "evolve_report.json", cfg, report)
    return {k: v for k, v in report.items() if k != "diagnostics"}


def _run_integrate(cfg):
    ev = _evaluator(cfg)
    f0 = _initial(cfg)
    S = series_resolvent(ev, f0.grid)
    padded = PerturbationField(S.pad(f0), S.grid_out, f0.wave)
    op = DiscreteOperator(_wave(cfg), _equilibrium(cfg), S.grid_out)
    dt = cfg["command"]["dt"]
    if dt == "auto":
        dt = min(0.02, 2.5 / op.spectral_radius_bound())
    return integrate_direct(op, padded, times=cfg["command"]["times"], dt=dt), dt


def cmd_integrate(cfg, out: Path):
    snaps, dt = _run_integrate(cfg)
    write_csv(out / "integrate.csv", cfg, SERIES_HEADER, _series_rows(snaps))
    return {"dt": dt}


def cmd_compare(cfg, out: Path):
    outs, _ = _run_evolve(cfg)
    snaps, dt = _run_integrate(cfg)
    snaps = {s.t: s for s in snaps}
    rows = []
    for o in outs:
        s = snaps[float(o.t)]
        ref = s.field.l2_norm()
        rows.append({"t": o.t, "field_rel_l2": (o.field - s.field).l2_norm() / ref if ref else 0.0,
                     "moment_abs_dev": abs(o.moment - s.moment)})
    write_csv(out / "evolve.csv", cfg, SERIES_HEADER, _series_rows(outs))
    write_csv(out / "integrate.csv", cfg, SERIES_HEADER, _series_rows(snaps.values()))
    worst = max(r["field_rel_l2"] for r in rows)
    report = {"per_time": rows, "max_rel_deviation": worst, "dt": dt,
              "tolerance": cfg["command"]["tolerance"],
              "within_tolerance": bool(worst < cfg["command"]["tolerance"])}
    write_json(out / "compare.json", cfg, report)
    return {"max_rel_deviation": worst, "within_tolerance": report["within_tolerance"]}


HANDLERS = {
    "dispersion-scan": cmd_dispersion_scan,
    "find-roots": cmd_find_roots,
    "mode-audit": cmd_mode_audit,
    "evolve": cmd_evolve,
    "integrate": cmd_integrate,
    "compare": cmd_compare,
}


def run(config: dict, out_dir, command=None) -> int:
    """Execute one scenario; returns the process exit status.

    Failures leave ``error.json`` in ``out_dir`` (status 2 for config
    errors, 1 for numerical ones).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = copy.deepcopy(config)
    if command is not None:
        config.setdefault("command", {})["name"] = command
    try:
        cfg = resolve(config)
    except ConfigError as exc:
        _error(out, config, "config", str(exc), exc.problems)
        return 2
    name = cfg["command"]["name"]
    log.info("running %s", name)
    try:
        summary = HANDLERS[name](cfg, out)
    except Exception as exc:  # reported, not swallowed: exit status carries it
        log.debug("command failed", exc_info=True)
        _error(out, cfg, type(exc).__name__, f"{name}: {exc}", [])
        return 1
    write_json(out / "report.json", cfg, {"status": "ok", "command": name, "summary": summary})
    return 0


def _error(out, cfg, kind, message, problems):
    doc = {"status": "error", "kind": kind, "message": message, "problems": problems,
           "meta": {"tool": "vlasov_spectral", "version": __version__, "config": cfg}}
    (out / "error.json").write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n",
                                    encoding="utf-8")
    print(f"error: {message}", file=sys.stderr)


def _threads(arg):
    if arg is None:
        env = os.environ.get("VLASOV_THREADS")
        arg = int(env) if env else None
    if arg is None or arg == 0:
        return None  # all cores
    if arg < 0:
        raise SystemExit("--threads must be >= 0")
    return arg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vlasov", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--command", choices=COMMANDS, help="override the config's command name")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP thread budget, 0 = all cores (fallback: VLASOV_THREADS)")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    with threadpool_limits(limits=_threads(args.threads)):
        return run(config, args.out, args.command)


if __name__ == "__main__":
    sys.exit(main())
