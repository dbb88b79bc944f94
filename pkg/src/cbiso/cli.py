"""Command-line front end.

    cbiso <command> --input in.json --output report.json [--seed S] [--budget B]
                    [--tol name=value ...] [--grid n]
    cbiso --config experiment.json

Exit status: 0 success, 2 validation error, 3 engine error.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from dataclasses import dataclass, field, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from . import counterexample as cx
from . import families
from . import matrix_core as mc
from . import model_space as ms
from . import similarity as sim
from .config import DEFAULT, MIN_TOLERANCE
from .errors import ConditioningError, ConvergenceError, NotInSpanError, OptimizerFailure, RepeatedRootError, SchemaError
from .operator_space import CBLinearMap, OperatorSubspace, cb_norm_estimate
from .seeds import rng_for

COMMANDS = ("cbnorm", "paulsen", "iterate", "almost-isometric", "counterexample", "model", "carleson", "clbp")
EXIT_OK, EXIT_INVALID, EXIT_ENGINE = 0, 2, 3


class ValidationError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    input_path: str | None = None
    output_path: str = "report.json"
    seed: int = 0
    budget: int = 8
    tolerances: dict = field(default_factory=dict)
    grid: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"command: unknown {self.command!r}; choose from {', '.join(COMMANDS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed: expected an integer in [0, 2^64)")
        if not isinstance(self.budget, int) or isinstance(self.budget, bool) or self.budget < 1:
            raise ValidationError("budget: expected a positive integer")
        if self.grid is not None and (not isinstance(self.grid, int) or self.grid < 2):
            raise ValidationError("grid: expected an integer >= 2")
        try:
            self.tol = DEFAULT.with_overrides(self.tolerances)
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"tolerances: {exc}") from None

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config: expected an object")
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"config: unknown fields {sorted(extra)}")
        if "command" not in doc:
            raise ValidationError("config.command: required")
        return cls(**doc)


# --- JSON helpers -------------------------------------------------------------


def _load_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"{what}: cannot read {path}: {exc.strerror}") from None
    if not text.strip():
        raise ValidationError(f"{what}: {path} is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{what}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _plain(obj):
    """Convert results to JSON-ready values (complex -> [re, im], matrices -> matrix JSON)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return mc.matrix_to_json(obj)
        return [_plain(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _complex(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise SchemaError(path, "expected a number or [re, im]")


def _poly(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of coefficients (ascending)")
    return np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _grid(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise SchemaError(path, "expected a d x d nested list of matrices")
    d = len(value)
    if any(len(r) != d for r in value):
        raise SchemaError(path, "grid must be square")
    mats = [[mc.matrix_from_json(m, f"{path}[{i}][{j}]") for j, m in enumerate(r)] for i, r in enumerate(value)]
    return np.array(mats)


def _require(doc: dict, key: str, path: str = "input"):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "required")
    return doc[key]


def _number(doc: dict, key: str, default, kind=float, path: str = "input"):
    value = doc.get(key, default)
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    if not ok:
        raise SchemaError(f"{path}.{key}", f"expected {kind.__name__}")
    return kind(value)


def _map(doc: dict, cfg: ExperimentConfig) -> CBLinearMap:
    """A map from ``map`` (explicit JSON) or ``family`` (seeded random isomorphism)."""
    if "map" in doc:
        return CBLinearMap.from_json(doc["map"], "input.map", cfg.tol)
    if "family" in doc:
        fam = doc["family"]
        if not isinstance(fam, dict):
            raise SchemaError("input.family", "expected an object")
        kind = fam.get("kind")
        if kind is not None and kind not in families.KINDS:
            raise SchemaError("input.family.kind", f"choose from {families.KINDS}")
        index = _number(fam, "index", 0, int, "input.family")
        return families.random_isomorphism(rng_for(cfg.seed, 1, index), kind)
    if doc.get("scene"):
        return cx.build_scene().Psi
    raise SchemaError("input", "expected one of map, family, scene")


# --- commands -----------------------------------------------------------------


def _cmd_cbnorm(doc, cfg):
    f = _map(doc, cfg)
    level = doc.get("level")
    if level is not None and (not isinstance(level, int) or level < 1):
        raise SchemaError("input.level", "expected a positive integer")
    est = cb_norm_estimate(f, cfg.budget, cfg.seed, level)
    summary = f"cb norm >= {est.lower:.12g} (level {est.level_used}, budget {cfg.budget})"
    return {"lower": est.lower, "level_used": est.level_used, "restart_values": est.restart_values, "witness": list(est.witness)}, summary


def _cmd_paulsen(doc, cfg):
    f = _map(doc, cfg)
    r = sim.paulsen_step(f, cfg.budget, cfg.seed, cfg.tol)
    summary = f"kappa(X) = {r.kappa:.12g}, target cb = {r.target_cb:.12g}, verified ratio {r.achieved_cb_bound:.12g}"
    return {"X": r.X, "kappa": r.kappa, "target_cb": r.target_cb, "achieved_cb_bound": r.achieved_cb_bound}, summary


def _cmd_iterate(doc, cfg):
    f = _map(doc, cfg)
    n_max = _number(doc, "n_max", 3, int)
    if "probes" in doc:
        if not isinstance(doc["probes"], list) or not doc["probes"]:
            raise SchemaError("input.probes", "expected a non-empty list of grids")
        probes = [_grid(p, f"input.probes[{i}]") for i, p in enumerate(doc["probes"])]
    else:
        probes = families.random_probes(f.domain, rng_for(cfg.seed, 2), _number(doc, "probe_count", 5, int))
    tr = sim.iterate_xy(f, probes, n_max, cfg.seed, cfg.budget, grid_size=cfg.grid or sim.DISC_GRID, tol=cfg.tol)
    viol = tr.chain_violation()
    result = {
        "chain": tr.chain,
        "chain_violation": viol,
        "chain_ok": viol <= cfg.tol.chain,
        "f_grid_violation": tr.f_grid_violation(),
        "kappas": [s.kappa for s in tr.steps],
        "X_seq": tr.X_seq,
        "Y_seq": tr.Y_seq,
    }
    return result, f"{n_max} rounds, chain violation {viol:.3e}"


def _scene_elements():
    return [cx.corner(cx._e(0, 0)), cx.corner(cx._e(0, 1)), cx.element(0.5, [[1, 1], [0, 0]])]


def _cmd_almost_isometric(doc, cfg):
    f = _map(doc, cfg)
    eps = _number(doc, "epsilon", 0.25)
    if not eps > 0:
        raise SchemaError("input.epsilon", "must be positive")
    if "elements" in doc:
        if not isinstance(doc["elements"], list) or not doc["elements"]:
            raise SchemaError("input.elements", "expected a non-empty list of matrices")
        elems = [mc.matrix_from_json(m, f"input.elements[{i}]") for i, m in enumerate(doc["elements"])]
        for i, a in enumerate(elems):
            if not f.domain.contains(a):
                raise SchemaError(f"input.elements[{i}]", "not in the domain algebra")
    elif doc.get("scene"):
        elems = _scene_elements()
    else:
        raise SchemaError("input.elements", "required unless scene is set")
    rep = sim.almost_isometric(f, elems, eps, cfg.seed, cfg.budget, cfg.grid or sim.DISC_GRID, tol=cfg.tol)
    result = rep.to_json()
    result["bound_holds"] = rep.bound_holds(f, elems, cfg.tol.bound)
    result["sigma_ok"] = rep.sigma < 1 + eps
    return result, f"N = {rep.N}, delta = {rep.delta:g}, bound factor {rep.bound_factor:.6g} ({rep.branch})"


def _cmd_counterexample(doc, cfg):
    if not isinstance(doc, dict):
        raise SchemaError("input", "expected an object")
    scene = cx.build_scene()
    grid = cfg.grid or _number(doc, "grid_density", 16, int)
    cap = _number(doc, "kappa_cap", 10.0)
    eye = np.eye(2)
    result = {
        "scene_hash": scene.scene_hash(),
        "identity_defect": cx.isometry_defect(scene, grid_density=grid),
        "identity_defect_at_1_1": cx.defect_at(eye, eye, eye, eye, 1.0, 1.0),
    }
    summary = f"identity defect {result['identity_defect']:.6g}"
    if doc.get("minimize", True):
        res = cx.defect_minimize(scene, cap, cfg.budget, cfg.seed, grid)
        result.update(
            best_defect=res.best_defect,
            best_candidates=list(res.best_candidates),
            kappa_cap=res.kappa_cap,
            grid_density=res.grid_density,
            restart_values=res.restart_values,
        )
        summary += f", best defect {res.best_defect:.6g} (kappa cap {cap:g}, budget {cfg.budget})"
    return result, summary


def _theta(doc) -> ms.BlaschkeProduct:
    return ms.BlaschkeProduct.from_json(_require(doc, "theta"), "input.theta")


def _test_polys(doc, n):
    if "polynomials" in doc:
        if not isinstance(doc["polynomials"], list) or not doc["polynomials"]:
            raise SchemaError("input.polynomials", "expected a non-empty list")
        return [_poly(p, f"input.polynomials[{i}]") for i, p in enumerate(doc["polynomials"])]
    return [np.eye(n + 1)[k].astype(complex) for k in range(n + 1)]


def _cmd_model(doc, cfg):
    theta = _theta(doc)
    model = ms.model_operator(theta, cfg.tol)
    ev = mc.eigenvalues(model.S)
    polys = _test_polys(doc, theta.degree)
    rows = []
    for p in polys:
        up = ms.functional_calculus(p, model)
        spec = ms.spectrum_quotient(p, theta, cfg.tol)
        rows.append(
            {
                "coefficients": list(p),
                "norm": mc.op_norm(up),
                "spectral_radius": max(abs(v) for v in spec),
                "spectrum": spec,
                "quasinilpotent": max(abs(v) for v in spec) <= cfg.tol.quasinilpotent,
            }
        )
    witness = ms.quasinilpotent_witness(theta)
    result = {
        "S": model.S,
        "norm_S": mc.op_norm(model.S),
        "gram_condition": model.gram_condition,
        "eigenvalues": list(ev),
        "theta_of_S": mc.op_norm(ms.functional_calculus(theta, model)),
        "polynomials": rows,
        "quasinilpotent_witness": None if witness is None else {
            "coefficients": list(witness),
            "norm": mc.op_norm(ms.functional_calculus(witness, model)),
        },
    }
    table = [
        {"index": k, "root_re": lam.real, "root_im": lam.imag, "eigenvalue_re": e.real, "eigenvalue_im": e.imag}
        for k, (lam, e) in enumerate(zip(theta.sequence, np.diag(model.S)))
    ]
    return result, f"N = {model.N}, ||S|| = {result['norm_S']:.12g}, ||theta(S)|| = {result['theta_of_S']:.3e}", table


def _cmd_carleson(doc, cfg):
    theta = _theta(doc)
    try:
        delta = ms.carleson_delta(theta)
        vas = ms.vasyunin_similarity(theta, cfg.tol)
    except RepeatedRootError as exc:
        raise SchemaError("input.theta.roots", str(exc)) from None
    polys = _test_polys(doc, theta.degree)
    checks = []
    for d in (1, 2, 3):
        rng = rng_for(cfg.seed, 3, d)
        for trial in range(3):
            grid = [[polys[int(rng.integers(len(polys)))] * complex(*rng.normal(size=2)) for _ in range(d)] for _ in range(d)]
            sw = ms.sandwich(theta, grid, 1e-6, cfg.tol)
            checks.append({"level": d, "trial": trial, "lower": sw.lower, "middle": sw.middle, "upper": sw.upper, "holds": sw.holds})
    reduced = ms.reduced_product_checks(theta, cfg.tol)
    bounds = ms.eval_map_bounds(polys[min(1, len(polys) - 1)], theta, cfg.budget, cfg.seed, cfg.tol)
    result = {
        "carleson_delta": delta,
        "vasyunin_kappa": vas.kappa,
        "delta_bound": vas.delta_bound,
        "similarity_residual": vas.residual,
        "V": vas.V,
        "sandwich": checks,
        "sandwich_ok": all(c["holds"] for c in checks),
        "reduced_products": reduced,
        "eval_map": {
            "sup_values": bounds.sup_values,
            "quotient": bounds.quotient,
            "ratio": bounds.ratio,
            "inverse_cb": bounds.inverse_cb,
            "checks": bounds.checks,
        },
    }
    table = [dict(row, delta=delta, vasyunin_kappa=vas.kappa) for row in ms.carleson_table(theta)]
    return result, f"carleson delta {delta:.12g}, vasyunin kappa {vas.kappa:.12g}", table


def _algebra(value, n: int) -> OperatorSubspace:
    if value in (None, "full"):
        return OperatorSubspace.full(n)
    if value == "scalars":
        return OperatorSubspace.scalars(n)
    if value == "diagonal":
        return OperatorSubspace.diagonal(n)
    if isinstance(value, dict):
        space = OperatorSubspace.from_json(value, "input.algebra")
        if not space.is_unital_algebra:
            raise SchemaError("input.algebra", "must be a unital algebra")
        return space
    raise SchemaError("input.algebra", "expected full, scalars, diagonal or a subspace object")


def _cmd_clbp(doc, cfg):
    x = mc.matrix_from_json(_require(doc, "X"), "input.X")
    if x.shape[0] != x.shape[1]:
        raise SchemaError("input.X", "must be square")
    try:
        mc.check_invertible(x)
    except mc.SingularityError:
        raise SchemaError("input.X", "must be invertible") from None
    alg = _algebra(doc.get("algebra"), x.shape[0])
    r = sim.clbp_defect(x, alg, cfg.budget, cfg.seed)
    return {"ratio": r.ratio, "cb_estimate": r.cb_est, "kappa": r.kappa}, f"cb/kappa = {r.ratio:.12g}"


HANDLERS = {
    "cbnorm": _cmd_cbnorm,
    "paulsen": _cmd_paulsen,
    "iterate": _cmd_iterate,
    "almost-isometric": _cmd_almost_isometric,
    "counterexample": _cmd_counterexample,
    "model": _cmd_model,
    "carleson": _cmd_carleson,
    "clbp": _cmd_clbp,
}


# --- driver -------------------------------------------------------------------


def _versions() -> dict:
    out = {"cbiso": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "clarabel"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _write_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})


def run(cfg: ExperimentConfig) -> tuple[int, str]:
    """Execute one experiment; returns ``(exit status, one-line summary)``."""
    start = time.perf_counter()
    try:
        doc = _load_json(cfg.input_path, "input") if cfg.input_path else {}
        out = HANDLERS[cfg.command](doc, cfg)
    except ValidationError as exc:
        return EXIT_INVALID, f"error: {exc}"
    except (SchemaError, NotInSpanError, mc.DimensionError) as exc:
        return EXIT_INVALID, f"error: {exc}"
    except (OptimizerFailure, ConvergenceError, ConditioningError, mc.SingularityError) as exc:
        return EXIT_ENGINE, f"engine error: {type(exc).__name__}: {exc}"
    except ValueError as exc:
        return EXIT_INVALID, f"error: {exc}"
    result, summary = out[0], out[1]
    table = out[2] if len(out) > 2 else None
    report = {
        "command": cfg.command,
        "input": doc,
        "seed": cfg.seed,
        "budget": cfg.budget,
        "grid": cfg.grid,
        "versions": _versions(),
        "tolerances": cfg.tol.as_dict(),
        "result": _plain(result),
        "timing": {"wall_seconds": time.perf_counter() - start},
    }
    path = Path(cfg.output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if table:
        _write_csv(path.with_suffix(".csv"), table)
    return EXIT_OK, summary


def _parse_tol(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--tol expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"--tol {name}: {value!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbiso", description="Similarity and cb-norm experiments for small operator algebras.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON file mirroring the experiment config")
    p.add_argument("--input", help="input JSON document")
    p.add_argument("--output", help="report path (default report.json)")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help=f"tolerance override (>= {MIN_TOLERANCE:g}); repeatable")
    p.add_argument("--grid", type=int)
    return p


def config_from_args(args) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        base = _load_json(args.config, "config")
        if not isinstance(base, dict):
            raise ValidationError("config: expected an object")
    overrides = {
        "command": args.command,
        "input_path": args.input,
        "output_path": args.output,
        "seed": args.seed,
        "budget": args.budget,
        "grid": args.grid,
    }
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    tol = dict(merged.get("tolerances") or {})
    tol.update(_parse_tol(args.tol))
    merged["tolerances"] = tol
    if "command" not in merged:
        raise ValidationError("command: required (positional or in --config)")
    return ExperimentConfig.from_json(merged)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValidationError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status, summary = run(cfg)
    print(summary, file=sys.stdout if status == EXIT_OK else sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
