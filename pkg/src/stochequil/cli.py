"""Batch front end: read experiment configs, run them, write CSV + manifest.

Each run produces two files in the output directory: ``<basename>.csv``
with the experiment's results table and ``<basename>_manifest.json``
echoing the effective configuration (after command-line overrides), the
seed, the experiment kind, the wall time, and any warnings.  Re-running a
config with the same seed reproduces the CSV byte for byte.

Exit status: 0 on success, 2 on a configuration/validation error (the
message names the offending field with a dotted path), 3 on a numerical
failure such as an impossible equilibrium price.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import jsonschema
import numpy as np

from .canonical import canonical_expectation, make_canonical
from .entropy import entropy, solve_conjugate
from .equilibrium import SurvivalSpec, expected_equilibrium, expected_equilibrium_result
from .errors import NotOnSimplex, NotPossibleEquilibriumPrice, StochequilError
from .idealgas import GasSpec, box_quadrature, gas_cgf_fixture, gas_entropy, gas_internal_energy, gas_partition
from .model import (
    Discrete,
    EconomyModel,
    Price,
    STRUCTURE_REGISTRY,
    make_cd_structure,
    validate_price,
)
from .montecarlo import (
    clt_covariance,
    clt_entropy_approx,
    conditional_empirical,
    conditional_macro_mean,
    importance_probability,
    naive_probability,
)
from .reference import nonsurvival_structure

EXPERIMENT_KINDS = (
    "equilibrium",
    "entropy-sweep",
    "tld-verify",
    "gcp-verify",
    "survival",
    "clt-compare",
    "gas-fixtures",
)

# Subcommand -> experiment kind the config must declare.
SUBCOMMANDS = {
    "equilibrium": "equilibrium",
    "entropy": "entropy-sweep",
    "tld": "tld-verify",
    "gcp": "gcp-verify",
    "survival": "survival",
    "clt": "clt-compare",
    "gas": "gas-fixtures",
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["structure", "n", "micro"],
            "additionalProperties": False,
            "properties": {
                "structure": {"type": "string"},
                "structure_args": {"type": "object"},
                "n": {"type": "integer", "minimum": 1},
                "floor": {"type": "number", "exclusiveMinimum": 0},
                "micro": {
                    "type": "object",
                    "required": ["atoms", "weights"],
                    "additionalProperties": False,
                    "properties": {
                        "atoms": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "array",
                                "minItems": 2,
                                "items": {"type": "number"},
                            },
                        },
                        "weights": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(EXPERIMENT_KINDS)},
                "price": {
                    "type": "array",
                    "minItems": 2,
                    "items": {"type": "number"},
                },
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "replicas": {"type": "integer", "minimum": 1},
                "naive_replicas": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "n_grid": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "integer", "minimum": 1},
                },
                "price_range": {
                    "type": "array",
                    "minItems": 2,
                    "maxItems": 2,
                    "items": {"type": "number"},
                },
                "price_points": {"type": "integer", "minimum": 2},
                "use_importance": {"type": "boolean"},
                "beta_grid": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "gas": {
                    "type": "object",
                    "required": ["m"],
                    "additionalProperties": False,
                    "properties": {
                        "m": {"type": "number", "exclusiveMinimum": 0},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "points_per_dim": {"type": "integer", "minimum": 2},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "basename": {"type": "string"},
            },
        },
    },
}


class _ConfigError(Exception):
    """Validation failure; ``path`` is the dotted config field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _ConfigError("(config)", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise _ConfigError("(config)", f"{path} is not valid JSON: {exc}") from exc


def _schema_check(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        dotted = ".".join(str(part) for part in exc.absolute_path) or "(root)"
        raise _ConfigError(dotted, exc.message) from exc


def _build_model(cfg: dict) -> tuple[EconomyModel, SurvivalSpec | None]:
    if "model" not in cfg:
        raise _ConfigError("model", "section is required for this experiment")
    spec = cfg["model"]
    atoms = np.asarray(spec["micro"]["atoms"], dtype=float)
    weights = np.asarray(spec["micro"]["weights"], dtype=float)
    if atoms.ndim != 2:
        raise _ConfigError("model.micro.atoms", "atoms must all have the same length")
    if atoms.shape[0] != weights.shape[0]:
        raise _ConfigError(
            "model.micro.weights",
            f"{weights.shape[0]} weights for {atoms.shape[0]} atoms",
        )
    if abs(weights.sum() - 1.0) > 1e-9:
        raise _ConfigError(
            "model.micro.weights", f"weights sum to {float(weights.sum())!r}, expected 1"
        )

    name = spec["structure"]
    survival: SurvivalSpec | None = None
    if name in ("cobb_douglas", "survival"):
        if atoms.shape[1] % 2 or atoms.shape[1] < 4:
            raise _ConfigError(
                "model.micro.atoms",
                f"Cobb-Douglas characteristics need even length >= 4, got {atoms.shape[1]}",
            )
        l = atoms.shape[1] // 2 - 1
        structure = make_cd_structure(l, atoms.shape[1])
        if name == "survival":
            if "floor" not in spec:
                raise _ConfigError("model.floor", "survival models need a wealth floor")
            floor = float(spec["floor"])
            survival = SurvivalSpec(wealth_floor=lambda p: floor)
    else:
        factory = STRUCTURE_REGISTRY.get(name)
        if factory is None:
            known = ", ".join(sorted(STRUCTURE_REGISTRY))
            raise _ConfigError(
                "model.structure", f"unknown structure {name!r}; registered: {known}"
            )
        structure = factory(**spec.get("structure_args", {}))
        if structure.m != atoms.shape[1]:
            raise _ConfigError(
                "model.micro.atoms",
                f"structure {name!r} wants characteristics of length {structure.m}, "
                f"got {atoms.shape[1]}",
            )

    try:
        micro = Discrete(atoms, weights)
        model = EconomyModel(structure=structure, micro=micro, n=int(spec["n"]))
    except StochequilError as exc:
        raise _ConfigError("model.micro", str(exc)) from exc
    return model, survival


def _experiment_price(exp: dict, goods: int) -> Price:
    if "price" not in exp:
        raise _ConfigError("experiment.price", "a price is required")
    coords = exp["price"]
    if len(coords) != goods:
        raise _ConfigError(
            "experiment.price", f"expected {goods} coordinates, got {len(coords)}"
        )
    try:
        return validate_price(coords)
    except NotOnSimplex as exc:
        raise _ConfigError("experiment.price", str(exc)) from exc


def _require(exp: dict, field: str):
    if field not in exp:
        raise _ConfigError(f"experiment.{field}", "required for this experiment")
    return exp[field]


def _rate_second_derivative(model: EconomyModel, h: float = 1e-4) -> float:
    """Central second difference of the per-agent rate at p*_e (scalar)."""
    p_e = expected_equilibrium(model)
    center = float(p_e.coords[0])

    def rate(p1: float) -> float:
        return entropy(model, validate_price([p1, 1.0 - p1])).per_agent_rate

    return (rate(center + h) - 2.0 * rate(center) + rate(center - h)) / h**2


# --- experiment runners -------------------------------------------------
# Each returns (fieldnames, rows, warnings, summary line).

def _run_equilibrium(model, survival, exp, args):
    res = expected_equilibrium_result(model)
    goods = res.price.coords.shape[0]
    row = {f"p{j + 1}": float(res.price.coords[j]) for j in range(goods)}
    resid = np.asarray(res.residual, dtype=float)
    row["residual"] = float(np.nanmax(np.abs(resid))) if resid.size else 0.0
    row["method"] = res.method
    row["unique"] = res.unique
    fields = [f"p{j + 1}" for j in range(goods)] + ["residual", "method", "unique"]
    summary = f"p*_e = {np.array2string(res.price.coords, precision=6)} ({res.method})"
    return fields, [row], list(res.warnings), summary


def _run_entropy_sweep(model, survival, exp, args):
    if model.structure.out_dim != 1:
        raise _ConfigError(
            "experiment.kind", "entropy-sweep handles scalar (two-good) models"
        )
    lo, hi = exp.get("price_range", [0.3, 0.7])
    points = exp.get("price_points", 21)
    if not 0.0 < lo < hi < 1.0:
        raise _ConfigError(
            "experiment.price_range", f"need 0 < lo < hi < 1, got [{lo}, {hi}]"
        )
    curvature = _rate_second_derivative(model)
    sigma = np.array([[1.0 / curvature]])
    warnings: list[str] = []
    rows = []
    for p1 in np.linspace(lo, hi, points):
        price = validate_price([p1, 1.0 - p1])
        try:
            rep = entropy(model, price)
        except NotPossibleEquilibriumPrice:
            warnings.append(f"p1={p1!r} is not a possible equilibrium price; skipped")
            continue
        rows.append({
            "p1": float(p1),
            "alpha": float(rep.alpha[0]),
            "log_lambda": float(rep.log_lambda),
            "I": float(rep.total),
            "clt_approx": clt_entropy_approx(model, price, sigma),
        })
    fields = ["p1", "alpha", "log_lambda", "I", "clt_approx"]
    summary = f"{len(rows)} grid points, rate curvature {curvature:.6g} at p*_e"
    return fields, rows, warnings, summary


def _run_tld(model, survival, exp, args):
    price = _experiment_price(exp, model.structure.out_dim + 1)
    delta = float(_require(exp, "delta"))
    n_grid = _require(exp, "n_grid")
    replicas = int(exp.get("replicas", 100_000))
    naive_replicas = int(exp.get("naive_replicas", replicas))
    seed = int(exp.get("seed", 0))
    sol = solve_conjugate(model, price)
    rows = []
    warnings: list[str] = []
    for n in sorted(n_grid):
        model_n = dataclasses.replace(model, n=n)
        nv = naive_probability(
            model_n, price, delta, naive_replicas, seed, threads=args.threads
        )
        iv = importance_probability(
            model_n, price, delta, replicas, seed, threads=args.threads
        )
        if nv.zero_hits:
            warnings.append(f"n={n}: naive estimator saw no hits")
        gap = abs(-iv.log_value / n + sol.log_lambda_min)
        rows.append({
            "n": n,
            "log_p_naive": nv.log_value,
            "log_p_importance": iv.log_value,
            "rate_gap": gap,
            "std_err": iv.std_error,
        })
    fields = ["n", "log_p_naive", "log_p_importance", "rate_gap", "std_err"]
    summary = f"rate gap {rows[-1]['rate_gap']:.3e} at n={rows[-1]['n']}"
    return fields, rows, warnings, summary


def _run_gcp(model, survival, exp, args):
    price = _experiment_price(exp, model.structure.out_dim + 1)
    delta = float(_require(exp, "delta"))
    replicas = int(exp.get("replicas", 100_000))
    seed = int(exp.get("seed", 0))
    use_importance = bool(exp.get("use_importance", True))
    canon = make_canonical(model, price)
    emp = conditional_empirical(
        model, price, delta, replicas, seed,
        use_importance=use_importance, threads=args.threads,
    )
    tv = 0.5 * float(np.abs(canon.weights - emp.frequencies).sum())
    rows = [
        {
            "atom": k,
            "canonical": float(canon.weights[k]),
            "empirical": float(emp.frequencies[k]),
            "tv": tv,
        }
        for k in range(canon.weights.shape[0])
    ]
    fields = ["atom", "canonical", "empirical", "tv"]
    summary = f"TV(conditional, canonical) = {tv:.4f} from {emp.accepted} accepted"
    return fields, rows, [], summary


def _run_survival(model, survival, exp, args):
    if survival is None:
        raise _ConfigError(
            "model.structure", "survival experiments need structure 'survival'"
        )
    price = _experiment_price(exp, model.structure.out_dim + 1)
    delta = float(_require(exp, "delta"))
    replicas = int(exp.get("replicas", 100_000))
    seed = int(exp.get("seed", 0))
    x = nonsurvival_structure(survival, goods=model.structure.out_dim + 1)
    canon = make_canonical(model, price)
    prob = canonical_expectation(
        canon, lambda theta: x.eval(theta[None, :], price.coords)[0, 0]
    )
    cond = conditional_macro_mean(
        model, price, delta, x, replicas, seed, threads=args.threads
    )
    z = (cond.value - prob) / cond.std_error if cond.std_error > 0 else 0.0
    rows = [{
        "p1": float(price.coords[0]),
        "canonical_nonsurvival": float(prob),
        "conditional_mean": cond.value,
        "std_error": cond.std_error,
        "z": z,
    }]
    fields = ["p1", "canonical_nonsurvival", "conditional_mean", "std_error", "z"]
    summary = (
        f"conditional {cond.value:.4f} vs canonical {prob:.4f} (z = {z:+.2f})"
    )
    return fields, rows, [], summary


def _run_clt(model, survival, exp, args):
    if model.structure.out_dim != 1:
        raise _ConfigError(
            "experiment.kind", "clt-compare handles scalar (two-good) models"
        )
    n_grid = _require(exp, "n_grid")
    replicas = int(exp.get("replicas", 10_000))
    seed = int(exp.get("seed", 0))
    trend = clt_covariance(model, n_grid, replicas, seed, threads=args.threads)
    curvature = _rate_second_derivative(model)
    rows = []
    for n in sorted(trend.per_n):
        sigma2 = float(trend.per_n[n][0, 0])
        rows.append({
            "n": n,
            "sigma2": sigma2,
            "rate_curvature": curvature,
            "product": curvature * sigma2,
        })
    fields = ["n", "sigma2", "rate_curvature", "product"]
    warnings = []
    if trend.dropped:
        warnings.append(f"{trend.dropped} replicas without an equilibrium dropped")
    summary = f"curvature * sigma2 = {rows[-1]['product']:.4f} at n={rows[-1]['n']}"
    return fields, rows, warnings, summary


def _run_gas(model, survival, exp, args):
    gas = _require(exp, "gas")
    mass = float(gas["m"])
    n = model.n if model is not None else 1
    betas = exp.get("beta_grid", [0.5, 1.0, 2.0])
    points = int(gas.get("points_per_dim", 48))
    rows = []
    for beta in betas:
        spec = GasSpec(m=mass, n=n, beta=float(beta))
        radius = float(gas.get("radius", 10.0 * np.sqrt(mass / beta)))
        fix = gas_cgf_fixture(spec, box_quadrature(radius, points))
        ent = gas_entropy(spec)
        rows.append({
            "beta": float(beta),
            "log_lambda": gas_partition(spec),
            "log_lambda_quad": float(fix.log_lambda),
            "energy": gas_internal_energy(spec),
            "entropy_closed": ent.closed_form,
            "entropy_partition": ent.from_partition,
        })
    fields = [
        "beta", "log_lambda", "log_lambda_quad",
        "energy", "entropy_closed", "entropy_partition",
    ]
    worst = max(abs(r["log_lambda"] - r["log_lambda_quad"]) for r in rows)
    summary = f"{len(rows)} temperatures, worst quadrature error {worst:.2e}"
    return fields, rows, [], summary


_RUNNERS = {
    "equilibrium": _run_equilibrium,
    "entropy-sweep": _run_entropy_sweep,
    "tld-verify": _run_tld,
    "gcp-verify": _run_gcp,
    "survival": _run_survival,
    "clt-compare": _run_clt,
    "gas-fixtures": _run_gas,
}

_MODEL_FREE = {"gas-fixtures"}


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path: str, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_format_cell(row[f]) for f in fields])


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = json.loads(json.dumps(cfg))  # deep copy; manifest echoes this
    exp = cfg.setdefault("experiment", {})
    if args.seed is not None:
        exp["seed"] = args.seed
    if args.replicas is not None:
        exp["replicas"] = args.replicas
    if args.out is not None:
        cfg.setdefault("output", {})["directory"] = args.out
    return cfg


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochequil",
        description="Random-equilibrium entropy experiments: run a config, "
        "write a CSV results table and a JSON manifest.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    common.add_argument(
        "--replicas", type=int, default=None, help="override experiment.replicas"
    )
    common.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1,
        help="worker threads (results do not depend on this)",
    )
    common.add_argument("--out", default=None, help="override output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run a {SUBCOMMANDS[name]} config")
    sub.add_parser("validate", parents=[common], help="check a config and exit")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        _schema_check(cfg)
        cfg = _apply_overrides(cfg, args)
        kind = cfg["experiment"]["kind"]

        if args.command == "validate":
            if "model" in cfg or kind not in _MODEL_FREE:
                _build_model(cfg)
            if not args.quiet:
                print(f"{args.config}: ok ({kind})")
            return 0

        wanted = SUBCOMMANDS[args.command]
        if kind != wanted:
            raise _ConfigError(
                "experiment.kind", f"subcommand {args.command!r} runs {wanted!r} "
                f"configs, got {kind!r}"
            )
        if kind in _MODEL_FREE and "model" not in cfg:
            model, survival = None, None
        else:
            model, survival = _build_model(cfg)
    except _ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2

    out_cfg = cfg.get("output", {})
    out_dir = out_cfg.get("directory", ".")
    basename = out_cfg.get("basename", kind)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{basename}.csv")
    manifest_path = os.path.join(out_dir, f"{basename}_manifest.json")

    start = time.perf_counter()
    try:
        fields, rows, warnings, summary = _RUNNERS[kind](
            model, survival, cfg["experiment"], args
        )
    except _ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2
    except StochequilError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    elapsed = time.perf_counter() - start

    _write_csv(csv_path, fields, rows)
    manifest = {
        "config": cfg,
        "seed": cfg["experiment"].get("seed"),
        "experiment": kind,
        "runtime_seconds": elapsed,
        "warnings": warnings,
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not args.quiet:
        print(summary)
        print(f"wrote {csv_path} ({len(rows)} rows) in {elapsed:.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
