"""Command-line front end.

Commands: ``check-equiv``, ``solve``, ``lqs``, ``matrix``, ``table``,
``delta`` and ``dual``. Human-readable text goes to standard output; ``--json
PATH`` also writes a machine report. Exit codes: 0 success, 2 usage or schema
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from .discrepancy import delta, delta_oracle
from .lqs import (
    LqsProblem,
    RobustSpec,
    lqs_mio,
    lqs_oracle,
    robust_lqs_grid_oracle,
    sampled_adversary_audit,
)
from .matrix_reg import (
    ColumnWiseBalls,
    CompletionProblem,
    InducedMaps,
    apply_map,
    matrix_classify,
    matrix_worst_case,
    mc_nuclear_solve,
    pca_truncate,
    robust_pca_solve,
    sample_induced_map,
)
from .norms import (
    INF,
    FrobeniusP,
    Induced,
    ProjectedF2,
    RowWise,
    SchattenP,
    check_exponent,
    dual_exponent,
    dual_witness,
    mat_norm,
    spec_label,
    vec_norm,
)
from .robustify import (
    UncertaintySet,
    ascent_worst_case,
    classify_equivalence,
    equivalence_probe,
)
from .solvers import RegressionProblem, robust_objective_audit, solve_regularized, solve_robust

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


# --- serialization ------------------------------------------------------------

def _num(x):
    x = float(x)
    if math.isfinite(x):
        return format(x, ".17g")
    return json.dumps("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def to_json(obj, indent=0, step=2) -> str:
    """JSON text with floats at 17 significant digits and stable key order."""
    pad, inner = " " * indent, " " * (indent + step)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + step, step)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [inner + to_json(v, indent + step, step) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return json.dumps(str(obj))


def _versions():
    out = {}
    for pkg in ("robreg", "numpy", "scipy", "cvxpy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _envelope(args, command):
    return {
        "command": command,
        "seed": args.seed,
        "workers": args.workers,
        "tolerance": args.tol,
        "versions": _versions(),
    }


# --- argument helpers -----------------------------------------------------------

def parse_exponent(text) -> float:
    s = str(text).strip().lower()
    try:
        p = INF if s in ("inf", "infinity") else float(s)
        return check_exponent(p)
    except ValueError as exc:
        raise UsageError(f"bad exponent {text!r}: {exc}") from None


def parse_set(text):
    """``frob:q``, ``schatten:q``, ``induced:h,g`` or ``rowwise:q``."""
    kind, _, rest = text.partition(":")
    vals = [parse_exponent(v) for v in rest.split(",")] if rest else []
    if kind == "frob" and len(vals) == 1:
        return FrobeniusP(vals[0])
    if kind == "schatten" and len(vals) == 1:
        return SchattenP(vals[0])
    if kind == "induced" and len(vals) == 2:
        return Induced(*vals)
    if kind == "rowwise" and len(vals) == 1:
        return RowWise(vals[0])
    raise UsageError(f"bad set {text!r}; expected frob:q, schatten:q, induced:h,g or rowwise:q")


def _exp_str(p):
    return "inf" if p == INF else format(p, "g")


@contextmanager
def _mapper(workers):
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield lambda f, *its: pool.map(f, *its, chunksize=8)


# --- problem files ----------------------------------------------------------------

_EXP = {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]}
_MAT = {"anyOf": [
    {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}},
    {"type": "string"},
]}
_VEC = {"anyOf": [{"type": "array", "minItems": 1, "items": {"type": "number"}}, {"type": "string"}]}
_MASK = {"anyOf": [
    {"type": "array", "items": {"type": "array", "items": {"type": ["number", "boolean"]}}},
    {"type": "string"},
]}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["task"],
    "additionalProperties": False,
    "properties": {
        "task": {"enum": ["regression", "lqs", "completion", "pca", "robust_pca"]},
        "X": _MAT,
        "Y": _MAT,
        "y": _VEC,
        "mask": _MASK,
        "loss_p": _EXP,
        "uncertainty": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shape": {"enum": ["frob", "schatten", "induced", "rowwise"]},
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "q": _EXP, "r": _EXP, "h": _EXP, "g": _EXP, "phi": _EXP, "psi": _EXP,
            },
            "required": ["lambda"],
        },
        "regularizer": {
            "type": "object",
            "additionalProperties": False,
            "required": ["coefficient"],
            "properties": {
                "coefficient": {"type": "number", "minimum": 0},
                "exponent": _EXP,
                "squared": {"type": "boolean"},
            },
        },
        "q": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 0},
        "lambda": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
    },
    "allOf": [
        {"if": {"properties": {"task": {"const": "regression"}}},
         "then": {"required": ["X", "y"], "oneOf": [{"required": ["uncertainty"]}, {"required": ["regularizer"]}]}},
        {"if": {"properties": {"task": {"const": "lqs"}}}, "then": {"required": ["X", "y", "q"]}},
        {"if": {"properties": {"task": {"const": "completion"}}}, "then": {"required": ["Y", "mask", "lambda"]}},
        {"if": {"properties": {"task": {"const": "pca"}}}, "then": {"required": ["Y", "k"]}},
        {"if": {"properties": {"task": {"const": "robust_pca"}}}, "then": {"required": ["Y", "lambda"]}},
    ],
}


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} in problem file")


def load_problem(path):
    """Read, parse and schema-validate a problem file; raises ``UsageError``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"), parse_constant=_reject_constant)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"schema violation in {path}: {exc.message}") from None
    doc["_base"] = path.parent
    return doc


def _array(doc, key, ndim):
    val = doc[key]
    if isinstance(val, str):
        src = Path(val)
        if not src.is_absolute():
            src = doc["_base"] / src
        try:
            arr = np.loadtxt(src, delimiter=",", ndmin=ndim, dtype=float)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {key} from {src}: {exc}") from None
    else:
        try:
            arr = np.array(val, dtype=float)
        except ValueError:
            raise UsageError(f"{key} is not a rectangular array") from None
    if ndim == 1:
        arr = arr.ravel()
    if arr.ndim != ndim:
        raise UsageError(f"{key} must be {ndim}-dimensional")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{key} contains non-finite values")
    return arr


def _exp(doc, key, default):
    return parse_exponent(doc.get(key, default))


def _uncertainty_set(desc, m, n):
    shape = desc.get("shape")
    if shape is None:
        raise UsageError("regression uncertainty needs a shape")
    if shape == "induced":
        h = _exp(desc, "h", desc.get("q", 2))
        g = _exp(desc, "g", desc.get("r", 2))
        spec = Induced(h, g)
    elif shape == "frob":
        spec = FrobeniusP(_exp(desc, "q", 2))
    elif shape == "schatten":
        spec = SchattenP(_exp(desc, "q", 2))
    else:
        spec = RowWise(_exp(desc, "q", 2))
    return UncertaintySet(spec, float(desc["lambda"]), m, n)


def _expect_task(doc, tasks):
    if doc["task"] not in tasks:
        raise UsageError(f"task {doc['task']!r} is not handled by this command")


# --- commands -------------------------------------------------------------------------

def _verdict_dict(v):
    return {
        "status": v.status,
        "coefficient": v.coefficient,
        "exponent": _exp_str(v.exponent),
        "lower_coefficient": v.lower_coefficient,
        "upper_coefficient": v.upper_coefficient,
    }


def _empirical_status(probe, tol, threshold=1e-6):
    if probe.sandwich_violations:
        return "Violated"
    if max(abs(probe.min_gap), abs(probe.max_gap)) <= tol:
        return "Exact"
    if probe.max_gap > threshold:
        return "BoundsOnly"
    return "Inconclusive"


def cmd_check_equiv(args):
    p = parse_exponent(args.loss)
    spec = parse_set(args.set)
    if args.m < 1 or args.n < 1 or args.trials < 1:
        raise UsageError("m, n and trials must be positive")
    U = UncertaintySet(spec, args.lam, args.m, args.n)
    verdict = classify_equivalence(p, U)
    with _mapper(args.workers) as mp:
        probe = equivalence_probe(p, U, args.trials, seed=args.seed, map_fn=mp)
    status = _empirical_status(probe, args.tol)
    match = status == verdict.status
    report = _envelope(args, "check-equiv")
    report.update({
        "loss_p": _exp_str(p), "set": spec_label(spec), "m": args.m, "n": args.n, "lambda": args.lam,
        "verdict": _verdict_dict(verdict),
        "probe": {
            "trials": probe.trials, "fraction_strict": probe.fraction_strict,
            "min_gap": probe.min_gap, "max_gap": probe.max_gap,
            "sandwich_violations": probe.sandwich_violations,
        },
        "empirical_status": status, "match": match,
    })
    lines = [
        f"loss l_{_exp_str(p)}, {U.label()}, m={args.m}, n={args.n}",
        f"verdict: {verdict.status}  h_bar = {verdict.coefficient:.6g} * ‖beta‖_{_exp_str(verdict.exponent)}",
        f"lower coefficient: {verdict.lower_coefficient:.6g}",
        f"trials: {probe.trials}  max gap: {probe.max_gap:.3e}  min gap: {probe.min_gap:.3e}",
        f"strict fraction: {probe.fraction_strict:.4g}  sandwich violations: {probe.sandwich_violations}",
        f"empirical: {status} ({'matches' if match else 'DOES NOT MATCH'} the classifier)",
    ]
    return report, lines, EXIT_OK if match else EXIT_NUMERIC


def cmd_solve(args):
    doc = load_problem(args.problem)
    _expect_task(doc, ("regression",))
    X, y = _array(doc, "X", 2), _array(doc, "y", 1)
    p = _exp(doc, "loss_p", 2)
    try:
        prob = RegressionProblem(X, y, p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    m, n = prob.shape
    report = _envelope(args, "solve")
    report.update({"task": "regression", "m": m, "n": n, "loss_p": _exp_str(p)})
    lines = [f"regression, m={m}, n={n}, loss l_{_exp_str(p)}"]
    if "uncertainty" in doc:
        U = _uncertainty_set(doc["uncertainty"], m, n)
        verdict = classify_equivalence(p, U)
        res = solve_robust(prob, U)
        report.update({"mode": "robust", "set": spec_label(U.shape), "lambda": U.radius,
                       "verdict": _verdict_dict(verdict)})
        lines.append(f"robust over {U.label()}: {verdict.status}")
    else:
        reg = doc["regularizer"]
        U = None
        expo = _exp(reg, "exponent", 1)
        res = solve_regularized(prob, float(reg["coefficient"]), expo, squared=bool(reg.get("squared", False)))
        report.update({"mode": "regularized", "coefficient": reg["coefficient"], "exponent": _exp_str(expo)})
        lines.append(f"regularized: {reg['coefficient']} * ‖beta‖_{_exp_str(expo)}")
    report.update({
        "beta": res.beta, "objective": res.objective, "bracket": res.bracket,
        "iterations": res.iterations, "converged": res.converged, "certificate": res.certificate,
    })
    lines.append(f"objective: {res.objective:.12g}")
    if res.bracket is not None:
        lines.append(f"bracket: [{res.bracket[0]:.12g}, {res.bracket[1]:.12g}]")
    lines.append("beta: " + " ".join(f"{b:.10g}" for b in res.beta))
    lines.append(f"certificate: {res.certificate:.3e}  converged: {res.converged}")
    if U is not None and args.audit:
        audit = robust_objective_audit(res.beta, prob, U, args.audit, seed=args.seed)
        ok = audit.sampled_max <= audit.analytic * (1 + 1e-9) + 1e-12
        report["audit"] = {"trials": args.audit, "analytic": audit.analytic,
                           "sampled_max": audit.sampled_max, "consistent": ok}
        lines.append(f"audit: sampled max {audit.sampled_max:.12g} <= analytic {audit.analytic:.12g}: {ok}")
        if not ok:
            return report, lines, EXIT_NUMERIC
    if U is not None and args.oracle:
        z = prob.y - prob.X @ res.beta
        phi, psi = U.factors
        rho = U.radius * vec_norm(res.beta, psi)
        val, _ = ascent_worst_case(z, rho, p, dual_exponent(phi), seed=args.seed)
        ok = val <= res.objective * (1 + 1e-9) + 1e-12
        if verdict.exact:
            ok = ok and abs(val - res.objective) <= 1e-6 * max(1.0, res.objective)
        report["oracle"] = {"ascent_worst_case": val, "consistent": ok}
        lines.append(f"oracle: ascent worst case {val:.12g} ({'consistent' if ok else 'INCONSISTENT'})")
        if not ok:
            return report, lines, EXIT_NUMERIC
    return report, lines, EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_lqs(args):
    doc = load_problem(args.problem)
    _expect_task(doc, ("lqs",))
    X, y = _array(doc, "X", 2), _array(doc, "y", 1)
    robust = None
    if "uncertainty" in doc:
        u = doc["uncertainty"]
        try:
            robust = RobustSpec(_exp(u, "phi", "inf"), _exp(u, "psi", 1), float(u["lambda"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        prob = LqsProblem(X, y, doc["q"], robust)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = lqs_mio(prob)
    report = _envelope(args, "lqs")
    report.update({
        "task": "lqs", "m": prob.m, "n": prob.n, "q": prob.q,
        "robust": None if robust is None else {"phi": _exp_str(robust.phi), "psi": _exp_str(robust.psi),
                                                "lambda": robust.lam},
        "beta": res.beta, "value": res.value, "lower_bound": res.lower_bound, "proved_gap": res.proved_gap,
        "nodes": res.nodes, "status": res.status, "approximation_gap": res.approximation_gap, "note": res.note,
    })
    lines = [
        f"lqs, m={prob.m}, n={prob.n}, q={prob.q}, " + ("nominal" if robust is None else
                                                       f"robust phi=l_{_exp_str(robust.phi)} psi=l_{_exp_str(robust.psi)} lambda={robust.lam:g}"),
        f"value: {res.value:.12g}  lower bound: {res.lower_bound:.12g}  nodes: {res.nodes}  status: {res.status}",
        "beta: " + " ".join(f"{b:.10g}" for b in res.beta),
    ]
    if res.note:
        lines.append(f"note: {res.note}")
    code = EXIT_OK if res.status == "optimal" else EXIT_NUMERIC
    if args.oracle:
        try:
            if robust is None:
                _, oval = lqs_oracle(prob)
                kind = "subset enumeration"
            else:
                _, oval = robust_lqs_grid_oracle(prob, seed=args.seed)
                kind = "grid search"
        except ValueError as exc:
            report["oracle"] = {"skipped": str(exc)}
            lines.append(f"oracle skipped: {exc}")
        else:
            ok = res.value <= oval + 1e-6 * max(1.0, abs(oval))
            report["oracle"] = {"method": kind, "value": oval, "consistent": ok}
            lines.append(f"oracle ({kind}): {oval:.12g} ({'consistent' if ok else 'INCONSISTENT'})")
            if not ok:
                code = EXIT_NUMERIC
    if args.audit and robust is not None:
        worst = sampled_adversary_audit(prob, res.beta, args.audit, seed=args.seed)
        ok = worst <= res.value * (1 + 1e-9) + 1e-9
        report["audit"] = {"trials": args.audit, "sampled_max": worst, "consistent": ok}
        lines.append(f"audit: sampled max {worst:.12g} <= value: {ok}")
        if not ok:
            code = EXIT_NUMERIC
    return report, lines, code


def cmd_matrix(args):
    doc = load_problem(args.problem)
    _expect_task(doc, ("completion", "pca", "robust_pca"))
    Y = _array(doc, "Y", 2)
    task = doc["task"]
    report = _envelope(args, "matrix")
    report.update({"task": task, "m": Y.shape[0], "n": Y.shape[1]})
    trials = args.audit if args.audit else 10_000
    if task == "pca":
        k = int(doc["k"])
        if k > min(Y.shape):
            raise UsageError("k exceeds the matrix rank bound")
        X = pca_truncate(Y, k)
        resid = float(np.linalg.norm(Y - X))
        report.update({"k": k, "X": X, "residual_F2": resid})
        return report, [f"pca, rank {k}: residual {resid:.12g}"], EXIT_OK
    lam = float(doc["lambda"])
    if task == "completion":
        mask = _array(doc, "mask", 2) != 0
        if mask.shape != Y.shape:
            raise UsageError("mask shape does not match Y")
        res = mc_nuclear_solve(CompletionProblem(Y, mask, lam), audit_trials=trials, seed=args.seed)
    else:
        if lam <= 0:
            raise UsageError("robust PCA needs lambda > 0")
        res = robust_pca_solve(Y, lam, audit_trials=trials, seed=args.seed)
    ok = res.audit_improvement is not None and res.audit_improvement <= 1e-6
    report.update({
        "lambda": lam, "X": res.X, "objective": res.objective, "iterations": res.iterations,
        "converged": res.converged, "audit_trials": trials, "audit_improvement": res.audit_improvement,
    })
    lines = [
        f"{task}, {Y.shape[0]}x{Y.shape[1]}, lambda={lam:g}",
        f"objective: {res.objective:.12g}  iterations: {res.iterations}  converged: {res.converged}",
        f"descent audit over {trials} directions: best relative improvement {res.audit_improvement:.3e}",
    ]
    return report, lines, EXIT_OK if (res.converged and ok) else EXIT_NUMERIC


def cmd_delta(args):
    a, b = parse_exponent(args.a), parse_exponent(args.b)
    if args.m < 1:
        raise UsageError("m must be positive")
    res = delta(args.m, a, b)
    report = _envelope(args, "delta")
    report.update({"m": args.m, "a": _exp_str(a), "b": _exp_str(b), "value": res.value, "witness": res.witness})
    lines = [f"delta_{args.m}({_exp_str(a)}, {_exp_str(b)}) = {res.value:.17g}"]
    code = EXIT_OK
    if args.oracle:
        ov = delta_oracle(args.m, a, b, seed=args.seed)
        ov = getattr(ov, "value", ov)
        ok = abs(ov - res.value) <= 1e-6 * res.value
        report["oracle"] = {"value": ov, "consistent": ok}
        lines.append(f"oracle: {ov:.17g} ({'consistent' if ok else 'INCONSISTENT'})")
        code = EXIT_OK if ok else EXIT_NUMERIC
    return report, lines, code


def cmd_dual(args):
    p = parse_exponent(args.p)
    ps = dual_exponent(p)
    report = _envelope(args, "dual")
    report.update({"p": _exp_str(p), "dual_exponent": _exp_str(ps)})
    lines = [f"dual exponent of {_exp_str(p)}: {_exp_str(ps)}"]
    if args.vector is not None:
        try:
            x = np.array([float(v) for v in args.vector.split(",")])
        except ValueError:
            raise UsageError(f"bad vector {args.vector!r}") from None
        if not np.any(x):
            raise UsageError("the zero vector has no dual witness")
        w = dual_witness(x, p)
        report.update({"vector": x, "dual_norm": vec_norm(x, ps), "witness": w, "witness_value": float(w @ x)})
        lines.append(f"||x||_{_exp_str(ps)} = {vec_norm(x, ps):.17g}")
        lines.append("witness (unit l_" + _exp_str(p) + "): " + " ".join(f"{v:.10g}" for v in w))
    return report, lines, EXIT_OK


# --- tables -----------------------------------------------------------------------------

_P_GRID = (1.0, 1.5, 2.0, 3.0, INF)


def _stated_rule(row, p, *params):
    if row == "seminorm":
        return True
    if row == "schatten":
        return p in (1, 2, INF)
    if row == "frob":
        return p == params[0] or p in (1, INF)
    if row == "induced":
        return p == params[1] or p in (1, INF)
    if row == "rowwise":
        return p in (1, INF)
    if row == "columnwise":
        return all(p == q for q in params) or p in (1, INF)
    raise KeyError(row)


def _cell(args, mp, p, U, predicted):
    probe = equivalence_probe(p, U, args.trials, seed=args.seed, map_fn=mp)
    status = _empirical_status(probe, args.tol)
    want = "Exact" if predicted else "BoundsOnly"
    return {"p": _exp_str(p), "set": spec_label(U.shape), "predicted": want, "measured": status,
            "max_gap": probe.max_gap, "ok": status == want}


def _linreg_rows(args, mp):
    m, n = args.m, args.n
    rows = []
    cells = [_cell(args, mp, g, UncertaintySet(Induced(h, g), args.lam, m, n), True)
             for h in (1.0, 2.0, INF) for g in _P_GRID]
    rows.append(("seminorm g", "U_(h,g), h a norm", "lam h(beta)", "always", cells))
    cells = [_cell(args, mp, p, UncertaintySet(SchattenP(q), args.lam, m, n), _stated_rule("schatten", p))
             for q in (1.0, 2.0, 3.0) for p in _P_GRID]
    rows.append(("l_p", "U_sigma_q", "lam delta_m(p,2) ‖beta‖_2", "p in {1,2,inf}", cells))
    cells = [_cell(args, mp, p, UncertaintySet(FrobeniusP(q), args.lam, m, n), _stated_rule("frob", p, q))
             for q in _P_GRID for p in _P_GRID]
    rows.append(("l_p", "U_F_q", "lam delta_m(p,q) ‖beta‖_q*", "p = q or p in {1,inf}", cells))
    cells = [_cell(args, mp, p, UncertaintySet(Induced(q, r), args.lam, m, n), _stated_rule("induced", p, q, r))
             for q in (1.0, 2.0, 3.0) for r in (1.5, 2.0, 3.0) for p in _P_GRID]
    rows.append(("l_p", "U_(q,r)", "lam delta_m(p,r) ‖beta‖_q", "p = r or p in {1,inf}", cells))
    cells = [_cell(args, mp, p, UncertaintySet(RowWise(q), args.lam, m, n), _stated_rule("rowwise", p))
             for q in (1.0, 2.0, 3.0) for p in _P_GRID]
    rows.append(("l_p", "rows ‖delta_i‖_q <= lam", "lam m^(1/p) ‖beta‖_q*", "p in {1,inf}", cells))
    return rows


def _induced_matrix_cells(args):
    rng = np.random.default_rng(args.seed)
    m, n = args.m, args.n
    mask = np.ones((m, n), dtype=bool)
    mask[0, 0] = False
    pairs = [(SchattenP(1), ProjectedF2(mask)), (SchattenP(2), FrobeniusP(2)),
             (SchattenP(3), SchattenP(INF)), (FrobeniusP(1), FrobeniusP(1))]
    cells = []
    for h, g in pairs:
        worst = 0.0
        sampled_ok = True
        for _ in range(args.trials):
            lam = float(rng.uniform(0.1, 2.0))
            U = InducedMaps(h, g, lam)
            Y, X = rng.standard_normal((m, n)), rng.standard_normal((m, n))
            wc = matrix_worst_case(Y, X, U, g)
            target = mat_norm(Y - X, g) + lam * mat_norm(X, h)
            attained = mat_norm(Y - X - apply_map(wc.witness, X), g)
            worst = max(worst, abs(attained - target))
            D = sample_induced_map(U, (m, n), rng)
            if mat_norm(Y - X - apply_map(D, X), g) > target * (1 + 1e-9) + 1e-12:
                sampled_ok = False
        status = "Exact" if worst <= args.tol and sampled_ok else "Violated"
        cells.append({"p": spec_label(g), "set": f"({spec_label(h)},{spec_label(g)})", "predicted": "Exact",
                      "measured": status, "max_gap": worst, "ok": status == "Exact"})
    return cells


def _columnwise_cells(args):
    rng = np.random.default_rng(args.seed)
    m, n = args.m, 2
    cells = []
    for qs in ((2.0, 2.0), (1.5, 3.0), (3.0, 3.0)):
        for p in (1.0, 2.0, 3.0, INF):
            U = ColumnWiseBalls(qs, args.lam)
            verdict = matrix_classify(FrobeniusP(p), U)
            gaps = []
            for _ in range(args.trials):
                Z, X = rng.standard_normal((m, n)), rng.standard_normal((m, n))
                wc = matrix_worst_case(Z + X, X, U, FrobeniusP(p))
                gaps.append(vec_norm(Z, p) + verdict.penalty(X) - wc.value)
            gaps = np.array(gaps)
            if gaps.min() < -1e-9 * max(1.0, float(np.abs(gaps).max())):
                status = "Violated"
            elif np.abs(gaps).max() <= args.tol:
                status = "Exact"
            else:
                status = "BoundsOnly"
            want = "Exact" if _stated_rule("columnwise", p, *qs) else "BoundsOnly"
            cells.append({"p": _exp_str(p), "set": "q_j = " + ",".join(_exp_str(q) for q in qs),
                          "predicted": want, "measured": status, "max_gap": float(gaps.max()),
                          "ok": status == want})
    return cells


def _matrix_rows(args, mp):
    mn = args.m * args.n
    rows = [("seminorm g", "U_(h,g), h a norm", "lam h(X)", "always", _induced_matrix_cells(args))]
    cells = [_cell(args, mp, p, UncertaintySet(SchattenP(q), args.lam, mn, mn), _stated_rule("schatten", p))
             for q in (1.0, 2.0, 3.0) for p in _P_GRID]
    rows.append(("F_p", "U_sigma_q", "lam delta_mn(p,2) ‖X‖_F2", "p in {1,2,inf}", cells))
    cells = [_cell(args, mp, p, UncertaintySet(FrobeniusP(q), args.lam, mn, mn), _stated_rule("frob", p, q))
             for q in _P_GRID for p in _P_GRID]
    rows.append(("F_p", "U_F_q", "lam delta_mn(p,q) ‖X‖_F_q*", "p = q or p in {1,inf}", cells))
    rows.append(("F_p", "column-wise, Delta_j in U_F_qj", "lam (sum_j delta_m^p(p,q_j) ‖X_j‖^p)^(1/p)",
                 "(p = q_j for all j) or p in {1,inf}", _columnwise_cells(args)))
    return rows


def cmd_table(args):
    if args.m < 2 or args.n < 1 or args.trials < 1:
        raise UsageError("tables need m >= 2, n >= 1 and trials >= 1")
    with _mapper(args.workers) as mp:
        rows = _linreg_rows(args, mp) if args.which == "linreg" else _matrix_rows(args, mp)
    lines = [
        "| Loss | Uncertainty set | h_bar | Equivalence iff | Verified cells | Result |",
        "|---|---|---|---|---|---|",
    ]
    out_rows = []
    for loss, uset, hbar, rule, cells in rows:
        good = sum(c["ok"] for c in cells)
        bad = [c for c in cells if not c["ok"]]
        result = "ok" if not bad else "FAIL: " + "; ".join(
            f"p={c['p']} {c['set']} measured {c['measured']}" for c in bad)
        lines.append(f"| {loss} | {uset} | {hbar} | {rule} | {good}/{len(cells)} | {result} |")
        out_rows.append({"loss": loss, "set": uset, "h_bar": hbar, "rule": rule, "cells": cells,
                         "verified": good, "total": len(cells)})
    report = _envelope(args, "table")
    report.update({"which": args.which, "m": args.m, "n": args.n, "trials": args.trials, "rows": out_rows})
    return report, lines, EXIT_OK


# --- entry point --------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--workers", type=int, default=1, help="processes for probe trials (default 1)")
    common.add_argument("--tol", type=float, default=1e-8, help="equality tolerance (default 1e-8)")
    common.add_argument("--json", metavar="PATH", help="also write a JSON report")
    common.add_argument("--timing", action="store_true", help="include wall-clock time in the report")

    ap = argparse.ArgumentParser(prog="robreg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-equiv", parents=[common], help="classify and probe a loss/set pair")
    c.add_argument("--loss", required=True, help="loss exponent p (number or inf)")
    c.add_argument("--set", required=True, help="frob:q, schatten:q, induced:h,g or rowwise:q")
    c.add_argument("--m", type=int, default=5)
    c.add_argument("--n", type=int, default=3)
    c.add_argument("--lam", type=float, default=1.0)
    c.add_argument("--trials", type=int, default=200)
    c.set_defaults(func=cmd_check_equiv)

    for name, func, helptext in (("solve", cmd_solve, "robust or regularized linear regression"),
                                 ("lqs", cmd_lqs, "least quantile regression by branch and bound"),
                                 ("matrix", cmd_matrix, "matrix completion, PCA or robust PCA")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("problem", help="JSON problem file")
        s.add_argument("--audit", type=int, default=0, metavar="N", help="sampled-adversary audit size")
        s.add_argument("--oracle", action="store_true", help="cross-check with a brute-force oracle")
        s.set_defaults(func=func)

    t = sub.add_parser("table", parents=[common], help="regenerate an equivalence table")
    t.add_argument("which", choices=["linreg", "matrix"])
    t.add_argument("--m", type=int, default=3)
    t.add_argument("--n", type=int, default=2)
    t.add_argument("--lam", type=float, default=1.0)
    t.add_argument("--trials", type=int, default=30)
    t.set_defaults(func=cmd_table)

    d = sub.add_parser("delta", parents=[common], help="discrepancy delta_m(a, b)")
    d.add_argument("--m", type=int, required=True)
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    d.add_argument("--oracle", action="store_true")
    d.set_defaults(func=cmd_delta)

    u = sub.add_parser("dual", parents=[common], help="dual exponent, dual norm and witness")
    u.add_argument("--p", required=True)
    u.add_argument("--vector", help="comma-separated entries")
    u.set_defaults(func=cmd_dual)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.workers < 1:
        print("robreg: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        report, lines, code = args.func(args)
    except UsageError as exc:
        print(f"robreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"robreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.timing:
        report["seconds"] = time.perf_counter() - start
    print("\n".join(lines))
    if args.json:
        Path(args.json).write_text(to_json(report) + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
