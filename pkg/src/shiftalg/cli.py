"""Command line interface: ``shiftalg <subcommand> [flags]``.

Exit codes: 0 success, 2 input error, 3 verification failure (or no window found).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from fractions import Fraction

from . import funcspace as fs
from . import fuzzy as fz
from . import lattice as lat
from . import liealg as la

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 2, 3


class InputError(ValueError):
    pass


# -- parsing helpers -----------------------------------------------------------------


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a rational number: {text!r}") from exc


def parse_vector(text: str) -> tuple:
    parts = text.replace(",", " ").split()
    if not parts:
        raise InputError("empty vector")
    return tuple(parse_rational(p) for p in parts)


def parse_matrix(text: str) -> tuple:
    """Row-major matrix, rows separated by ';' and entries by whitespace."""
    rows = [r for r in text.split(";") if r.strip()]
    if not rows:
        raise InputError("empty matrix")
    out = tuple(parse_vector(r) for r in rows)
    if len({len(r) for r in out}) != 1:
        raise InputError("matrix rows have different lengths")
    return out


def parse_int_matrix(text: str) -> tuple:
    m = parse_matrix(text)
    if any(x.denominator != 1 for row in m for x in row):
        raise InputError("matrix must have integer entries")
    return tuple(tuple(int(x) for x in row) for row in m)


def parse_int_list(text: str) -> list:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InputError(f"not a list of integers: {text!r}") from exc


def default_tol() -> float:
    env = os.environ.get("SHIFTALG_TOL")
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise InputError(f"SHIFTALG_TOL is not a number: {env!r}") from exc
    return fz.DEFAULT_TOL


# -- formatting -----------------------------------------------------------------------


def _float(x: float):
    return fz._num(x)


def rat(x) -> str:
    return lat.fmt_rational(x)


def report_json(r) -> dict:
    return {
        "name": r.name,
        "relation": r.text,
        "residual_max": _float(r.residual_max),
        "residual_fro": _float(r.residual_fro),
        "passed": r.passed,
        "informational": r.informational,
        "excluded_rows": list(r.excluded),
    }


def _failed(reports) -> list:
    return [r.name for r in reports if not r.informational and not r.passed]


def rep_payload(rep: fz.FuzzyRep, tol: float, irreducible: bool, seed: int,
                generators=None) -> tuple:
    reports = fz.verify_relations(rep, tol=tol)
    data = rep.to_json()
    data["dim"] = rep.dim
    data["report"] = [report_json(r) for r in reports]
    if irreducible:
        dim, ok = fz.irreducibility_check(rep, generators, seed=seed)
        data["commutant_dim"] = dim
        data["irreducible"] = ok
    return data, _failed(reports)


def rep_csv(reps: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "operator", "row", "col", "re", "im"])
    for idx, rep in enumerate(reps):
        for name in sorted(rep.operators):
            for r, c, re_, im in rep.operators[name].triplets:
                w.writerow([idx, name, r, c, f"{re_:.12g}", f"{im:.12g}"])
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------------------


def cmd_classify(a) -> tuple:
    R = parse_int_matrix(a.R)
    delta = parse_vector(a.delta)
    if len(delta) != len(R) or len(R[0]) != len(R):
        raise InputError("R must be square and match the length of delta")
    if lat.det(R) == 0:
        raise InputError("R is singular")
    cp = lat.canonical_pair(R, delta)
    cs = lat.coset_representatives(R)
    return {
        "H": [list(r) for r in cp.H],
        "delta0": [rat(x) for x in cp.delta0],
        "N_R": cs.count,
        "coset_representatives": [list(k) for k in cs.reps],
        "simple": lat.simplicity_discrete(R),
    }, []


def cmd_iso(a) -> tuple:
    R1, R2 = parse_int_matrix(a.R1), parse_int_matrix(a.R2)
    d1, d2 = parse_vector(a.delta1), parse_vector(a.delta2)
    for R, d in ((R1, d1), (R2, d2)):
        if len(R) != len(R[0]) or len(R) != len(d):
            raise InputError("R must be square and match the length of delta")
        if lat.det(R) == 0:
            raise InputError("R is singular")
    if len(R1) != len(R2):
        raise InputError("pairs have different dimensions")
    c1, c2 = lat.canonical_pair(R1, d1), lat.canonical_pair(R2, d2)
    iso = c1 == c2
    return {
        "isomorphic": iso,
        "criteria": lat.discrete_iso_criteria(R1, d1, R2, d2),
        "canonical": [
            {"H": [list(r) for r in c.H], "delta0": [rat(x) for x in c.delta0]} for c in (c1, c2)
        ],
    }, []


def cmd_hnf(a) -> tuple:
    M = parse_int_matrix(a.M)
    if len(M) != len(M[0]):
        raise InputError("matrix must be square")
    if lat.det(M) == 0:
        raise InputError("matrix is singular")
    hf = lat.hermite_normal_form(M)
    sf = lat.smith_normal_form(M)
    return {
        "H": [list(r) for r in hf.H],
        "U": [list(r) for r in hf.U],
        "smith_diagonal": [sf.S[i][i] for i in range(len(M))],
        "det": abs(lat.det(M)),
    }, []


def _parse_f(text: str, D: int) -> fs.FunctionExpr:
    try:
        return fs.parse(text, D)
    except fs.ParseError as exc:
        raise InputError(f"cannot parse function: {exc}") from exc


def cmd_fuzzy1d(a) -> tuple:
    f = _parse_f(a.f, 1)
    if a.sequence or a.N is not None:
        if a.u1 is None or a.u2 is None:
            raise InputError("--u1 and --u2 are required with --N or --sequence")
        sizes = parse_int_list(a.sequence) if a.sequence else [a.N]
        if any(s < 1 for s in sizes):
            raise InputError("sizes must be positive")
        reps = fz.build_sequence(f, parse_rational(a.u1), parse_rational(a.u2), sizes)
    else:
        if a.hbar is None:
            raise InputError("give --hbar/--delta, --u1/--u2/--N, or --u1/--u2/--sequence")
        verdict = fz.find_window(f, parse_rational(a.hbar), parse_rational(a.delta), a.n_max, a.anchor)
        reps = [fz.build_1d(f, verdict.require_finite())]
    return _emit_reps(a, reps, irreducible=True, generators=["A+", "A-", "u"])


def _emit_reps(a, reps: list, irreducible: bool, generators=None) -> tuple:
    payloads, failed = [], []
    for rep in reps:
        data, bad = rep_payload(rep, a.tol, irreducible, a.seed, generators)
        payloads.append(data)
        failed += bad
    if a.format == "csv":
        return rep_csv(reps), failed
    if len(payloads) == 1:
        return payloads[0], failed
    return {"sequence": payloads}, failed


def cmd_sphere(a) -> tuple:
    rep = fz.build_sphere(parse_rational(a.radius), a.k, parse_rational(a.delta))
    return _emit_reps(a, [rep], irreducible=True, generators=["A+", "A-", "Z"])


def cmd_catenoid(a) -> tuple:
    rep = fz.build_catenoid(parse_rational(a.radius), parse_rational(a.hbar),
                            parse_rational(a.delta), a.cutoff)
    return _emit_reps(a, [rep], irreducible=False)


def cmd_plane(a) -> tuple:
    rep = fz.build_plane(parse_rational(a.c), parse_rational(a.hbar), a.cutoff)
    return _emit_reps(a, [rep], irreducible=False)


def cmd_fuzzy2d(a) -> tuple:
    common = dict(hbar=parse_rational(a.hbar), delta1=parse_rational(a.delta1),
                  delta2=parse_rational(a.delta2), ftilde=_parse_f(a.ftilde, 2),
                  gtilde=_parse_f(a.gtilde, 2))
    if a.shape == "simplex":
        rep = fz.build_2d_simplex(a.N, **common)
        return _emit_reps(a, [rep], irreducible=True, generators=["U+", "U-", "V+", "V-"])
    rep = fz.build_2d_quadrant(cutoff=a.cutoff, **common)
    return _emit_reps(a, [rep], irreducible=False)


def cmd_lie(a) -> tuple:
    if a.structure:
        if not a.matrices:
            raise InputError("--structure needs --matrices")
        with open(a.structure) as fh:
            sc = la.StructureConstants.from_json(json.load(fh))
        with open(a.matrices) as fh:
            rm = la.RepMatrices.from_json(sc, json.load(fh))
        name = ""
    else:
        rm = la.preset(a.preset)
        name = a.preset
    if a.level < 0:
        raise InputError("--level must be >= 0")
    rep = la.build_simplex_rep(rm, a.level, parse_rational(a.hbar), name=name)
    gens = rep.meta["generators"]
    out, failed = _emit_reps(a, [rep], irreducible=True, generators=gens)
    if isinstance(out, dict):
        if out.get("irreducible") is False:
            failed.append("irreducibility")
        if name == "su2":
            val, spread = la.su2_casimir(rep)
            out["casimir"] = {"value": _float(val.real), "spread": _float(spread)}
    return out, failed


def cmd_verify(a) -> tuple:
    try:
        with open(a.rep) as fh:
            rep = fz.FuzzyRep.from_json(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read representation: {exc}") from exc
    rels = list(rep.relations) + [fz.Relation(f"extra{i + 1}", t) for i, t in enumerate(a.relation or [])]
    reports = fz.verify_relations(rep, rels, tol=a.tol)
    out = {"dim": rep.dim, "report": [report_json(r) for r in reports]}
    failed = _failed(reports)
    if a.irreducible:
        dim, ok = fz.irreducibility_check(rep, seed=a.seed)
        out["commutant_dim"] = dim
        out["irreducible"] = ok
        if not ok:
            failed.append("irreducibility")
    return out, failed


def cmd_levelset(a) -> tuple:
    f = _parse_f(a.f, 1)
    pts = fz.levelset_sample(f, parse_rational(a.u1), parse_rational(a.u2), a.nu, a.nphi)
    if a.format == "json":
        return {"points": [[_float(c) for c in p] for p in pts]}, []
    return fz.levelset_csv(pts), []


# -- argument parser ---------------------------------------------------------------------


def _globals(p: argparse.ArgumentParser, top: bool) -> None:
    kw = {} if top else {"default": argparse.SUPPRESS}
    p.add_argument("--seed", type=int, help="seed for randomized checks", **({"default": 0} if top else kw))
    p.add_argument("--tol", type=float, help="relation tolerance (default 1e-10 or $SHIFTALG_TOL)",
                   **({"default": None} if top else kw))
    p.add_argument("--out", help="write output to this file", **({"default": None} if top else kw))
    p.add_argument("--format", choices=("json", "csv"), **({"default": None} if top else kw))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftalg", description="Shift algebras and fuzzy spaces.")
    _globals(p, True)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        _globals(sp, False)
        sp.set_defaults(func=func)
        return sp

    sp = add("classify", cmd_classify, "canonical pair and orbit data for (R, delta)")
    sp.add_argument("--R", required=True)
    sp.add_argument("--delta", required=True)

    sp = add("iso", cmd_iso, "decide whether two discrete modules are isomorphic")
    sp.add_argument("--R1", required=True)
    sp.add_argument("--delta1", required=True)
    sp.add_argument("--R2", required=True)
    sp.add_argument("--delta2", required=True)

    sp = add("hnf", cmd_hnf, "Hermite and Smith forms of an integer matrix")
    sp.add_argument("--M", required=True)

    sp = add("fuzzy1d", cmd_fuzzy1d, "one dimensional window representations")
    sp.add_argument("--f", required=True)
    sp.add_argument("--hbar")
    sp.add_argument("--delta", default="0")
    sp.add_argument("--n-max", type=int, default=50)
    sp.add_argument("--anchor", type=int, default=0)
    sp.add_argument("--u1")
    sp.add_argument("--u2")
    sp.add_argument("--N", type=int)
    sp.add_argument("--sequence")

    sp = add("sphere", cmd_sphere, "fuzzy sphere of a given radius")
    sp.add_argument("--radius", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--delta", default="0")

    sp = add("catenoid", cmd_catenoid, "truncated fuzzy catenoid")
    sp.add_argument("--radius", required=True)
    sp.add_argument("--hbar", required=True)
    sp.add_argument("--delta", default="0")
    sp.add_argument("--cutoff", type=int, default=10)

    sp = add("plane", cmd_plane, "truncated fuzzy plane")
    sp.add_argument("--c", default="0")
    sp.add_argument("--hbar", required=True)
    sp.add_argument("--cutoff", type=int, default=10)

    sp = add("fuzzy2d", cmd_fuzzy2d, "two dimensional examples")
    sp.add_argument("shape", choices=("simplex", "quadrant"))
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--cutoff", type=int, default=6)
    sp.add_argument("--hbar", default="1")
    sp.add_argument("--delta1", default="0")
    sp.add_argument("--delta2", default="0")
    sp.add_argument("--ftilde", default="1")
    sp.add_argument("--gtilde", default="1")

    sp = add("lie", cmd_lie, "simplex representations of a Lie algebra")
    sp.add_argument("--preset", default="su2", help="su2, su3 or suD")
    sp.add_argument("--structure", help="structure constant JSON file")
    sp.add_argument("--matrices", help="representation matrix JSON file")
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--hbar", default="1")

    sp = add("verify", cmd_verify, "check relations of a stored representation")
    sp.add_argument("--rep", required=True, help="representation JSON file")
    sp.add_argument("--relation", action="append", help="extra relation 'lhs = rhs'")
    sp.add_argument("--irreducible", action="store_true")

    sp = add("levelset", cmd_levelset, "sample the surface x^2 + y^2 = f(z)^2")
    sp.add_argument("--f", required=True)
    sp.add_argument("--u1", required=True)
    sp.add_argument("--u2", required=True)
    sp.add_argument("--nu", type=int, default=60)
    sp.add_argument("--nphi", type=int, default=60)
    return p


def _dumps(obj, level: int = 0) -> str:
    """Indented JSON with flat lists of scalars kept on one line."""
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dumps(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list) and any(isinstance(x, (dict, list)) for x in obj):
        if all(isinstance(x, list) and not any(isinstance(y, (dict, list)) for y in x) for x in obj):
            return "[" + ", ".join(json.dumps(x) for x in obj) + "]"
        return "[\n" + ",\n".join(inner + _dumps(x, level + 1) for x in obj) + "\n" + pad + "]"
    return json.dumps(obj)


def _render(out) -> str:
    if isinstance(out, str):
        return out
    return _dumps(out) + "\n"


_NEGATIVE = re.compile(r"^-\d")


def _join_negative_values(argv: list) -> list:
    # "--u1 -3/2" would otherwise be read as an option
    out = []
    for tok in argv:
        if out and _NEGATIVE.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.tol is None:
            args.tol = default_tol()
        if args.format is None:
            args.format = "csv" if args.command == "levelset" else "json"
        out, failed = args.func(args)
    except fz.WindowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (InputError, ValueError, fs.ParseError, lat.LatticeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = _render(out)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if failed:
        print("verification failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
