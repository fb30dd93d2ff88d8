"""Command-line interface: ``normbisect {classify,bounded-rep,verify}``.

Exit codes: 0 success, 2 configuration error (or unknown suite), 3 when a
classification contains UNRESOLVED verdicts; ``verify`` exits 1 when a gating
check fails.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np
from scipy.spatial import cKDTree

from .bisector import ClassifyParams, Label
from .body import BodyError, ConvexBody, HalfDiskHull, LpBall, cross_polytope, cube, load_body
from .shadow import bounded_representation
from .topology import classify_sphere, refine_interface, sphere_mesh
from .verify import SUITES, SuiteConfig, run_suite

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_UNRESOLVED = 3

# --tol-<name> flags and the classifier fields they override
TOLERANCES = {
    "f": "eps_f",
    "asym": "eps_asym",
    "t": "eps_t",
    "b": "eps_b",
    "edge": "eps_edge",
}


class ConfigError(ValueError):
    pass


def parse_vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(a) for a in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None
    if v.size < 2 or not np.all(np.isfinite(v)) or not np.any(v):
        raise ConfigError(f"bad vector {text!r}")
    return v


def make_body(spec: str, n: int, gauge_tol: float | None = None) -> ConvexBody:
    """Body from an inline tag (``lp:<p>``, ``cube``, ``cross``, ``halfdisk:<m>``) or a JSON file."""
    try:
        if spec.startswith("lp:"):
            p = spec[3:]
            body = LpBall(n, np.inf if p in ("inf", "oo") else float(p))
        elif spec == "cube":
            body = cube(n)
        elif spec == "cross":
            body = cross_polytope(n)
        elif spec.startswith("halfdisk"):
            m = int(spec.split(":", 1)[1]) if ":" in spec else 256
            if n != 3:
                raise ConfigError("halfdisk bodies live in dimension 3")
            body = HalfDiskHull(m)
        elif os.path.exists(spec):
            body = load_body(spec)
        else:
            raise ConfigError(f"unknown body {spec!r}")
    except (BodyError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if body.n != n:
        raise ConfigError(f"body has dimension {body.n} but x has {n} coordinates")
    if gauge_tol is not None:
        body.gauge_tol = gauge_tol
    return body


def _params(args) -> ClassifyParams:
    over = {field: getattr(args, f"tol_{name}") for name, field in TOLERANCES.items()
            if getattr(args, f"tol_{name}") is not None}
    if args.t_max is not None:
        over["t_max"] = args.t_max
    return replace(ClassifyParams(), **over)


def _fmt(v) -> str:
    return repr(float(v))


def _atomic_write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_AXES = ("vx", "vy", "vz", "vw")


def _classify_text(mesh, x, level, fmt: str) -> str:
    recs = mesh.records
    n = mesh.n
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(_AXES[:n] + ("label", "ideal_limit", "root_count")) + "\n")
        for v, r in zip(mesh.vertices, recs):
            buf.write(",".join([_fmt(a) for a in v] +
                               [r.label.name, str(bool(r.ideal_limit)).lower(), str(r.root_count)]))
            buf.write("\n")
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "n": n,
            "x": [float(a) for a in x],
            "mesh_level": level,
            "vertices": mesh.vertices.tolist(),
            "labels": [r.label.name for r in recs],
            "ideal_limit": [bool(r.ideal_limit) for r in recs],
            "root_count": [r.root_count for r in recs],
            "adjacency": mesh.edges.tolist(),
        }
        return json.dumps(doc) + "\n"
    raise ConfigError(f"classify does not write {fmt!r}")


def _bounded_text(br, fmt: str) -> str:
    pts = br.points
    tags = br.tags
    n = pts.shape[1]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(_AXES[:n] + ("tag",)) + "\n")
        for p, t in zip(pts, tags):
            buf.write(",".join([_fmt(a) for a in p] + [str(t)]) + "\n")
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"points": pts.tolist(), "tags": tags.tolist()}) + "\n"
    if fmt == "obj":
        if n > 3:
            raise ConfigError("OBJ output needs n <= 3")
        buf = io.StringIO()
        for p in pts:
            q = list(p) + [0.0] * (3 - n)
            buf.write("v " + " ".join(_fmt(a) for a in q) + "\n")
        if n == 3:
            # wireframe: midpoints whose chord offsets are grid neighbours
            s = br.chords.half_lengths
            off = br.chords.offsets[s > 0]
            pairs = cKDTree(off).query_pairs(1.01 * br.spacing, output_type="ndarray")
            for i, j in pairs:
                buf.write(f"l {i + 1} {j + 1}\n")
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def cmd_classify(args) -> int:
    x, body = _setup(args)
    params = _params(args)
    level = args.mesh_level if args.mesh_level is not None else {2: 8, 3: 4}.get(body.n, 2)
    xu = x / float(body.gauge(x))
    mesh = classify_sphere(body, xu, sphere_mesh(body.n, level, args.seed), params)
    if body.n == 3 or body.n == 2:
        mesh = refine_interface(body, xu, mesh, params)
    _atomic_write(args.out, _classify_text(mesh, xu, level, args.format or "csv"))
    return EXIT_UNRESOLVED if np.any(mesh.labels == Label.UNRESOLVED) else EXIT_OK


def cmd_bounded_rep(args) -> int:
    x, body = _setup(args)
    xu = x / float(body.gauge(x))
    mesh = None
    if args.mesh_level is not None:
        mesh = classify_sphere(body, xu, sphere_mesh(body.n, args.mesh_level, args.seed),
                               _params(args))
    spacing = args.spacing if args.spacing is not None else (0.02 if body.n <= 3 else 0.2)
    br = bounded_representation(body, xu, spacing=spacing, mesh=mesh)
    _atomic_write(args.out, _bounded_text(br, args.format or "csv"))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    if args.suite == "example1":
        args.body = args.body or "halfdisk:256"
        args.x = args.x or "1,0,0"
    x, body = _setup(args)
    cfg = SuiteConfig(body, x, args.mesh_level, _params(args), args.seed, args.body,
                      args.spacing)
    try:
        rep = run_suite(args.suite, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    doc = rep.to_dict()
    doc["pass"] = rep.passed
    _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _setup(args):
    if not args.body:
        raise ConfigError("--body is required")
    if not args.x:
        raise ConfigError("--x is required")
    x = parse_vector(args.x)
    body = make_body(args.body, x.size, args.tol_g)
    return x, body


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normbisect",
                                 description="Bisectors and their bounded representations "
                                             "in normed spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--body", help="lp:<p>, cube, cross, halfdisk:<m> or a JSON body file")
        p.add_argument("--x", help="direction x, comma separated (scaled to unit gauge)")
        p.add_argument("--mesh-level", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--spacing", type=float, default=None, help="chord-grid spacing")
        p.add_argument("--t-max", type=float, default=None, help="end of the ray scan")
        p.add_argument("--tol-g", type=float, default=None, help="gauge tolerance")
        for name, field in TOLERANCES.items():
            p.add_argument(f"--tol-{name}", type=float, default=None,
                           help=f"override {field}")

    p = sub.add_parser("classify", help="label sphere directions LEFT / RIGHT / BISECTOR")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bounded-rep", help="shadow boundary plus chord midpoints")
    common(p)
    p.add_argument("--format", choices=("csv", "json", "obj"), default=None)
    p.set_defaults(func=cmd_bounded_rep)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("suite")
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"normbisect: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
