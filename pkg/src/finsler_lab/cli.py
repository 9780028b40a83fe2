"""Command-line interface: ``finsler-lab {eval,induce,compare-hashiguchi,verify}``.

Scenes are JSON documents::

    {
      "name": "randers-sphere",
      "metric":    {"kind": "randers", "dimension": 3, "a": [[...]], "b": [...],
                    "F": "...", "parameters": {...}},
      "immersion": {"dimension": 2, "components": ["...", ...], "parameters": {...}},
      "points":    {"explicit": [{"u": [...], "v": [...]}], "count": 20, "seed": 1,
                    "ranges": [[lo, hi], ...]},
      "tolerances": {"check.name": 1e-8},
      "expected_nonzero": {"check.name": 1e-3}
    }

Ambient-only scenes use ``{"x": [...], "y": [...]}`` points.  Unknown keys
are rejected.  Exit codes: 0 ok, 1 verification failure, 2 parse or scene
error, 3 math-domain error, 4 rank deficiency.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FinslerLabError, InputError, MathDomainError, RankDeficiencyError, SceneError
from .finsler import MetricSpec, TangentPoint, ambient_eval
from .submanifold import ImmersionSpec, SubPoint, frame_package, hashiguchi_comparison, induce
from .verify import CHECKS, Scene, random_points, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DOMAIN, EXIT_RANK = 0, 1, 2, 3, 4

INDEX_ORDER = {
    "g, g_inv, g_sub, N, N_ind, N_int": "[i][j]",
    "A, dg_dx, L": "[i][j][k]; dg_dx[i][j][k] = d g_ij / d x^k",
    "connection coefficients": "[k][i][j], output index first: nabla_{delta/delta x^j} d/dx^i",
    "D": "[alpha][beta] = D^alpha_beta",
    "B, Nframe": "[i][alpha], [i][a]",
    "Btilde, Ntilde": "[alpha][i], [a][i]",
    "H": "[a][lambda]",
    "S_h, S_v": "[a][alpha][beta]",
    "A_h, A_v": "[lambda][a][alpha]",
    "normal_h, normal_v": "[b][a][alpha]",
}

_TOP_KEYS = {"name", "metric", "immersion", "points", "tolerances", "expected_nonzero"}
_METRIC_KEYS = {"kind", "dimension", "a", "b", "F", "parameters"}
_IMM_KEYS = {"dimension", "components", "parameters"}
_POINT_KEYS = {"explicit", "count", "seed", "ranges"}


def _reject_unknown(section: str, obj, allowed: set) -> None:
    if not isinstance(obj, dict):
        raise SceneError(f"section '{section}' must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SceneError(f"unknown key '{extra[0]}' in section '{section}'")


def _require(section: str, obj: dict, key: str):
    if key not in obj:
        raise SceneError(f"missing key '{key}' in section '{section}'")
    return obj[key]


def bundled_scenes() -> list[str]:
    root = resources.files("finsler_lab") / "scenes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_scene_text(ref: str) -> tuple[str, str]:
    path = Path(ref)
    if path.exists():
        return path.read_text(), path.stem
    res = resources.files("finsler_lab") / "scenes" / f"{ref}.json"
    if res.is_file():
        return res.read_text(), ref
    raise SceneError(f"scene '{ref}' is neither a file nor a bundled scene")


def build_metric(d: dict) -> MetricSpec:
    _reject_unknown("metric", d, _METRIC_KEYS)
    kind = _require("metric", d, "kind")
    n = int(_require("metric", d, "dimension"))
    params = d.get("parameters", {})
    if kind == "euclidean":
        return MetricSpec.euclidean(n)
    if kind == "riemannian":
        return MetricSpec.riemannian(_require("metric", d, "a"), params)
    if kind == "randers":
        return MetricSpec.randers(_require("metric", d, "b"), d.get("a"), params)
    if kind == "custom":
        return MetricSpec.custom(_require("metric", d, "F"), n, params)
    raise SceneError(f"unknown metric kind '{kind}'")


def load_scene(ref: str, overrides: dict | None = None) -> Scene:
    text, default_name = _read_scene_text(ref)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SceneError(f"scene is not valid JSON: {err}") from None
    _reject_unknown("scene", doc, _TOP_KEYS)
    metric = build_metric(_require("scene", doc, "metric"))
    if metric.dimension != int(doc["metric"]["dimension"]):
        raise SceneError("metric dimension does not match its expressions")
    imm = None
    if "immersion" in doc:
        idoc = doc["immersion"]
        _reject_unknown("immersion", idoc, _IMM_KEYS)
        imm = ImmersionSpec.from_strings(_require("immersion", idoc, "components"),
                                         int(_require("immersion", idoc, "dimension")),
                                         idoc.get("parameters"))
        if imm.n_total != metric.dimension:
            raise SceneError(f"immersion has {imm.n_total} components, metric dimension is {metric.dimension}")
    pdoc = doc.get("points", {})
    _reject_unknown("points", pdoc, _POINT_KEYS)
    seed = int(pdoc.get("seed", 0))
    points = []
    for k, item in enumerate(pdoc.get("explicit", [])):
        if imm is not None:
            _reject_unknown(f"points.explicit[{k}]", item, {"u", "v"})
            points.append(SubPoint(_require("points", item, "u"), _require("points", item, "v")))
        else:
            _reject_unknown(f"points.explicit[{k}]", item, {"x", "y"})
            points.append(TangentPoint(_require("points", item, "x"), _require("points", item, "y")))
    count = int(pdoc.get("count", 0))
    if count:
        ranges = _require("points", pdoc, "ranges")
        want = imm.m if imm is not None else metric.dimension
        if len(ranges) != want:
            raise SceneError(f"'ranges' needs {want} intervals, got {len(ranges)}")
        make = SubPoint if imm is not None else TangentPoint
        points.extend(random_points(np.random.default_rng(seed), ranges, count,
                                    lambda b, f: make(tuple(b), tuple(f))))
    tolerances = dict(doc.get("tolerances", {}))
    tolerances.update(overrides or {})
    expected = dict(doc.get("expected_nonzero", {}))
    for name in list(tolerances) + list(expected):
        if name not in CHECKS:
            raise SceneError(f"unknown check name '{name}'")
    return Scene(doc.get("name", default_name), metric, imm, points, seed, tolerances, expected)


# -- serialization ------------------------------------------------------------------
def _tolist(a):
    return np.asarray(a, dtype=float).tolist()


def _conn(c) -> dict:
    return {"kind": c.kind, "horizontal": _tolist(c.horizontal), "vertical": _tolist(c.vertical)}


def _header() -> dict:
    return {"index_order": INDEX_ORDER}


def _pick(scene: Scene, index: int):
    if not 0 <= index < len(scene.sample_points):
        raise SceneError(f"--point {index} out of range (scene has {len(scene.sample_points)} points)")
    return scene.sample_points[index]


def cmd_eval(scene: Scene, index: int) -> dict:
    pt = _pick(scene, index)
    if isinstance(pt, SubPoint):
        amb = frame_package(scene.metric, scene.immersion, pt).ambient
    else:
        amb = ambient_eval(scene.metric, pt)
    return {
        "header": _header(), "scene": scene.name, "point_index": index,
        "x": _tolist(amb.x), "y": _tolist(amb.y), "F": amb.F,
        "g": _tolist(amb.g), "g_inv": _tolist(amb.g_inv), "A": _tolist(amb.A),
        "dg_dx": _tolist(amb.dg_dx), "G": _tolist(amb.G), "N": _tolist(amb.N), "l": _tolist(amb.l),
    }


def _induced(scene: Scene, index: int):
    if scene.immersion is None:
        raise SceneError("this command needs a scene with an immersion")
    return induce(scene.metric, scene.immersion, _pick(scene, index))


def cmd_compare(scene: Scene, index: int) -> dict:
    pkg = _induced(scene, index)
    return {"header": _header(), "scene": scene.name, "point_index": index,
            "u": list(pkg.point.u), "v": list(pkg.point.v),
            "comparison": hashiguchi_comparison(pkg)}


def cmd_induce(scene: Scene, index: int) -> dict:
    pkg = _induced(scene, index)
    fp = pkg.frames
    return {
        "header": _header(), "scene": scene.name, "point_index": index,
        "u": list(pkg.point.u), "v": list(pkg.point.v), "F": pkg.F,
        "frames": {"B": _tolist(fp.B), "Nframe": _tolist(fp.Nframe), "Btilde": _tolist(fp.Btilde),
                   "Ntilde": _tolist(fp.Ntilde), "H": _tolist(fp.H), "seed_axes": list(fp.seed_axes)},
        "g_sub": _tolist(pkg.g_sub), "N_ind": _tolist(pkg.N_ind), "N_int": _tolist(pkg.N_int),
        "D": _tolist(pkg.D),
        "conn_ind": _conn(pkg.conn_ind),
        "conn_normal": {"horizontal": _tolist(pkg.normal_h), "vertical": _tolist(pkg.normal_v)},
        "S_h": _tolist(pkg.S_h), "S_v": _tolist(pkg.S_v),
        "A_h": _tolist(pkg.A_h), "A_v": _tolist(pkg.A_v),
        "hash_ind": _conn(pkg.hash_ind), "hash_int": _conn(pkg.hash_int),
        "L_restricted": _tolist(pkg.L_restricted),
        "comparison": hashiguchi_comparison(pkg),
    }


def preflight(scene: Scene) -> None:
    """Evaluate every sample point once so domain and rank errors surface as exit codes."""
    for pt in scene.sample_points:
        if isinstance(pt, SubPoint):
            frame_package(scene.metric, scene.immersion, pt)
        else:
            scene.metric.check_at(pt.x)
            ambient_eval(scene.metric, pt)


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise SceneError(f"--tolerance expects NAME=VALUE, got '{item}'")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise SceneError(f"--tolerance value for '{name}' is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsler-lab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("eval", "ambient Finsler data at one point"),
                        ("induce", "full induced package at one sub point"),
                        ("compare-hashiguchi", "induced vs intrinsic Hashiguchi comparison only"),
                        ("verify", "run the invariant suite")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scene", required=True, help="scene file or bundled scene name")
        if name != "verify":
            sp.add_argument("--point", type=int, default=0, help="sample point index")
        sp.add_argument("--json-indent", type=int, default=None)
        sp.add_argument("--tolerance", action="append", metavar="NAME=VALUE")
    sub.add_parser("list-scenes", help="names of the bundled scenes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenes":
        print("\n".join(bundled_scenes()))
        return EXIT_OK
    try:
        scene = load_scene(args.scene, _parse_overrides(args.tolerance))
        code = EXIT_OK
        if args.command == "eval":
            out = cmd_eval(scene, args.point)
        elif args.command == "induce":
            out = cmd_induce(scene, args.point)
        elif args.command == "compare-hashiguchi":
            out = cmd_compare(scene, args.point)
        else:
            preflight(scene)
            report = run_suite(scene)
            out = report.to_dict()
            code = EXIT_OK if report.passed else EXIT_FAIL
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except MathDomainError as err:
        print(f"math domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except RankDeficiencyError as err:
        print(f"rank deficiency: {err}", file=sys.stderr)
        return EXIT_RANK
    except FinslerLabError as err:
        print(f"verification error: {err}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, TypeError, KeyError) as err:
        print(f"error: malformed scene: {err}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(out, indent=args.json_indent, sort_keys=False))
    return code


if __name__ == "__main__":
    sys.exit(main())
