"""Command-line front end: parse maps and points, run the library, emit reports.

Subcommands: ``traintrack``, ``distance``, ``classify``, ``candidates``,
``minimize``.  Reports are emitted as canonical JSON (sorted keys, compact
separators, floats rounded to 12 significant digits) so repeated runs are
byte-identical, or as plain text with ``--text``.

Exit codes: 0 success, 2 unparsable input or bad configuration, 3 an
iteration cap was reached, 4 marking or stretch integrity failure.
"""

from __future__ import annotations

import argparse
import json
import string
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .graph_core import EdgePath, Graph, GraphError, PathError
from .graph_map import GraphMap, difference_of_markings, self_map_from_automorphism
from .lipschitz_metric import (
    DistanceReport,
    Elliptic,
    Hyperbolic,
    Inconclusive,
    ParabolicSuspect,
    StretchIntegrityError,
    classify,
    min_displacement_on_simplex,
    sigma,
)
from .marked_metric import (
    Automorphism,
    AutomorphismParseError,
    MarkingError,
    Metric,
    NotBasisError,
    OuterSpacePoint,
    candidates,
    loop_length,
    rose_point,
)
from .train_track_algo import (
    FiniteOrderCertificate,
    NonTerminationCertificate,
    ReductionCertificate,
    TrainTrackCertificate,
    find_train_track,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CAP = 3
EXIT_INTEGRITY = 4


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: one command plus its inputs and knobs."""

    command: str
    map_text: Optional[str] = None
    point: Optional[str] = None
    point2: Optional[str] = None
    both: bool = False
    floor: float = 1e-6
    max_iters: int = 10**4
    tol: float = 1e-12
    fmt: str = "json"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError("--tol must be positive")
        if self.max_iters <= 0:
            raise ValueError("--max-iters must be positive")
        if self.fmt not in ("json", "text"):
            raise ValueError("output format must be json or text")


class CliInputError(Exception):
    """Unusable input file or flag combination (exit code 2)."""


# -- naming and number formatting ---------------------------------------------------


def _f12(x: float) -> float:
    """Round to 12 significant digits so serialized output is byte-stable."""
    return float(f"{float(x):.12g}")


def _num(value) -> object:
    """Exact rationals as 'p/q' strings, floats at 12 significant digits."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return _f12(value)


def _edge_name(d: int) -> str:
    """Signed edge id as a word letter: lowercase forward, uppercase reverse."""
    e = abs(d)
    if 1 <= e <= 26:
        letter = string.ascii_lowercase[e - 1]
    else:
        letter = f"e{e}"
    return letter.upper() if d < 0 else letter


def _edge_word(directions: Sequence[int]) -> str:
    names = [_edge_name(d) for d in directions]
    if any(len(n) > 1 for n in names):
        return ".".join(names)
    return "".join(names)


def _gen_name(d: int) -> str:
    letter = string.ascii_lowercase[abs(d) - 1]
    return letter.upper() if d < 0 else letter


def _gen_word(directions: Sequence[int]) -> str:
    return "".join(_gen_name(d) for d in directions)


def _parse_gen_word(word: str) -> Tuple[int, ...]:
    out = []
    for ch in word:
        if ch in string.ascii_lowercase:
            out.append(ord(ch) - ord("a") + 1)
        elif ch in string.ascii_uppercase:
            out.append(-(ord(ch) - ord("A") + 1))
        else:
            raise CliInputError(f"invalid letter {ch!r} in word {word!r}")
    return tuple(out)


# -- point files --------------------------------------------------------------------


def point_to_json(x: OuterSpacePoint) -> Dict[str, object]:
    """Serializable form of a marked metric graph; parsing it back is lossless
    for rational lengths."""
    return {
        "vertices": sorted(x.graph.vertices),
        "edges": [
            {"id": e, "endpoints": list(x.graph.endpoints(e))}
            for e in sorted(x.graph.edge_ids)
        ],
        "basepoint": x.basepoint,
        "lengths": {str(e): _num(x.metric.length(e)) for e in sorted(x.graph.edge_ids)},
        "marking": {
            _gen_name(i + 1): list(p.edges) for i, p in enumerate(x.marking)
        },
        "inverse_marking": {
            str(e): _gen_word(w) for e, w in sorted(x.inverse_marking().items())
        },
    }


def _parse_length(value) -> object:
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise CliInputError(f"invalid length {value!r}: {exc}") from exc
    if isinstance(value, (int, float)):
        return Fraction(value) if isinstance(value, int) else float(value)
    raise CliInputError(f"invalid length {value!r}")


def point_from_json(data: Mapping[str, object]) -> OuterSpacePoint:
    try:
        vertices = tuple(int(v) for v in data["vertices"])
        endpoints = {
            int(rec["id"]): (int(rec["endpoints"][0]), int(rec["endpoints"][1]))
            for rec in data["edges"]
        }
        graph = Graph(vertices, endpoints)
        lengths = {int(e): _parse_length(v) for e, v in data["lengths"].items()}
        marking_obj = data["marking"]
        loops = []
        for i in range(len(marking_obj)):
            key = _gen_name(i + 1)
            if key not in marking_obj:
                raise CliInputError(f"marking is missing generator {key!r}")
            loops.append(EdgePath(tuple(int(d) for d in marking_obj[key]), closed=True))
        inverse = {
            int(e): _parse_gen_word(w) for e, w in data["inverse_marking"].items()
        }
        basepoint = int(data.get("basepoint", min(vertices)))
    except CliInputError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CliInputError(f"malformed point file: {exc}") from exc
    return OuterSpacePoint(
        graph=graph,
        metric=Metric(lengths),
        marking=loops,
        basepoint=basepoint,
        inverse_marking=inverse,
    )


def _load_point(path: str) -> OuterSpacePoint:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliInputError(f"cannot read point file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"point file {path} is not valid JSON: {exc}") from exc
    return point_from_json(data)


# -- report builders ----------------------------------------------------------------


def _metric_json(metric: Metric, edge_ids: Sequence[int]) -> Dict[str, object]:
    return {_edge_name(e): _num(metric.length(e)) for e in edge_ids}


def _gates_json(structure) -> List[List[str]]:
    blocks = []
    for v in structure.vertices:
        for gate in structure.gates_at(v):
            blocks.append(sorted(_edge_name(d) for d in gate))
    return sorted(blocks)


def _edge_images_json(m: GraphMap) -> Dict[str, str]:
    return {
        _edge_name(e): _edge_word(m.edge_image[e].edges)
        for e in sorted(m.domain.graph.edge_ids)
    }


def _traintrack_report(cert) -> Tuple[Dict[str, object], int]:
    if isinstance(cert, TrainTrackCertificate):
        g = cert.graph_map.domain.graph
        report = {
            "status": cert.status,
            "lambda": _f12(cert.lam),
            "metric": _metric_json(cert.metric, sorted(g.edge_ids)),
            "gates": _gates_json(cert.structure),
            "edge_images": _edge_images_json(cert.graph_map),
            "trace": list(cert.trace),
        }
        return report, EXIT_OK
    if isinstance(cert, FiniteOrderCertificate):
        g = cert.graph_map.domain.graph
        report = {
            "status": cert.status,
            "order": cert.order,
            "lambda": 1.0,
            "metric": _metric_json(cert.graph_map.domain.metric, sorted(g.edge_ids)),
            "gates": [],
            "edge_images": _edge_images_json(cert.graph_map),
            "trace": list(cert.trace),
        }
        return report, EXIT_OK
    if isinstance(cert, ReductionCertificate):
        g = cert.graph_map.domain.graph
        rows = [list(r) for r in cert.matrix.rows]
        rho = float(np.max(np.abs(np.linalg.eigvals(np.array(rows, dtype=float)))))
        report = {
            "status": cert.status,
            "subgraph": sorted(_edge_name(e) for e in cert.subset),
            "matrix": rows,
            "edge_order": [_edge_name(e) for e in cert.matrix.edge_ids],
            "lambda": _f12(rho),
            "metric": _metric_json(cert.graph_map.domain.metric, sorted(g.edge_ids)),
            "edge_images": _edge_images_json(cert.graph_map),
            "trace": list(cert.trace),
        }
        return report, EXIT_OK
    assert isinstance(cert, NonTerminationCertificate)
    report = {
        "status": cert.status,
        "reason": cert.reason,
        "trace": list(cert.trace),
    }
    return report, EXIT_CAP


def _distance_report(x: OuterSpacePoint, y: OuterSpacePoint) -> Dict[str, object]:
    rep: DistanceReport = sigma(x, y, difference_of_markings(x, y))
    return {
        "sigma": _num(rep.sigma),
        "log_sigma": _f12(rep.log_sigma),
        "witness": list(rep.witness.loop.edges),
        "table": [
            {"loop": list(c.loop.edges), "ratio": _num(r)} for c, r in rep.table
        ],
    }


def _simplex_json(rep) -> Dict[str, object]:
    return {
        "floor": _f12(rep.floor),
        "lambda": _f12(rep.lam),
        "boundary_flag": rep.boundary_flag,
        "metric": _metric_json(rep.metric, sorted(rep.metric.edge_ids)),
        "trace": [[_f12(lo), _f12(hi)] for lo, hi in rep.trace],
    }


def _classify_report(result) -> Tuple[Dict[str, object], int]:
    if isinstance(result, Elliptic):
        report = {
            "kind": result.kind,
            "order": result.order,
            "evidence": {"trace": list(result.certificate.trace)},
        }
        return report, EXIT_OK
    if isinstance(result, Hyperbolic):
        report = {
            "kind": result.kind,
            "lambda": _f12(result.lam),
            "evidence": {
                "trace": list(result.certificate.trace),
                "metric": _metric_json(
                    result.point.metric, sorted(result.point.graph.edge_ids)
                ),
                "simplex": _simplex_json(result.simplex),
            },
        }
        return report, EXIT_OK
    if isinstance(result, ParabolicSuspect):
        report = {
            "kind": result.kind,
            "invariant_chain": [
                sorted(_edge_name(e) for e in subset)
                for subset in result.invariant_chain
            ],
            "evidence": {
                "trace": list(result.certificate.trace),
                "sweep": [
                    {"floor": _f12(f), "lambda": _f12(lam), "boundary_flag": b}
                    for f, lam, b in result.sweep
                ],
            },
        }
        return report, EXIT_OK
    assert isinstance(result, Inconclusive)
    report = {
        "kind": result.kind,
        "reason": result.reason,
        "evidence": {"trace": list(result.certificate.trace)},
    }
    return report, EXIT_CAP


# -- rendering ----------------------------------------------------------------------


def _render_text(value, indent: str = "") -> List[str]:
    lines: List[str] = []
    if isinstance(value, dict):
        for k in sorted(value):
            v = value[k]
            if isinstance(v, (dict, list)):
                lines.append(f"{indent}{k}:")
                lines.extend(_render_text(v, indent + "  "))
            else:
                lines.append(f"{indent}{k}: {v}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, list) and not any(
                isinstance(item, (dict, list)) for item in v
            ):
                lines.append(f"{indent}- [{' '.join(str(item) for item in v)}]")
            elif isinstance(v, (dict, list)):
                lines.extend(_render_text(v, indent + "  "))
            else:
                lines.append(f"{indent}- {v}")
    else:
        lines.append(f"{indent}{value}")
    return lines


def _emit(report: Dict[str, object], fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(
            json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
        )
    else:
        sys.stdout.write("\n".join(_render_text(report)) + "\n")


# -- command drivers ----------------------------------------------------------------


def _require_map(cfg: RunConfig) -> Automorphism:
    if not cfg.map_text:
        raise CliInputError(f"{cfg.command} requires --map")
    return Automorphism.from_text(cfg.map_text)


def cmd_traintrack(cfg: RunConfig) -> int:
    phi = _require_map(cfg)
    cert = find_train_track(phi, max_iters=cfg.max_iters, eigen_rel_tol=cfg.tol)
    report, code = _traintrack_report(cert)
    _emit(report, cfg.fmt)
    return code


def cmd_distance(cfg: RunConfig) -> int:
    if not cfg.point or not cfg.point2:
        raise CliInputError("distance requires --point and --point2")
    x = _load_point(cfg.point)
    y = _load_point(cfg.point2)
    if x.rank != y.rank:
        raise MarkingError(f"points have different ranks ({x.rank} vs {y.rank})")
    if cfg.both:
        report = {
            "forward": _distance_report(x, y),
            "backward": _distance_report(y, x),
        }
    else:
        report = _distance_report(x, y)
    _emit(report, cfg.fmt)
    return EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    phi = _require_map(cfg)
    result = classify(phi)
    report, code = _classify_report(result)
    _emit(report, cfg.fmt)
    return code


def cmd_candidates(cfg: RunConfig) -> int:
    if not cfg.point:
        raise CliInputError("candidates requires --point")
    x = _load_point(cfg.point)
    loops = candidates(x)
    report = {
        "count": len(loops),
        "candidates": [
            {"loop": list(c.loop.edges), "length": _num(loop_length(x, c.loop))}
            for c in loops
        ],
    }
    _emit(report, cfg.fmt)
    return EXIT_OK


def cmd_minimize(cfg: RunConfig) -> int:
    phi = _require_map(cfg)
    m = self_map_from_automorphism(rose_point(phi.rank), phi)
    rep = min_displacement_on_simplex(m.domain.graph, m.edge_image, cfg.floor)
    _emit(_simplex_json(rep), cfg.fmt)
    return EXIT_OK


_COMMANDS = {
    "traintrack": cmd_traintrack,
    "distance": cmd_distance,
    "classify": cmd_classify,
    "candidates": cmd_candidates,
    "minimize": cmd_minimize,
}


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outerspace",
        description="Stretch-factor distances and train track maps on marked metric graphs.",
    )
    common = argparse.ArgumentParser(add_help=False)
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="emit canonical JSON (default)")
    fmt.add_argument("--text", action="store_true", help="emit plain text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized runs")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("traintrack", parents=[common], help="fold a map to a certificate")
    p.add_argument("--map", required=True, help="map text, e.g. 'a->ab; b->bab'")
    p.add_argument("--max-iters", type=int, default=10**4)
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("distance", parents=[common], help="stretch distance between two points")
    p.add_argument("--point", required=True, help="JSON point file")
    p.add_argument("--point2", required=True, help="JSON point file")
    p.add_argument("--both", action="store_true", help="report both orders")

    p = sub.add_parser("classify", parents=[common], help="sort a map into the displacement trichotomy")
    p.add_argument("--map", required=True)
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("candidates", parents=[common], help="list candidate loops of a point")
    p.add_argument("--point", required=True)

    p = sub.add_parser("minimize", parents=[common], help="minimize displacement over floored metrics")
    p.add_argument("--map", required=True)
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=10**4)
    p.add_argument("--tol", type=float, default=1e-12)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        map_text=getattr(args, "map", None),
        point=getattr(args, "point", None),
        point2=getattr(args, "point2", None),
        both=getattr(args, "both", False),
        floor=getattr(args, "floor", 1e-6),
        max_iters=getattr(args, "max_iters", 10**4),
        tol=getattr(args, "tol", 1e-12),
        fmt="text" if args.text else "json",
        seed=args.seed,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARSE
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[cfg.command](cfg)
    except (MarkingError, StretchIntegrityError, GraphError, PathError) as exc:
        sys.stderr.write(f"integrity error: {exc}\n")
        return EXIT_INTEGRITY
    except (CliInputError, AutomorphismParseError, NotBasisError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
