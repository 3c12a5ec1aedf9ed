"""
Text instance format and the JSON result document.

Instance files::

    # comment
    n R
    <penalty-spec> <k> v1 v2 ... vk      (R lines, node ids 1-indexed)

with penalty specs dlin(d) | clique | sqrt | pow(p) | vals(g0,...,gk) |
symvals(h0,...,hr).
"""

import math
import re
from typing import Iterator, List, Optional, Tuple

import torch

from .dsfm import Component, DSFMInstance, Solution
from .errors import InstanceParseError, ValidationError
from .penalties import Clique, DeltaLinear, ExplicitAsym, ExplicitSym, Penalty, Pow, Sqrt
from .utils import bitset_to_indices

SCHEMA = "sparse-card/1"

_SPEC_RE = re.compile(r"^([a-z]+)(?:\((.*)\))?$")
_TOKEN_RE = re.compile(r"\S+")

_NO_ARGS = {"clique": Clique, "sqrt": Sqrt}


def _parse_float(text: str, line: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InstanceParseError(line, column, f"expected a number, got {text!r}")
    if not math.isfinite(value):
        raise InstanceParseError(line, column, f"expected a finite number, got {text!r}")
    return value


def _parse_int(text: str, line: int, column: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InstanceParseError(line, column, f"expected an integer {what}, got {text!r}")


def parse_penalty(spec: str, line: int = 1, column: int = 1) -> Penalty:
    m = _SPEC_RE.match(spec.strip())
    if m is None:
        raise InstanceParseError(line, column, f"malformed penalty spec {spec!r}")
    name, body = m.group(1), m.group(2)

    if name in _NO_ARGS:
        if body is not None:
            raise InstanceParseError(line, column, f"{name} takes no arguments")
        return _NO_ARGS[name]()

    if body is None:
        raise InstanceParseError(line, column, f"{name} needs arguments, e.g. {name}(...)")
    args = [a.strip() for a in body.split(",")]
    arg_col = column + len(name) + 1
    values = []
    for a in args:
        values.append(_parse_float(a, line, arg_col))
        arg_col += len(a) + 1

    try:
        if name == "dlin":
            if len(values) != 1:
                raise InstanceParseError(line, column, "dlin takes exactly one argument")
            return DeltaLinear(values[0])
        if name == "pow":
            if len(values) != 1:
                raise InstanceParseError(line, column, "pow takes exactly one argument")
            return Pow(values[0])
        if name == "vals":
            return ExplicitAsym(tuple(values))
        if name == "symvals":
            return ExplicitSym(tuple(values))
    except InstanceParseError:
        raise
    except ValidationError as e:
        raise InstanceParseError(line, column, str(e))
    raise InstanceParseError(line, column, f"unknown penalty {name!r}")


def format_penalty(p: Penalty) -> str:
    return p.spec()


def _content_lines(text: str) -> Iterator[Tuple[int, List[Tuple[int, str]]]]:
    """(line number, [(column, token), ...]) for every non-blank, non-comment line."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = [(m.start() + 1, m.group()) for m in _TOKEN_RE.finditer(raw)]
        # Rejoin a penalty spec written with spaces after its commas.
        if "(" in tokens[0][1] and not tokens[0][1].endswith(")"):
            end = next((j for j, (_, tok) in enumerate(tokens) if tok.endswith(")")), None)
            if end is None:
                raise InstanceParseError(lineno, tokens[0][0], "unterminated penalty spec")
            spec = "".join(tok for _, tok in tokens[: end + 1])
            tokens = [(tokens[0][0], spec)] + tokens[end + 1:]
        yield lineno, tokens


def parse_instance(text: str) -> DSFMInstance:
    lines = _content_lines(text)
    header = next(lines, None)
    if header is None:
        raise InstanceParseError(1, 1, "missing header line 'n R'")
    lineno, tokens = header
    if len(tokens) != 2:
        raise InstanceParseError(lineno, tokens[0][0], "header must be 'n R'")
    n = _parse_int(tokens[0][1], lineno, tokens[0][0], "ground set size")
    R = _parse_int(tokens[1][1], lineno, tokens[1][0], "component count")
    if n < 1:
        raise InstanceParseError(lineno, tokens[0][0], f"ground set size must be positive, got {n}")
    if R < 0:
        raise InstanceParseError(lineno, tokens[1][0], f"component count must be nonnegative, got {R}")

    comps = []
    last_line = lineno
    for lineno, tokens in lines:
        last_line = lineno
        if len(comps) == R:
            raise InstanceParseError(lineno, tokens[0][0], f"more component lines than the declared {R}")
        comps.append(_parse_component(lineno, tokens, n))
    if len(comps) != R:
        raise InstanceParseError(last_line + 1, 1, f"expected {R} component lines, found {len(comps)}")
    return DSFMInstance(n, tuple(comps))


def _parse_component(lineno: int, tokens: List[Tuple[int, str]], n: int) -> Component:
    spec_col, spec = tokens[0]
    if len(tokens) < 2:
        raise InstanceParseError(lineno, spec_col, "component line needs '<penalty> <k> v1 ... vk'")
    penalty = parse_penalty(spec, lineno, spec_col)
    k_col, k_text = tokens[1]
    k = _parse_int(k_text, lineno, k_col, "support size")
    ids = tokens[2:]
    if k < 1:
        raise InstanceParseError(lineno, k_col, f"support size must be positive, got {k}")
    if len(ids) != k:
        raise InstanceParseError(lineno, k_col, f"support size {k} but {len(ids)} node ids listed")

    support = []
    for col, text in ids:
        v = _parse_int(text, lineno, col, "node id")
        if not 1 <= v <= n:
            raise InstanceParseError(lineno, col, f"node id {v} outside [1, {n}]")
        support.append(v - 1)
    if len(set(support)) != k:
        raise InstanceParseError(lineno, ids[0][0], "node ids must be distinct")

    try:
        return Component(tuple(sorted(support)), penalty)
    except ValidationError as e:
        raise InstanceParseError(lineno, spec_col, str(e))


def format_instance(inst: DSFMInstance) -> str:
    out = [f"{inst.n} {len(inst.components)}"]
    for comp in inst.components:
        ids = " ".join(str(v + 1) for v in comp.support)
        out.append(f"{format_penalty(comp.penalty)} {comp.k} {ids}")
    return "\n".join(out) + "\n"


# -----------------------------------------------------------------------------
# Results


def _finite_or_none(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def solution_document(sol: Solution, command: str = "solve") -> dict:
    stats = sol.stats
    return {
        "schema": SCHEMA,
        "command": command,
        "membership": [v + 1 for v in sol.indices],
        "objective": sol.objective,
        "shifted_objective": sol.shifted_objective,
        "offset": sol.offset,
        "reduced_cut_value": sol.reduced_cut_value,
        "a_posteriori_ratio": _finite_or_none(sol.a_posteriori_ratio),
        "baseline_ratio": _finite_or_none(sol.baseline_ratio),
        "lower_bound": sol.lower_bound,
        "eps": stats.eps,
        "pieces": list(stats.pieces),
        "paths": list(stats.paths),
        "aux_nodes": list(stats.aux_nodes),
        "nodes": stats.nodes,
        "edges": stats.edges,
        "scale": stats.scale,
        "quantization_bound": stats.quantization_bound,
        "zero_rounded_arcs": stats.zero_rounded_arcs,
        "wall_time_ms": stats.wall_time_ms,
    }


def oracle_document(members: torch.Tensor, value: float, wall_time_ms: float) -> dict:
    """Same schema as solution_document; reduction fields are null."""
    return {
        "schema": SCHEMA,
        "command": "oracle",
        "membership": [v + 1 for v in bitset_to_indices(members)],
        "objective": value,
        "shifted_objective": None,
        "offset": 0.0,
        "reduced_cut_value": None,
        "a_posteriori_ratio": 1.0,
        "baseline_ratio": 1.0,
        "lower_bound": value,
        "eps": 0.0,
        "pieces": None,
        "paths": None,
        "aux_nodes": None,
        "nodes": None,
        "edges": None,
        "scale": None,
        "quantization_bound": 0.0,
        "zero_rounded_arcs": 0,
        "wall_time_ms": wall_time_ms,
    }


SUMMARY_HEADERS = ["eps", "nodes", "edges", "objective", "approx-1", "runtime_ms"]


def summary_row(doc: dict) -> list:
    ratio = doc["a_posteriori_ratio"]
    return [
        doc["eps"], doc["nodes"], doc["edges"], doc["objective"],
        None if ratio is None else ratio - 1.0, doc["wall_time_ms"],
    ]
