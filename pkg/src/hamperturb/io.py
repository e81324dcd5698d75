"""Edge-list and JSON serialisation for graphs, factors and certificates."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError
from .permutation import CycleStructure


class FormatError(ValueError):
    """Malformed input file."""


def parse_edge_list(text: str) -> Graph:
    """Parse ``u v`` lines; ``#`` lines are comments.

    A leading ``n m`` line is read as a header when exactly ``m`` edge lines
    follow and every vertex id is below ``n``; otherwise it is an edge and
    ``n`` is one more than the largest id.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected two integers, got {line!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise FormatError(f"line {lineno}: expected two integers, got {line!r}") from None
    if not rows:
        return Graph.from_edges(0, [])
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)
    if edges.min() < 0:
        raise FormatError("negative vertex id")
    head_n, head_m = rows[0]
    body = edges[1:]
    if head_m == len(body) and (len(body) == 0 or body.max() < head_n):
        n, edges = head_n, body
    else:
        n = int(edges.max()) + 1
    try:
        return Graph.from_edges(n, edges)
    except GraphError as exc:
        raise FormatError(str(exc)) from None


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.num_edges}"]
    lines += [f"{u} {v}" for u, v in g.edges().tolist()]
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))


def parse_factor(doc) -> CycleStructure:
    """``{"n": n, "cycles": [[...], ...]}`` to a cycle structure."""
    if not isinstance(doc, dict) or "n" not in doc or "cycles" not in doc:
        raise FormatError('factor JSON needs keys "n" and "cycles"')
    try:
        return CycleStructure(int(doc["n"]), [list(map(int, c)) for c in doc["cycles"]])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad factor: {exc}") from None


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def read_factor(path) -> CycleStructure:
    return parse_factor(read_json(path))


def parse_certificate(doc) -> list:
    """A bare vertex array, or an object holding one under ``certificate``."""
    if isinstance(doc, dict):
        doc = doc.get("certificate")
    if not isinstance(doc, list):
        raise FormatError("certificate must be a JSON array of vertices")
    return doc


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
