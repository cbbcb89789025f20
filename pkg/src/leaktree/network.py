"""Immutable tree model of a distribution network and the graph queries the
localizer needs: leaves, unique paths, the branches hanging off a vertex and
the leaves on one side of a pipe.

Vertices are the dense integers ``0..n-1``. Pipes are stored undirected with
``start < end``; a signed pipe flow is positive when water moves from
``start`` to ``end``.
"""

from __future__ import annotations

import numbers
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidNetworkError, PreconditionError
from .hydraulics import PipeGeometry


@dataclass(frozen=True)
class Pipe:
    start: int
    end: int
    geometry: PipeGeometry

    def other(self, v: int) -> int:
        if v == self.start:
            return self.end
        if v == self.end:
            return self.start
        raise KeyError(f"vertex {v} is not an endpoint of pipe {self.start}-{self.end}")

    @property
    def length(self) -> float:
        return self.geometry.length


def validate(num_vertices: int, edges: Iterable[tuple[int, int]]) -> list[str]:
    """Check that ``edges`` form a tree on ``num_vertices`` vertices.

    Violations are returned as data; an empty list means the graph is a valid
    tree. Geometry is checked when pipes are built, not here.
    """
    edges = list(edges)
    problems = []
    if num_vertices < 2:
        problems.append(f"network needs at least 2 vertices, got {num_vertices}")
    seen = set()
    clean = []
    for k, (i, j) in enumerate(edges):
        if not (0 <= i < num_vertices and 0 <= j < num_vertices):
            problems.append(f"pipe {k} ({i}-{j}): unknown vertex")
            continue
        if i == j:
            problems.append(f"pipe {k} ({i}-{j}): self-loop")
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            problems.append(f"pipe {k} ({i}-{j}): parallel pipe")
            continue
        seen.add(key)
        clean.append(key)

    # union-find detects both cycles and disconnection
    parent = list(range(max(num_vertices, 0)))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    cyclic = []
    for i, j in clean:
        ri, rj = find(i), find(j)
        if ri == rj:
            cyclic.append((i, j))
        else:
            parent[ri] = rj
    if cyclic:
        problems.append("cycle: closing pipes " + ", ".join(f"{i}-{j}" for i, j in cyclic))
    if num_vertices >= 1 and len({find(v) for v in range(num_vertices)}) > 1:
        problems.append("disconnected: graph has more than one component")
    return problems


class Network:
    """A tree of junctions joined by pipes.

    Parameters
    ----------
    num_vertices:
        Vertex ids are ``0..num_vertices-1``.
    pipes:
        ``(i, j, geometry)`` triples. Endpoints are reordered so ``i < j``;
        a pipe's index in this sequence is its edge id.

    Raises
    ------
    InvalidNetworkError
        If the graph is not a tree.
    """

    def __init__(self, num_vertices: int, pipes: Sequence[tuple[int, int, PipeGeometry]]):
        problems = validate(num_vertices, [(i, j) for i, j, _ in pipes])
        if problems:
            raise InvalidNetworkError(problems)
        self._n = int(num_vertices)
        self._pipes = tuple(Pipe(min(i, j), max(i, j), g) for i, j, g in pipes)
        adj = [[] for _ in range(self._n)]
        self._edge_index = {}
        for k, p in enumerate(self._pipes):
            adj[p.start].append((p.end, k))
            adj[p.end].append((p.start, k))
            self._edge_index[(p.start, p.end)] = k
        self._adj = tuple(tuple(sorted(a)) for a in adj)
        self._leaves = tuple(v for v in range(self._n) if len(self._adj[v]) == 1)

    def __eq__(self, other):
        return isinstance(other, Network) and self._n == other._n and self._pipes == other._pipes

    def __hash__(self):
        return hash((self._n, self._pipes))

    def __repr__(self):
        return f"Network(num_vertices={self._n}, pipes={len(self._pipes)})"

    @property
    def num_vertices(self) -> int:
        return self._n

    @property
    def vertices(self) -> range:
        return range(self._n)

    @property
    def pipes(self) -> tuple[Pipe, ...]:
        return self._pipes

    @property
    def leaves(self) -> tuple[int, ...]:
        """Degree-one vertices in ascending order."""
        return self._leaves

    def is_leaf(self, v: int) -> bool:
        return len(self.neighbors(v)) == 1

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def neighbors(self, v: int) -> tuple[tuple[int, int], ...]:
        """``(neighbor, edge id)`` pairs sorted by neighbor id."""
        self._check_vertex(v)
        return self._adj[v]

    def edge_id(self, i: int, j: int) -> int:
        try:
            return self._edge_index[(min(i, j), max(i, j))]
        except KeyError:
            raise PreconditionError(f"vertices {i} and {j} are not adjacent") from None

    def leaf_pipe(self, leaf: int) -> int:
        nbrs = self.neighbors(leaf)
        if len(nbrs) != 1:
            raise PreconditionError(f"vertex {leaf} is not a leaf")
        return nbrs[0][1]

    def _check_vertex(self, v):
        if not (isinstance(v, numbers.Integral) and 0 <= v < self._n):
            raise KeyError(f"unknown vertex {v!r}")

    def parents_from(self, root: int) -> tuple[dict[int, int], list[int]]:
        """BFS from ``root``: parent map (root maps to -1) and visit order."""
        self._check_vertex(root)
        parent = {root: -1}
        order = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w, _ in self._adj[u]:
                if w not in parent:
                    parent[w] = u
                    order.append(w)
                    queue.append(w)
        return parent, order

    def path(self, a: int, b: int) -> list[int]:
        """The unique simple path from ``a`` to ``b``, both included."""
        self._check_vertex(a)
        self._check_vertex(b)
        parent, _ = self.parents_from(b)
        out = [a]
        while out[-1] != b:
            out.append(parent[out[-1]])
        return out

    def branch(self, w: int, b: int) -> frozenset[int]:
        """Vertices reached from ``w`` through its neighbor ``b``, with ``w`` itself."""
        self.edge_id(w, b)
        seen = {w, b}
        stack = [b]
        while stack:
            u = stack.pop()
            for x, _ in self._adj[u]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return frozenset(seen)

    def subtrees_at(self, w: int) -> list[tuple[int, frozenset[int]]]:
        """One ``(neighbor, vertex set)`` entry per branch of the non-leaf ``w``.

        The sets overlap exactly in ``{w}`` and together cover every vertex.
        """
        if self.is_leaf(w):
            raise PreconditionError(f"vertex {w} is a leaf; subtrees need a junction")
        return [(b, self.branch(w, b)) for b, _ in self.neighbors(w)]

    def leaves_behind(self, s: int, t: int) -> tuple[int, ...]:
        """Leaves whose path to ``s`` avoids its neighbor ``t``.

        These are the leaves on ``s``'s side of pipe ``(s, t)``; the sum of
        their inflows is the flow from ``s`` into ``t`` when nothing leaks on
        that side.
        """
        self.edge_id(s, t)
        side = self.branch(t, s)
        return tuple(v for v in self._leaves if v in side and v != t)
