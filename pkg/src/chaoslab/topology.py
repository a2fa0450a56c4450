"""Index sets and graphs underlying the model families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .disorder import SeedSpec
from .errors import CapacityError

# Practical cap on vertex count for lattice construction.
MAX_VERTICES = 2**26
# Cap on materialized tuple families (N^p); beyond this we refuse.
MAX_TUPLE_FAMILY = 2**20


@dataclass(frozen=True)
class Graph:
    """Finite undirected graph; edges stored canonically with i < j."""

    vertex_count: int
    edges: tuple

    def __post_init__(self):
        if self.vertex_count <= 0:
            raise ValueError("vertex_count must be positive")
        seen = set()
        for (i, j) in self.edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.vertex_count and 0 <= j < self.vertex_count):
                raise ValueError(f"edge ({i},{j}) out of range")
            if i > j:
                raise ValueError(f"edge ({i},{j}) not in canonical i<j order")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _canonical(edges) -> tuple:
    canon = sorted({(min(i, j), max(i, j)) for (i, j) in edges})
    return tuple(canon)


def lattice_graph(dims: Sequence[int], periodic: bool = False) -> Graph:
    """Nearest-neighbor graph on the box prod [0, dims_i), optionally wrapped."""
    dims = list(dims)
    if not dims:
        raise ValueError("dims must be non-empty")
    if any(d <= 0 for d in dims):
        raise ValueError("all dims must be positive")
    n = int(np.prod(dims))
    if n > MAX_VERTICES:
        raise CapacityError(f"{n} vertices exceeds cap {MAX_VERTICES}")

    strides = np.cumprod([1] + dims[:-1])

    def site(coord):
        return int(sum(c * s for c, s in zip(coord, strides)))

    edges = []
    for coord in itertools.product(*(range(d) for d in dims)):
        for axis, d in enumerate(dims):
            if coord[axis] + 1 < d:
                nbr = list(coord)
                nbr[axis] += 1
                edges.append((site(coord), site(nbr)))
            elif periodic and d > 1:
                nbr = list(coord)
                nbr[axis] = 0
                edges.append((site(coord), site(nbr)))
    return Graph(vertex_count=n, edges=_canonical(edges))


def complete_graph(n: int) -> Graph:
    """All n(n-1)/2 unordered pairs."""
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    return Graph(vertex_count=n,
                 edges=tuple((i, j) for i in range(n) for j in range(i + 1, n)))


@dataclass(frozen=True)
class IndexFamily:
    """A finite index set E together with how its members are interpreted.

    kind is one of "graph_edges", "p_tuples", "diluted_clauses", "sites";
    members is the materialized tuple of index labels (site tuples).
    """

    kind: str
    cardinality: int
    members: tuple
    n_sites: int

    def __post_init__(self):
        if self.cardinality != len(self.members):
            raise ValueError("cardinality does not match member count")


def graph_edge_family(graph: Graph) -> IndexFamily:
    return IndexFamily(kind="graph_edges", cardinality=graph.edge_count,
                       members=graph.edges, n_sites=graph.vertex_count)


def site_family(n_sites: int) -> IndexFamily:
    return IndexFamily(kind="sites", cardinality=n_sites,
                       members=tuple((i,) for i in range(n_sites)),
                       n_sites=n_sites)


def p_tuple_family(n: int, p: int) -> IndexFamily:
    """All N^p ordered index tuples."""
    if n <= 0 or p <= 0:
        raise ValueError("n and p must be positive")
    if n**p > MAX_TUPLE_FAMILY:
        raise CapacityError(f"N^p = {n**p} exceeds cap {MAX_TUPLE_FAMILY}")
    members = tuple(itertools.product(range(n), repeat=p))
    return IndexFamily(kind="p_tuples", cardinality=n**p,
                       members=members, n_sites=n)


def diluted_clauses(n: int, lam: float, p: int, seed: SeedSpec) -> IndexFamily:
    """Poisson(lam*n) many p-clauses of i.i.d. uniform site indices."""
    if n <= 0 or p <= 0:
        raise ValueError("n and p must be positive")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rng = seed.rng()
    count = int(rng.poisson(lam * n))
    table = rng.integers(0, n, size=(count, p))
    members = tuple(tuple(int(v) for v in row) for row in table)
    return IndexFamily(kind="diluted_clauses", cardinality=count,
                       members=members, n_sites=n)


def write_graph(graph: Graph, path) -> None:
    """Text edge-list format: header "vertices <n>", then one "i j" per line."""
    with open(path, "w") as fh:
        fh.write(f"vertices {graph.vertex_count}\n")
        for (i, j) in graph.edges:
            fh.write(f"{i} {j}\n")


def read_graph(path) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "vertices":
            raise ValueError("expected header line 'vertices <n>'")
        n = int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j = (int(v) for v in line.split())
            edges.append((i, j))
    return Graph(vertex_count=n, edges=_canonical(edges))
