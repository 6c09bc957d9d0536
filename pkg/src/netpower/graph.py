"""Fixed experimental graph: storage, edge-list I/O and synthetic generators."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import pdist

from .errors import CalibrationError, ConfigError, GraphFormatError, SelfLoopError
from .rng import as_key, derive

GENERATORS = ("erdos-renyi", "random-geometric")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    ``edges`` is an ``(m, 2)`` array with ``i < j`` in each row, sorted
    lexicographically and free of duplicates. Use :meth:`from_edges` to build
    one from arbitrary pairs.
    """

    n: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.edges.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, pairs) -> Graph:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise ValueError("n must be non-negative")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ValueError(f"edge endpoint outside 0..{n - 1}")
        loops = pairs[:, 0] == pairs[:, 1]
        if loops.any():
            i = int(pairs[loops][0, 0])
            raise SelfLoopError(f"self-loop at node {i}")
        canon = np.sort(pairs, axis=1)
        canon = np.unique(canon, axis=0) if canon.size else canon.reshape(0, 2)
        return cls(int(n), np.ascontiguousarray(canon))

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def density(self) -> float:
        if self.n < 2:
            return 0.0
        return 2.0 * self.n_edges / (self.n * (self.n - 1))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form with sorted column indices."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.n_edges, dtype=np.int32)
        a = sp.csr_matrix(
            (data, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(self.n, self.n)
        )
        a.sort_indices()
        return a

    @property
    def indptr(self) -> np.ndarray:
        return self.adjacency.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.adjacency.indices

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.diff(self.adjacency.indptr).astype(np.int64)
        d.setflags(write=False)
        return d

    def neighbors(self, i: int) -> np.ndarray:
        self._check_node(i)
        a = self.adjacency
        return a.indices[a.indptr[i] : a.indptr[i + 1]]

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"node {i} out of range for graph with {self.n} nodes")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))


def degree(g: Graph, i: int) -> int:
    g._check_node(i)
    return int(g.degrees[i])


# -- edge-list files ----------------------------------------------------------


_N_DECL = re.compile(r"#\s*n\s*=\s*(\d+)\s*$")


def load_edge_list(path) -> Graph:
    """Read ``i j`` pairs, one per line; ``#`` starts a comment line.

    Node ids are used as given, so ``n = 1 + max id`` unless a comment line
    ``# n=<count>`` declares more nodes (isolated trailing nodes).
    """
    pairs = []
    declared = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                m = _N_DECL.match(line)
                if m:
                    declared = int(m.group(1))
                continue
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected two node ids, got {line!r}", lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"non-integer node id in {line!r}", lineno) from None
            if i < 0 or j < 0:
                raise GraphFormatError(f"negative node id in {line!r}", lineno)
            if i == j:
                raise SelfLoopError(f"self-loop at node {i}", lineno)
            pairs.append((i, j))
    if not pairs:
        if declared:
            return Graph.from_edges(declared, np.zeros((0, 2), dtype=np.int64))
        raise GraphFormatError(f"no edges in {path}")
    arr = np.array(pairs, dtype=np.int64)
    n = int(arr.max()) + 1
    if declared and declared < n:
        raise GraphFormatError(f"header declares n={declared} but node id {n - 1} appears")
    return Graph.from_edges(max(n, declared), arr)


def write_edge_list(g: Graph, path, header: str | None = None) -> None:
    """Write canonical edges (``i < j``, lexicographic order)."""
    path = Path(path)
    lines = []
    if g.n_edges == 0 or int(g.edges.max()) + 1 < g.n:
        lines.append(f"# n={g.n}")  # trailing isolated nodes are not implied by the edges
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{i} {j}" for i, j in g.edges.tolist())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- synthetic graphs -----------------------------------------------------------


@dataclass(frozen=True)
class GraphProfile:
    n: int
    target_density: float
    generator: str = "random-geometric"

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"graph needs at least 2 nodes, got n={self.n}")
        if not 0.0 < self.target_density <= 1.0:
            raise ConfigError(f"target density must lie in (0, 1], got {self.target_density}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")


CALIBRATION_DRAWS = 16
CALIBRATION_MAX_ITER = 64
CALIBRATION_TOL = 0.01
ACCEPT_TOL = 0.10


def _unit_square_points(key, n: int) -> np.ndarray:
    return derive(key).random((n, 2))


def calibrate_radius(n: int, target_density: float, seed) -> float:
    """Connection radius whose mean density over seeded point sets hits the target.

    Bisection on ``r`` over a fixed bank of point sets (common across
    iterations, so mean density is monotone in ``r``). Stops once the
    relative error is below 1%; fails if 10% is not reached.
    """
    key = as_key(seed).child("calibrate")
    sorted_d = [np.sort(pdist(_unit_square_points(key.child("draw", b), n))) for b in range(CALIBRATION_DRAWS)]
    n_pairs = n * (n - 1) / 2

    def mean_density(r: float) -> float:
        return float(np.mean([np.searchsorted(d, r, side="right") / n_pairs for d in sorted_d]))

    lo, hi = 0.0, math.sqrt(2.0)
    best_r, best_err = hi, abs(mean_density(hi) - target_density) / target_density
    for _ in range(CALIBRATION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        dens = mean_density(mid)
        err = abs(dens - target_density) / target_density
        if err < best_err:
            best_r, best_err = mid, err
        if err <= CALIBRATION_TOL:
            break
        if dens < target_density:
            lo = mid
        else:
            hi = mid
    if best_err > ACCEPT_TOL:
        raise CalibrationError(
            f"radius calibration reached relative error {best_err:.3f} > {ACCEPT_TOL} "
            f"for n={n}, density={target_density}"
        )
    return best_r


def random_geometric(n: int, radius: float, seed) -> Graph:
    pts = _unit_square_points(as_key(seed).child("points"), n)
    d = pdist(pts)
    i, j = np.triu_indices(n, k=1)
    keep = d <= radius
    return Graph.from_edges(n, np.column_stack([i[keep], j[keep]]))


def erdos_renyi(n: int, p: float, seed) -> Graph:
    coins = derive(as_key(seed).child("coins")).random(n * (n - 1) // 2)
    i, j = np.triu_indices(n, k=1)
    keep = coins < p
    return Graph.from_edges(n, np.column_stack([i[keep], j[keep]]))


def generate(profile: GraphProfile, seed) -> Graph:
    key = as_key(seed).child("graph")
    if profile.generator == "erdos-renyi":
        return erdos_renyi(profile.n, profile.target_density, key)
    r = calibrate_radius(profile.n, profile.target_density, key)
    return random_geometric(profile.n, r, key)


# -- small fixed graphs used in tests and examples ------------------------------


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int) -> Graph:
    """Star with centre 0 and ``leaves`` leaves."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def empty_graph(n: int) -> Graph:
    return Graph.from_edges(n, np.zeros((0, 2), dtype=np.int64))
