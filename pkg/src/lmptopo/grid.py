"""Graph-algebraic objects of a DC power network.

Builds incidence matrices, the reactance-weighted Laplacian (full and
reduced), and the injection-to-flow shift-factor map from a line list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class GridError(Exception):
    """Base class for grid construction failures."""


class DisconnectedGridError(GridError):
    """The line list does not form a connected graph."""


class SingularMatrixError(GridError):
    """The reduced Laplacian is numerically singular."""


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    x: float        # series reactance, p.u., > 0
    fmax: float     # flow rating, MW, > 0


@dataclass(frozen=True)
class GridTopology:
    """Bus/line description of a transmission network.

    ``bus_count`` is the total number of buses (reference included).
    Line orientation is from_bus -> to_bus; flows are signed accordingly.
    """

    bus_count: int
    lines: tuple[Line, ...]
    reference_bus: int = 0

    def __post_init__(self):
        n = self.bus_count
        if n < 2:
            raise GridError("need at least two buses")
        if not 0 <= self.reference_bus < n:
            raise GridError(f"reference bus {self.reference_bus} out of range")
        for ln in self.lines:
            if not (0 <= ln.from_bus < n and 0 <= ln.to_bus < n):
                raise GridError(f"line endpoint out of range: {ln}")
            if ln.from_bus == ln.to_bus:
                raise GridError(f"self-loop line: {ln}")
            if ln.x <= 0:
                raise GridError(f"nonpositive reactance: {ln}")
            if ln.fmax <= 0:
                raise GridError(f"nonpositive flow limit: {ln}")
        if not self._connected():
            raise DisconnectedGridError("grid graph is not connected")

    def _connected(self) -> bool:
        n = self.bus_count
        adj: list[list[int]] = [[] for _ in range(n)]
        for ln in self.lines:
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
        seen = [False] * n
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return all(seen)

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def flow_limits(self) -> np.ndarray:
        return np.array([ln.fmax for ln in self.lines])

    def edge_set(self) -> set[tuple[int, int]]:
        """Undirected edge set as sorted bus-index pairs."""
        return {tuple(sorted((ln.from_bus, ln.to_bus))) for ln in self.lines}

    def average_degree(self) -> float:
        return 2.0 * len(self.edge_set()) / self.bus_count

    def replace_lines(self, remove: list[tuple[int, int]],
                      add: list[Line]) -> "GridTopology":
        """Return a copy with the given bus pairs removed and new lines added."""
        drop = {tuple(sorted(p)) for p in remove}
        kept = [ln for ln in self.lines
                if tuple(sorted((ln.from_bus, ln.to_bus))) not in drop]
        if len(kept) != len(self.lines) - len(drop):
            raise GridError(f"lines to remove not all present: {remove}")
        return GridTopology(self.bus_count, tuple(kept) + tuple(add),
                            self.reference_bus)


@dataclass(frozen=True)
class GridMatrices:
    """Immutable matrix bundle derived from a :class:`GridTopology`.

    Shapes: full_incidence L x (N+1), reduced_incidence L x N,
    reactance_diag L x L, reduced_laplacian N x N (positive definite),
    full_laplacian (N+1) x (N+1), shift_factors L x (N+1).
    """

    topology: GridTopology
    full_incidence: np.ndarray
    reduced_incidence: np.ndarray
    reactance_diag: np.ndarray
    reduced_laplacian: np.ndarray
    full_laplacian: np.ndarray
    shift_factors: np.ndarray
    laplacian_inverse: np.ndarray = field(repr=False, default=None)

    @property
    def non_reference_buses(self) -> list[int]:
        r = self.topology.reference_bus
        return [b for b in range(self.topology.bus_count) if b != r]


def build_matrices(topology: GridTopology, cond_cap: float = 1e12) -> GridMatrices:
    """Assemble incidence/Laplacian/shift-factor matrices for a topology.

    Raises SingularMatrixError when the condition number of the reduced
    Laplacian exceeds ``cond_cap``.
    """
    n = topology.bus_count
    nl = topology.line_count
    ref = topology.reference_bus

    A_full = np.zeros((nl, n))
    for l, ln in enumerate(topology.lines):
        A_full[l, ln.from_bus] = 1.0
        A_full[l, ln.to_bus] = -1.0
    D = np.diag([1.0 / ln.x for ln in topology.lines])

    keep = [b for b in range(n) if b != ref]
    A_red = A_full[:, keep]

    B_full = A_full.T @ D @ A_full
    B_red = A_red.T @ D @ A_red

    if np.linalg.cond(B_red) > cond_cap:
        raise SingularMatrixError("reduced Laplacian is numerically singular")
    B_inv = np.linalg.inv(B_red)

    T = np.zeros((nl, n))
    T[:, keep] = D @ A_red @ B_inv

    return GridMatrices(
        topology=topology,
        full_incidence=A_full,
        reduced_incidence=A_red,
        reactance_diag=D,
        reduced_laplacian=B_red,
        full_laplacian=B_full,
        shift_factors=T,
        laplacian_inverse=B_inv,
    )


class UnbalancedInjectionsError(GridError):
    """Bus injections do not sum to zero."""


def flows_from_injections(matrices: GridMatrices, injections: np.ndarray,
                          tol: float = 1e-6) -> np.ndarray:
    """Map balanced bus injections (MW, all buses) to signed line flows."""
    p = np.asarray(injections, dtype=float)
    imbalance = abs(p.sum())
    if imbalance > tol * max(1.0, np.abs(p).sum()):
        raise UnbalancedInjectionsError(f"injections sum to {p.sum():g}")
    return matrices.shift_factors @ p


def reduced_to_full_laplacian(B: np.ndarray, reference_bus: int = 0) -> np.ndarray:
    """Embed a reduced Laplacian back into the full one with zero row sums."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0] + 1
    keep = [b for b in range(n) if b != reference_bus]
    full = np.zeros((n, n))
    full[np.ix_(keep, keep)] = B
    row = -B.sum(axis=1)
    full[reference_bus, keep] = row
    full[keep, reference_bus] = row
    full[reference_bus, reference_bus] = -row.sum()
    return full


def topology_from_dict(data: dict) -> GridTopology:
    lines = tuple(Line(int(e["from"]), int(e["to"]), float(e["x"]), float(e["fmax"]))
                  for e in data["lines"])
    return GridTopology(int(data["buses"]), lines, int(data.get("reference", 0)))


def load_grid_file(path) -> GridTopology:
    """Load a grid topology from the JSON grid file format."""
    with open(path) as fh:
        return topology_from_dict(json.load(fh))


def ieee30() -> GridTopology:
    """The bundled IEEE 30-bus topology (41 lines, ratings 16-130 MVA)."""
    text = resources.files("lmptopo.data").joinpath("ieee30_grid.json").read_text()
    return topology_from_dict(json.loads(text))
