"""Communication topologies: random geometric graphs and their evolution."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n_nodes-1.

    ``edges`` holds pairs (i, j) with i < j. ``positions`` is an (n, 2)
    read-only array for geometrically generated graphs, else None.
    """

    n_nodes: int
    edges: frozenset = frozenset()
    positions: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.positions is not None:
            pos = np.array(self.positions, dtype=float).reshape(self.n_nodes, 2)
            pos.setflags(write=False)
            object.__setattr__(self, "positions", pos)

    @property
    def neighbors(self) -> list:
        adj = [[] for _ in range(self.n_nodes)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes))
        if self.edges:
            idx = np.array(sorted(self.edges))
            adj[idx[:, 0], idx[:, 1]] = 1.0
            adj[idx[:, 1], idx[:, 0]] = 1.0
        return adj

    def with_edges(self, edges) -> "Graph":
        return Graph(self.n_nodes, frozenset(edges), self.positions)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def proximity_edges(positions: np.ndarray, radius: float) -> frozenset:
    """Pairs of points strictly closer than ``radius``."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    i, j = np.nonzero(np.triu(dist < radius, k=1))
    return frozenset(zip(i.tolist(), j.tolist()))


def is_connected(g: Graph) -> bool:
    seen = np.zeros(g.n_nodes, dtype=bool)
    seen[0] = True
    adj = g.neighbors
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def random_geometric(n, side, radius, seed=None, max_retries=1000, connected=True):
    """Uniform points in [0, side]^2, linked when closer than ``radius``.

    With ``connected`` the draw is repeated until the graph is connected,
    giving up after ``max_retries`` attempts.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if side <= 0 or radius <= 0:
        raise ValueError("side and radius must be positive")
    rng = _as_rng(seed)
    attempts = max_retries if connected else 1
    for _ in range(attempts):
        pos = rng.uniform(0.0, side, size=(n, 2))
        g = Graph(n, proximity_edges(pos, radius), pos)
        if not connected or is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected graph with n={n}, side={side}, radius={radius} "
        f"after {max_retries} attempts"
    )


class Scenario(enum.Enum):
    FIXED = "fixed"
    LINK_FAILURE = "linkfail"
    MOTION = "motion"
    RANDOM = "random"

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        aliases = {
            "fixed": cls.FIXED,
            "linkfail": cls.LINK_FAILURE,
            "linkfailure": cls.LINK_FAILURE,
            "motion": cls.MOTION,
            "motionevolution": cls.MOTION,
            "random": cls.RANDOM,
            "randomnetwork": cls.RANDOM,
        }
        key = text.strip().lower().replace("_", "").replace("-", "")
        if key not in aliases:
            raise ValueError(f"unknown scenario {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class ScenarioConfig:
    kind: Scenario = Scenario.FIXED
    failure_prob: float = 0.05
    step_size: float = 5.0
    side: float = 80.0
    radius: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.failure_prob <= 1.0:
            raise ValueError("failure_prob must lie in [0, 1]")
        if self.side <= 0 or self.radius <= 0:
            raise ValueError("side and radius must be positive")
        if self.step_size < 0:
            raise ValueError("step_size must be nonnegative")


def evolve(g: Graph, cfg: ScenarioConfig, round: int, rng) -> Graph:
    """Topology used at communication round ``round``.

    For LINK_FAILURE pass the base graph every round (failures are drawn
    afresh each round); for MOTION pass the previous round's graph.
    """
    rng = _as_rng(rng)
    kind = cfg.kind
    if kind is Scenario.FIXED:
        return g
    if kind is Scenario.LINK_FAILURE:
        edges = sorted(g.edges)
        keep = rng.random(len(edges)) >= cfg.failure_prob
        return g.with_edges(e for e, k in zip(edges, keep) if k)
    if kind is Scenario.MOTION:
        if g.positions is None:
            raise ValueError("motion scenario needs node positions")
        n = g.n_nodes
        # uniform displacement in a disc of radius step_size
        r = cfg.step_size * np.sqrt(rng.random(n))
        theta = rng.uniform(0.0, 2 * np.pi, n)
        step = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
        pos = np.clip(g.positions + step, 0.0, cfg.side)
        return Graph(n, proximity_edges(pos, cfg.radius), pos)
    if kind is Scenario.RANDOM:
        return random_geometric(g.n_nodes, cfg.side, cfg.radius, rng, connected=False)
    raise ValueError(f"unhandled scenario {kind}")


def write_edgelist(g: Graph, path) -> None:
    lines = [str(g.n_nodes)]
    lines += [f"{i} {j}" for i, j in sorted(g.edges)]
    if g.positions is not None:
        lines += [f"# {x!r} {y!r}" for x, y in g.positions.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Graph:
    n = None
    edges, pos = [], []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            x, y = line[1:].split()
            pos.append((float(x), float(y)))
        elif n is None:
            n = int(line)
        else:
            i, j = line.split()
            edges.append((int(i), int(j)))
    if n is None:
        raise ValueError(f"{path}: missing node count")
    if pos and len(pos) != n:
        raise ValueError(f"{path}: expected {n} positions, got {len(pos)}")
    return Graph(n, frozenset(edges), np.array(pos) if pos else None)
