"""Row-stochastic weight matrices built from a graph, plus their validators."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import Graph, is_connected
from .verdict import Verdict

ROW_SUM_TOL = 1e-12
SYM_TOL = 1e-12


class WeightKind(enum.Enum):
    LOCAL_DEGREE = "localdegree"
    BEST_CONSTANT = "bestconstant"
    NONSYMMETRIC = "nonsymmetric"

    @classmethod
    def parse(cls, text: str) -> "WeightKind":
        aliases = {"ld": cls.LOCAL_DEGREE, "bc": cls.BEST_CONSTANT, "ns": cls.NONSYMMETRIC}
        key = text.strip().lower().replace("_", "").replace("-", "")
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def short(self) -> str:
        return {"localdegree": "ld", "bestconstant": "bc", "nonsymmetric": "ns"}[self.value]


@dataclass(frozen=True)
class WeightMatrix:
    entries: np.ndarray
    kind: WeightKind | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.entries, self.entries.T, rtol=0.0, atol=SYM_TOL))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _fill_diagonal(off: np.ndarray) -> np.ndarray:
    a = off.copy()
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, 1.0 - a.sum(axis=1))
    return a


def local_degree_weights(g: Graph) -> WeightMatrix:
    """a_ij = 1 / (1 + max(d_i, d_j)) on edges; the diagonal absorbs the rest."""
    adj = g.adjacency()
    deg = g.degrees
    off = adj / (1.0 + np.maximum(deg[:, None], deg[None, :]))
    return WeightMatrix(_fill_diagonal(off), WeightKind.LOCAL_DEGREE)


def laplacian(g: Graph) -> np.ndarray:
    adj = g.adjacency()
    return np.diag(adj.sum(axis=1)) - adj


def best_constant_weights(g: Graph) -> WeightMatrix:
    """I - alpha L with alpha = 2 / (largest + smallest positive Laplacian eigenvalue).

    If that alpha would push a diagonal entry negative it is reduced to
    1 / max degree and ``meta['alpha_clamped']`` is set.
    """
    if not is_connected(g):
        raise ValueError("best constant weights need a connected graph")
    if g.n_nodes == 1:
        return WeightMatrix(np.ones((1, 1)), WeightKind.BEST_CONSTANT, {"alpha": 0.0})
    lap = laplacian(g)
    mu = np.linalg.eigvalsh(lap)
    alpha_opt = 2.0 / (mu[-1] + mu[1])
    alpha = alpha_opt
    dmax = g.degrees.max()
    clamped = alpha * dmax > 1.0 + 1e-12
    if clamped:
        alpha = 1.0 / dmax
    a = np.eye(g.n_nodes) - alpha * lap
    meta = {"alpha": alpha, "alpha_opt": alpha_opt, "alpha_clamped": bool(clamped)}
    return WeightMatrix(a, WeightKind.BEST_CONSTANT, meta)


def nonsymmetric_weights(g: Graph) -> WeightMatrix:
    """Row i puts 1 / (deg_i + 1) on itself and on each neighbour."""
    adj = g.adjacency() + np.eye(g.n_nodes)
    return WeightMatrix(adj / adj.sum(axis=1, keepdims=True), WeightKind.NONSYMMETRIC)


BUILDERS = {
    WeightKind.LOCAL_DEGREE: local_degree_weights,
    WeightKind.BEST_CONSTANT: best_constant_weights,
    WeightKind.NONSYMMETRIC: nonsymmetric_weights,
}


def build_weights(kind: WeightKind | str, g: Graph) -> WeightMatrix:
    if isinstance(kind, str):
        kind = WeightKind.parse(kind)
    return BUILDERS[kind](g)


def validate_assumption1(w, g: Graph) -> Verdict:
    """Row stochastic, nonzero diagonal, zero outside edges + diagonal."""
    a = np.asarray(w, dtype=float)
    n = g.n_nodes
    if a.shape != (n, n):
        return Verdict(False, f"shape {a.shape} does not match {n} nodes")
    sums = a.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
    if bad.size:
        i = int(bad[0])
        return Verdict(False, f"row sum: row {i} sums to {sums[i]!r}", i)
    diag = np.diag(a)
    bad = np.nonzero(diag == 0.0)[0]
    if bad.size:
        return Verdict(False, f"diagonal: a[{bad[0]},{bad[0]}] is zero", int(bad[0]))
    allowed = g.adjacency().astype(bool) | np.eye(n, dtype=bool)
    bad = np.argwhere((a != 0.0) & ~allowed)
    if bad.size:
        i, j = map(int, bad[0])
        return Verdict(False, f"pattern: a[{i},{j}] nonzero but ({i},{j}) is not an edge", (i, j))
    return Verdict(True)


def validate_assumption2(w, g: Graph, epsilon: float) -> Verdict:
    """Assumption 1 plus symmetry and every nonzero entry >= epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    v = validate_assumption1(w, g)
    if not v:
        return v
    a = np.asarray(w, dtype=float)
    asym = np.abs(a - a.T)
    if asym.max() > SYM_TOL:
        i, j = map(int, np.unravel_index(asym.argmax(), a.shape))
        return Verdict(False, f"symmetry: a[{i},{j}] != a[{j},{i}]", (i, j))
    nz = a != 0.0
    small = np.argwhere(nz & (a < epsilon))
    if small.size:
        i, j = map(int, small[0])
        return Verdict(False, f"degeneracy: a[{i},{j}]={a[i, j]!r} < epsilon={epsilon}", (i, j))
    return Verdict(True)


def dump_csv(w, path) -> None:
    a = np.asarray(w, dtype=float)
    Path(path).write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in a))


def load_csv(path, kind: WeightKind | None = None) -> WeightMatrix:
    rows = [
        [float(v) for v in line.split(",")]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    return WeightMatrix(np.array(rows), kind)
