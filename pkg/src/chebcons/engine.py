"""Consensus iterations: Chebyshev (fixed and switching) and three baselines.

Every method is a linear recurrence in the weight matrix, so the engine
advances a block of initial conditions (one per column) together and
splits the result into one trace per column.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .cheby_core import ChebyParams, t_ratios
from .graphs import Graph, ScenarioConfig, Scenario, evolve
from .weights import WeightKind, WeightMatrix, build_weights

DIVERGENCE_THRESHOLD = 1e9
STATE_BUDGET = 10**7


class Method(enum.Enum):
    CHEBYSHEV = "cheby"
    POWER = "power"
    NEWTON2 = "newton2"
    FIXED_GAIN = "fixedgain"


@dataclass(frozen=True)
class MethodSpec:
    kind: Method
    params: Optional[ChebyParams] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.kind is Method.CHEBYSHEV and self.params is None:
            raise ValueError("Chebyshev needs ChebyParams")
        if self.kind is Method.NEWTON2:
            if self.alpha is None or not self.alpha < 1.0:
                raise ValueError("Newton2 needs alpha < 1")
        if self.kind is Method.FIXED_GAIN and self.beta is None:
            raise ValueError("fixed-gain recurrence needs beta")

    @classmethod
    def chebyshev(cls, lambda_m: float, lambda_M: float) -> "MethodSpec":
        return cls(Method.CHEBYSHEV, params=ChebyParams(lambda_m, lambda_M))

    @classmethod
    def power(cls) -> "MethodSpec":
        return cls(Method.POWER)

    @classmethod
    def newton2(cls, lambda_2: float, lambda_N: float) -> "MethodSpec":
        return cls(Method.NEWTON2, alpha=0.5 * (lambda_2 + lambda_N))

    @classmethod
    def fixed_gain(cls, lambda_2: float) -> "MethodSpec":
        return cls(Method.FIXED_GAIN, beta=optimal_beta(lambda_2))


def optimal_beta(lambda_2: float) -> float:
    return 2.0 / (1.0 + math.sqrt(1.0 - lambda_2 * lambda_2))


class SwitchingMatrices:
    """Per-round weight matrices A(1), A(2), ... for a switching scenario.

    Matrices are generated lazily from ``cfg.seed`` and cached, so every
    method run against the same instance sees the same topology changes.
    """

    def __init__(self, base: Graph, cfg: ScenarioConfig, weights=WeightKind.LOCAL_DEGREE,
                 graph_fn: Optional[Callable] = None):
        self.base = base
        self.cfg = cfg
        self.kind = WeightKind.parse(weights) if isinstance(weights, str) else weights
        self.n = base.n_nodes
        self._rng = np.random.default_rng(cfg.seed)
        self._graph_fn = graph_fn
        self._graphs: list = []
        self._mats: list = []

    @property
    def symmetric(self) -> bool:
        return self.kind is not WeightKind.NONSYMMETRIC

    def _next_graph(self, n: int) -> Graph:
        if self._graph_fn is not None:
            return self._graph_fn(self.base, n, self._rng)
        prev = self._graphs[-1] if self._graphs else self.base
        src = self.base if self.cfg.kind is Scenario.LINK_FAILURE else prev
        return evolve(src, self.cfg, n, self._rng)

    def graph(self, n: int) -> Graph:
        while len(self._graphs) < n:
            self._graphs.append(self._next_graph(len(self._graphs) + 1))
            self._mats.append(None)
        return self._graphs[n - 1]

    def at(self, n: int) -> np.ndarray:
        """Weight matrix for round n >= 1."""
        self.graph(n)
        if self._mats[n - 1] is None:
            self._mats[n - 1] = build_weights(self.kind, self._graphs[n - 1]).entries
        return self._mats[n - 1]


def _fixed_matrix(source):
    if isinstance(source, SwitchingMatrices):
        return None
    return np.asarray(source, dtype=float)


def _matrix_getter(source):
    a = _fixed_matrix(source)
    if a is not None:
        return lambda n: a
    return source.at


def _source_size(source) -> int:
    if isinstance(source, SwitchingMatrices):
        return source.n
    return np.asarray(source).shape[0]


def left_perron_vector(a, tol: float = 1e-10, max_iter: int = 10**6) -> np.ndarray:
    """Left eigenvector for eigenvalue 1 by power iteration on A^T, sum-normalised."""
    at = np.asarray(a, dtype=float).T
    w = np.full(at.shape[0], 1.0 / at.shape[0])
    for _ in range(max_iter):
        w_next = at @ w
        w_next /= w_next.sum()
        if np.abs(at @ w_next - w_next).max() < tol:
            return w_next
        w = w_next
    raise RuntimeError("left eigenvector power iteration did not converge")


def consensus_value(source, x0):
    """Limit value w1^T x0 / w1^T 1 (the mean when the weights are symmetric).

    ``x0`` may be a vector or an (N, K) block; a block gives K values.
    """
    x0 = np.asarray(x0, dtype=float)
    a = _fixed_matrix(source)
    if a is None:
        if not source.symmetric:
            raise ValueError("consensus value undefined for switching non-symmetric weights")
        return x0.mean(axis=0)
    if np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        return x0.mean(axis=0)
    w = left_perron_vector(a)
    return w @ x0


@dataclass
class ConsensusTrace:
    errors: list
    rounds_to_tol: dict
    diverged: bool = False
    diverged_at: Optional[int] = None
    comm_rounds: int = 0
    target: float = float("nan")
    states: Optional[list] = None
    disagreement: Optional[list] = None

    def reached(self, tol: float) -> bool:
        return self.rounds_to_tol.get(tol) is not None


@dataclass
class ConsensusRun:
    method: MethodSpec
    source: object  # fixed matrix (array / WeightMatrix) or SwitchingMatrices
    x0: np.ndarray
    tol: float | Sequence[float] = 1e-5
    max_rounds: int = 3000
    stop: str = "error"  # or "disagreement"
    stop_at_tol: bool = True
    keep_states: bool = False

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        tols = [self.tol] if np.isscalar(self.tol) else list(self.tol)
        if not tols or any(t <= 0 for t in tols):
            raise ValueError("tolerances must be positive")
        if self.x0.shape[0] != _source_size(self.source):
            raise ValueError("x0 length does not match matrix size")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        if self.stop not in ("error", "disagreement"):
            raise ValueError(f"unknown stopping rule {self.stop!r}")

    @property
    def tolerances(self) -> list:
        tols = [self.tol] if np.isscalar(self.tol) else list(self.tol)
        return sorted((float(t) for t in tols), reverse=True)


class _Recorder:
    """Per-column bookkeeping of errors, tolerance hits and divergence."""

    def __init__(self, run: ConsensusRun, x0: np.ndarray, target: np.ndarray):
        self.k = x0.shape[1]
        self.tols = run.tolerances
        self.target = target
        self.stop_rule = run.stop
        self.stop_at_tol = run.stop_at_tol
        n = x0.shape[0]
        self.keep = run.keep_states and n * (run.max_rounds + 1) <= STATE_BUDGET
        self.errors = [[] for _ in range(self.k)]
        self.disagree = [[] for _ in range(self.k)] if run.stop == "disagreement" else None
        self.states = [[] for _ in range(self.k)] if self.keep else None
        self.hits = [dict.fromkeys(self.tols) for _ in range(self.k)]
        self.active = np.ones(self.k, dtype=bool)
        self.diverged_at = [None] * self.k
        self.rounds = [0] * self.k

    def record(self, n: int, x: np.ndarray, check_tol: bool = True) -> None:
        with np.errstate(invalid="ignore", over="ignore"):
            err = np.abs(x - self.target).max(axis=0)
            spread = x.max(axis=0) - x.min(axis=0)
        for j in np.nonzero(self.active)[0]:
            e = float(err[j])
            self.errors[j].append(e)
            self.rounds[j] = n
            if self.keep:
                self.states[j].append(x[:, j].copy())
            metric = e
            if self.disagree is not None:
                self.disagree[j].append(float(spread[j]))
                metric = float(spread[j])
            if not math.isfinite(e) or e > DIVERGENCE_THRESHOLD:
                self.diverged_at[j] = n
                self.active[j] = False
                continue
            if check_tol:
                hits = self.hits[j]
                for t in self.tols:
                    if hits[t] is None and metric < t:
                        hits[t] = n
                if self.stop_at_tol and hits[self.tols[-1]] is not None:
                    self.active[j] = False

    def traces(self) -> list:
        out = []
        for j in range(self.k):
            out.append(
                ConsensusTrace(
                    errors=self.errors[j],
                    rounds_to_tol=dict(self.hits[j]),
                    diverged=self.diverged_at[j] is not None,
                    diverged_at=self.diverged_at[j],
                    comm_rounds=self.rounds[j],
                    target=float(self.target[j]),
                    states=self.states[j] if self.keep else None,
                    disagreement=self.disagree[j] if self.disagree is not None else None,
                )
            )
        return out


def run_block(run: ConsensusRun) -> list:
    """Run ``run`` with ``x0`` of shape (N,) or (N, K); one trace per column."""
    x0 = run.x0.reshape(run.x0.shape[0], -1)
    source = run.source
    spec = run.method
    if spec.kind is Method.NEWTON2 and isinstance(source, SwitchingMatrices):
        raise ValueError("Newton2 is defined for a fixed matrix only")
    target = np.broadcast_to(consensus_value(source, x0), (x0.shape[1],)).astype(float)
    rec = _Recorder(run, x0, target)
    rec.record(0, x0)
    mat = _matrix_getter(source)
    step = _STEPPERS[spec.kind](spec, mat, x0)
    n = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while rec.active.any() and n < run.max_rounds:
            n += 1
            x = step(n)
            # zero out finished columns so they cannot overflow
            x[:, ~rec.active] = 0.0
            rec.record(n, x, check_tol=spec.kind is not Method.NEWTON2 or n % 2 == 0)
    return rec.traces()


def _power_stepper(spec, mat, x0):
    state = {"x": x0.copy()}

    def step(n):
        state["x"] = mat(n) @ state["x"]
        return state["x"]

    return step


def _newton2_stepper(spec, mat, x0):
    # N2(A) = M^2 with M = (A - alpha I)/(1 - alpha); one factor per round
    alpha = spec.alpha
    scale = 1.0 / (1.0 - alpha)
    state = {"x": x0.copy()}

    def step(n):
        x = state["x"]
        state["x"] = (mat(n) @ x - alpha * x) * scale
        return state["x"]

    return step


def _fixed_gain_stepper(spec, mat, x0):
    beta = spec.beta
    state = {"prev": None, "x": x0.copy()}

    def step(n):
        x = state["x"]
        if n == 1:
            new = mat(n) @ x
        else:
            new = beta * (mat(n) @ x) + (1.0 - beta) * state["prev"]
        state["prev"], state["x"] = x, new
        return new

    return step


def _cheby_stepper(spec, mat, x0):
    c, d = spec.params.c, spec.params.d
    ratios = t_ratios(spec.params.shift)
    state = {"prev": None, "x": x0.copy()}

    def step(n):
        q, r = next(ratios)
        # T_{n-1}/T_n and T_{n-2}/T_n stay in (0, 1) because c - d > 1
        assert 0.0 < q < 1.0 and 0.0 <= r < 1.0, (q, r)
        x = state["x"]
        y = c * (mat(n) @ x) - d * x
        if n == 1:
            new = q * y
        else:
            new = 2.0 * q * y - r * state["prev"]
        state["prev"], state["x"] = x, new
        return new

    return step


_STEPPERS = {
    Method.POWER: _power_stepper,
    Method.NEWTON2: _newton2_stepper,
    Method.FIXED_GAIN: _fixed_gain_stepper,
    Method.CHEBYSHEV: _cheby_stepper,
}


def _single(run: ConsensusRun, kind: Method) -> ConsensusTrace:
    if run.method.kind is not kind:
        raise ValueError(f"expected a {kind.value} method, got {run.method.kind.value}")
    if run.x0.ndim != 1:
        raise ValueError("x0 must be a vector; use run_block for several columns")
    return run_block(run)[0]


def cheby_run(run: ConsensusRun) -> ConsensusTrace:
    return _single(run, Method.CHEBYSHEV)


def power_run(run: ConsensusRun) -> ConsensusTrace:
    return _single(run, Method.POWER)


def newton2_run(run: ConsensusRun) -> ConsensusTrace:
    return _single(run, Method.NEWTON2)


def fixed_gain_run(run: ConsensusRun) -> ConsensusTrace:
    return _single(run, Method.FIXED_GAIN)


def run_method(run: ConsensusRun) -> ConsensusTrace:
    return _single(run, run.method.kind)


def write_trace_csv(trace: ConsensusTrace, path, states: bool = False) -> None:
    """``round,error`` rows, plus ``x_0..x_{N-1}`` when states are requested and kept."""
    with_states = states and trace.states is not None and len(trace.states) > 0
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        header = ["round", "error"]
        if with_states:
            header += [f"x_{i}" for i in range(len(trace.states[0]))]
        out.writerow(header)
        for n, e in enumerate(trace.errors):
            row = [n, repr(e)]
            if with_states:
                row += [repr(float(v)) for v in trace.states[n]]
            out.writerow(row)
