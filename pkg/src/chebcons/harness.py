"""Monte Carlo experiments over random networks, result tables and CSV output."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cheby_core import ChebyParams
from .engine import (
    ConsensusRun,
    ConsensusTrace,
    Method,
    MethodSpec,
    SwitchingMatrices,
    optimal_beta,
    run_block,
    write_trace_csv,
)
from .graphs import (
    Graph,
    GraphGenerationError,
    Scenario,
    ScenarioConfig,
    random_geometric,
)
from .spectral import (
    Spectrum,
    SwitchingEnvelope,
    eigenvalues,
    optimal_params,
    sym_eigenvalues,
)
from .weights import WeightKind, build_weights, local_degree_weights

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "method",
    "weights",
    "lambda_m",
    "lambda_M",
    "tol",
    "mean_rounds",
    "n_diverged",
    "n_trials",
]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    n_graphs: int = 10
    n_inits: int = 10
    n_nodes: int = 30
    side: float = 80.0
    radius: float = 20.0
    scenario: Scenario = Scenario.FIXED
    failure_prob: float = 0.05
    step_size: float = 5.0
    weight_kinds: tuple = (WeightKind.LOCAL_DEGREE,)
    methods: tuple = ("power", "newton2", "fixedgain", "cheby")
    lambda_m_grid: tuple = ()
    lambda_M_grid: tuple = ()
    tolerances: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    max_rounds: int = 3000
    stop: str = "error"
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        for name in ("n_graphs", "n_inits", "n_nodes", "max_rounds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_nodes < 2:
            raise ConfigError("n_nodes must be >= 2")
        if not self.tolerances or any(t <= 0 for t in self.tolerances):
            raise ConfigError("tolerances must be positive")
        if list(self.tolerances) != sorted(self.tolerances, reverse=True):
            raise ConfigError("tolerances must be sorted descending")
        if self.stop not in ("error", "disagreement"):
            raise ConfigError(f"unknown stopping rule {self.stop!r}")
        try:
            self.scenario_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        switching = self.scenario is not Scenario.FIXED
        for m in self.methods:
            kind, arg = _split_method(m)
            if kind is Method.NEWTON2 and switching:
                raise ConfigError("newton2 needs a fixed topology")
            if arg == "grid" and (not self.lambda_M_grid or (
                    kind is Method.CHEBYSHEV and not self.lambda_m_grid)):
                raise ConfigError(f"method {m!r} needs lambda_m_grid / lambda_M_grid")
        if switching and WeightKind.NONSYMMETRIC in self.weight_kinds:
            raise ConfigError("switching scenarios need symmetric weights")

    def scenario_config(self, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            self.scenario, self.failure_prob, self.step_size, self.side, self.radius, seed
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _strings(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


_PARSERS = {
    "n_graphs": int,
    "n_inits": int,
    "n_nodes": int,
    "side": float,
    "radius": float,
    "scenario": Scenario.parse,
    "failure_prob": float,
    "step_size": float,
    "weight_kinds": lambda t: tuple(WeightKind.parse(v) for v in _strings(t)),
    "methods": _strings,
    "lambda_m_grid": _floats,
    "lambda_M_grid": _floats,
    "tolerances": _floats,
    "max_rounds": int,
    "stop": str.strip,
    "seed": int,
    "max_retries": int,
}


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return dataclasses.replace(base or ExperimentConfig(), **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base)


def format_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(x.value if hasattr(x, "value") else repr(x) if isinstance(x, float) else str(x) for x in v)
        elif hasattr(v, "value"):
            v = v.value
        out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- methods


def _split_method(template: str):
    kind_text, _, arg = template.partition(":")
    try:
        kind = Method(kind_text.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown method {template!r}") from None
    return kind, arg.strip().lower() or "optimal"


def parameter_grid(lambda_m_values, lambda_M_values) -> list:
    """Valid ChebyParams over the Cartesian product, row-major in lambda_m."""
    cells = []
    for lm in lambda_m_values:
        for lM in lambda_M_values:
            if -1.0 < lm < lM < 1.0:
                cells.append(ChebyParams(lm, lM))
    return cells


@dataclass(frozen=True)
class Cell:
    """Row key of a result table; lambda fields are '' when not applicable."""

    method: str
    weights: str
    lambda_m: str = ""
    lambda_M: str = ""


def _fmt(v: float) -> str:
    return format(v, "g")


def expand_methods(cfg: ExperimentConfig, weights: WeightKind):
    """Yield (Cell, resolver) pairs; resolver maps a Spectrum to a MethodSpec."""
    w = weights.short
    for template in cfg.methods:
        kind, arg = _split_method(template)
        if kind is Method.POWER:
            yield Cell("power", w), lambda s: MethodSpec.power()
        elif kind is Method.NEWTON2:
            yield Cell("newton2", w, "optimal", "optimal"), (
                lambda s: MethodSpec.newton2(s.lambda_2, s.lambda_N))
        elif kind is Method.FIXED_GAIN:
            if arg == "grid":
                for lM in cfg.lambda_M_grid:
                    yield Cell("fixedgain", w, "", _fmt(lM)), (
                        lambda s, b=optimal_beta(lM): MethodSpec(Method.FIXED_GAIN, beta=b))
            elif arg == "optimal":
                yield Cell("fixedgain", w, "", "optimal"), lambda s: MethodSpec.fixed_gain(s.lambda_2)
            else:
                lM = float(arg)
                yield Cell("fixedgain", w, "", _fmt(lM)), (
                    lambda s, b=optimal_beta(lM): MethodSpec(Method.FIXED_GAIN, beta=b))
        elif kind is Method.CHEBYSHEV:
            if arg == "grid":
                for p in parameter_grid(cfg.lambda_m_grid, cfg.lambda_M_grid):
                    yield Cell("cheby", w, _fmt(p.lambda_m), _fmt(p.lambda_M)), (
                        lambda s, p=p: MethodSpec(Method.CHEBYSHEV, params=p))
            elif arg == "optimal":
                yield Cell("cheby", w, "optimal", "optimal"), (
                    lambda s: MethodSpec(Method.CHEBYSHEV, params=optimal_params(s)))
            else:
                try:
                    lm, lM = (float(v) for v in arg.split(","))
                except ValueError:
                    raise ConfigError(f"bad Chebyshev parameters {template!r}") from None
                p = ChebyParams(lm, lM)
                yield Cell("cheby", w, _fmt(lm), _fmt(lM)), (
                    lambda s, p=p: MethodSpec(Method.CHEBYSHEV, params=p))


# ---------------------------------------------------------------- results


@dataclass
class CellResult:
    tolerances: tuple
    rounds: dict = field(default_factory=dict)  # tol -> list of int | None
    diverged: list = field(default_factory=list)

    def __post_init__(self):
        for t in self.tolerances:
            self.rounds.setdefault(t, [])

    def add(self, trace: ConsensusTrace) -> None:
        self.diverged.append(trace.diverged)
        for t in self.tolerances:
            r = trace.rounds_to_tol.get(t)
            self.rounds[t].append(None if trace.diverged else r)

    @property
    def n_trials(self) -> int:
        return len(self.diverged)

    @property
    def n_diverged(self) -> int:
        return sum(self.diverged)

    def reached(self, tol: float) -> list:
        return [r for r in self.rounds[tol] if r is not None]

    def mean(self, tol: float) -> float:
        vals = self.reached(tol)
        if not vals:
            return math.inf
        return math.fsum(vals) / len(vals)


@dataclass
class ResultTable:
    tolerances: tuple
    cells: dict = field(default_factory=dict)  # Cell -> CellResult
    n_failed_graphs: int = 0

    def cell(self, key: Cell) -> CellResult:
        if key not in self.cells:
            self.cells[key] = CellResult(self.tolerances)
        return self.cells[key]

    def find(self, method: str, weights: str = "ld", lambda_m: str = "", lambda_M: str = "") -> CellResult:
        return self.cells[Cell(method, weights, lambda_m, lambda_M)]

    def rows(self):
        for key, res in self.cells.items():
            for t in self.tolerances:
                yield key, t, res


def emit_csv(table: ResultTable, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for key, t, res in table.rows():
            mean = res.mean(t)
            out.writerow([
                key.method,
                key.weights,
                key.lambda_m,
                key.lambda_M,
                format(t, "g"),
                "inf" if math.isinf(mean) else format(mean, ".10g"),
                res.n_diverged,
                res.n_trials,
            ])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_trace_plotdata(trace: ConsensusTrace, path, states: bool = True) -> None:
    write_trace_csv(trace, path, states=states)


# ---------------------------------------------------------------- running


def _graph_seeds(seed: int, index: int):
    """Independent seed sequences for the graph, its topology changes and each init."""
    ss = np.random.SeedSequence([seed, index])
    g_ss, scen_ss, init_ss = ss.spawn(3)
    return g_ss, int(scen_ss.generate_state(1)[0]), init_ss


def initial_states(init_ss: np.random.SeedSequence, n_nodes: int, n_inits: int) -> np.ndarray:
    cols = [np.random.default_rng(s).uniform(0.0, 1.0, n_nodes) for s in init_ss.spawn(n_inits)]
    return np.column_stack(cols)


def _run_graph(cfg: ExperimentConfig, index: int):
    """All cells for one random network; returns [(Cell, [trace, ...]), ...] or None."""
    g_ss, scen_seed, init_ss = _graph_seeds(cfg.seed, index)
    try:
        g = random_geometric(
            cfg.n_nodes, cfg.side, cfg.radius, np.random.default_rng(g_ss),
            max_retries=cfg.max_retries,
        )
    except GraphGenerationError as exc:
        log.warning("graph %d skipped: %s", index, exc)
        return None
    x0 = initial_states(init_ss, cfg.n_nodes, cfg.n_inits)
    out = []
    for wk in cfg.weight_kinds:
        w = build_weights(wk, g)
        spectrum = eigenvalues(w)
        if spectrum.complex_eigs:
            log.info("graph %d (%s): complex eigenvalue moduli %s", index, wk.short,
                     [abs(z) for z in spectrum.complex_eigs])
        if cfg.scenario is Scenario.FIXED:
            source = w.entries
        else:
            source = SwitchingMatrices(g, cfg.scenario_config(scen_seed), wk)
        for cell, resolve in expand_methods(cfg, wk):
            run = ConsensusRun(resolve(spectrum), source, x0, cfg.tolerances,
                               cfg.max_rounds, stop=cfg.stop)
            out.append((cell, run_block(run)))
    return out


def _run_graph_star(args):
    return _run_graph(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, order=None) -> ResultTable:
    """Run every graph x init x weights x method cell and aggregate.

    ``order`` permutes the execution order of graphs; aggregation is always
    by graph index, so results do not depend on it.
    """
    indices = list(range(cfg.n_graphs)) if order is None else list(order)
    if sorted(indices) != list(range(cfg.n_graphs)):
        raise ValueError("order must be a permutation of the graph indices")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_graph_star, [(cfg, i) for i in indices]))
    else:
        results = [_run_graph(cfg, i) for i in indices]
    by_index = dict(zip(indices, results))
    table = ResultTable(tuple(cfg.tolerances))
    for i in range(cfg.n_graphs):
        res = by_index[i]
        if res is None:
            table.n_failed_graphs += 1
            continue
        for cell, traces in res:
            agg = table.cell(cell)
            for tr in traces:
                agg.add(tr)
    return table


# ---------------------------------------------------------------- presets

TABLE2_LM = (-0.2, -0.5, -0.8, -0.9, -0.95, -0.999)
TABLE2_LMAX = (0.2, 0.5, 0.8, 0.9, 0.95, 0.999)
SWITCH_LM = (-0.25, -0.5, -0.75, -0.9, -0.95)
SWITCH_LMAX = (0.25, 0.5, 0.75, 0.9, 0.95)

_SWITCH_NAMES = {
    Scenario.LINK_FAILURE: "linkfail",
    Scenario.MOTION: "motion",
    Scenario.RANDOM: "random",
}


def presets(seed: int = 0) -> dict:
    """Desk-scale configurations for each comparison table; name -> [(suffix, cfg)]."""
    base = ExperimentConfig(seed=seed)
    switching = base.replace(
        weight_kinds=(WeightKind.LOCAL_DEGREE,),
        methods=("cheby:grid",),
        lambda_m_grid=SWITCH_LM,
        lambda_M_grid=SWITCH_LMAX,
        tolerances=(1e-3,),
        max_rounds=3000,
    )
    return {
        "table1": [("", base.replace(
            weight_kinds=(WeightKind.LOCAL_DEGREE, WeightKind.BEST_CONSTANT, WeightKind.NONSYMMETRIC),
            methods=("power", "newton2", "fixedgain", "cheby"),
            tolerances=(1e-2, 1e-3, 1e-4, 1e-5),
            max_rounds=10000,
        ))],
        "table2": [("", base.replace(
            methods=("cheby:grid", "fixedgain:grid"),
            lambda_m_grid=TABLE2_LM,
            lambda_M_grid=TABLE2_LMAX,
            tolerances=(1e-3,),
            max_rounds=3000,
        ))],
        "table3": [
            (name, switching.replace(scenario=sc, methods=("power",)))
            for sc, name in _SWITCH_NAMES.items()
        ],
        "table4": [("", switching.replace(scenario=Scenario.LINK_FAILURE))],
        "table5": [("", switching.replace(scenario=Scenario.MOTION))],
        "table6": [("", switching.replace(scenario=Scenario.RANDOM))],
    }


# ---------------------------------------------------------------- switching helpers


class AddedLinks:
    """Base graph plus random extra links each round.

    Every absent link is added independently with probability ``p_add``.
    With an ``envelope``, draws whose local-degree spectrum leaves it are
    redrawn (up to ``max_tries``); the base graph is the fallback.
    """

    def __init__(self, p_add: float, envelope: Optional[SwitchingEnvelope] = None,
                 max_tries: int = 20):
        self.p_add = p_add
        self.envelope = envelope
        self.max_tries = max_tries
        self._absent = None

    def inside(self, g: Graph) -> bool:
        if self.envelope is None:
            return True
        s = sym_eigenvalues(local_degree_weights(g))
        return (s.lambda_2 <= self.envelope.lambda_max
                and s.lambda_N >= self.envelope.lambda_min)

    def __call__(self, base: Graph, n: int, rng) -> Graph:
        if self._absent is None:
            n_nodes = base.n_nodes
            self._absent = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)
                            if (i, j) not in base.edges]
        for _ in range(self.max_tries):
            pick = rng.random(len(self._absent)) < self.p_add
            g = base.with_edges(base.edges | {e for e, p in zip(self._absent, pick) if p})
            if self.inside(g):
                return g
        return base


def added_links_source(base: Graph, seed: int, p_add: float = 0.02,
                       envelope: Optional[SwitchingEnvelope] = None) -> SwitchingMatrices:
    cfg = ScenarioConfig(Scenario.FIXED, side=1.0, radius=1.0, seed=seed)
    return SwitchingMatrices(base, cfg, WeightKind.LOCAL_DEGREE,
                             graph_fn=AddedLinks(p_add, envelope))


# the illustrative 20-node example: envelope and the two parameter sets
ILLUSTRATIVE_ENVELOPE = SwitchingEnvelope(0.9477, -0.1922)


def illustrative_graph(seed: int = 0, n: int = 20, side: float = 60.0, radius: float = 20.0,
                       envelope: SwitchingEnvelope = ILLUSTRATIVE_ENVELOPE,
                       min_lambda_2: float = 0.9, max_draws: int = 10000) -> Graph:
    """First connected geometric graph (in seed order) whose local-degree
    spectrum lies in ``envelope`` with lambda_2 >= ``min_lambda_2``."""
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        g = random_geometric(n, side, radius, rng)
        s = sym_eigenvalues(local_degree_weights(g))
        if min_lambda_2 <= s.lambda_2 <= envelope.lambda_max and s.lambda_N >= envelope.lambda_min:
            return g
    raise GraphGenerationError("no graph inside the requested envelope")
