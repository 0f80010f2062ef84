"""Command line entry point: ``chebcons {run,experiment,check-params,tables}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .cheby_core import ChebyParams, conv_factor_nu
from .engine import ConsensusRun, Method, MethodSpec, SwitchingMatrices, optimal_beta, run_method
from .graphs import GraphGenerationError, Scenario, ScenarioConfig, read_edgelist, random_geometric
from .spectral import (
    Spectrum,
    SwitchingEnvelope,
    check_fixed_convergence,
    check_switching_convergence,
    corollary_asymmetric_params,
    corollary_symmetric_param,
    eigenvalues,
    optimal_params,
    safe_symmetric_bound,
)
from .weights import WeightKind, build_weights, dump_csv

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("chebcons")


def _method_spec(args, spectrum: Spectrum) -> MethodSpec:
    kind = Method(args.method)
    if kind is Method.POWER:
        return MethodSpec.power()
    if kind is Method.NEWTON2:
        return MethodSpec.newton2(spectrum.lambda_2, spectrum.lambda_N)
    if kind is Method.FIXED_GAIN:
        lam = args.lambda_M if args.lambda_M is not None else spectrum.lambda_2
        return MethodSpec(Method.FIXED_GAIN, beta=optimal_beta(lam))
    if args.lambda_m is None and args.lambda_M is None:
        return MethodSpec(Method.CHEBYSHEV, params=optimal_params(spectrum))
    if args.lambda_m is None or args.lambda_M is None:
        raise ValueError("give both --lambda-m and --lambda-M, or neither")
    return MethodSpec.chebyshev(args.lambda_m, args.lambda_M)


def cmd_run(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.graph_file:
        g = read_edgelist(args.graph_file)
    else:
        g = random_geometric(args.n, args.side, args.radius, rng)
    scenario = Scenario.parse(args.scenario)
    kind = WeightKind.parse(args.weights)
    w = build_weights(kind, g)
    if args.dump_weights:
        dump_csv(w, args.dump_weights)
    spectrum = eigenvalues(w)
    spec = _method_spec(args, spectrum)
    if scenario is Scenario.FIXED:
        source = w.entries
    else:
        if spec.kind is Method.NEWTON2:
            raise ValueError("newton2 needs a fixed topology")
        if kind is WeightKind.NONSYMMETRIC:
            raise ValueError("switching scenarios need symmetric weights")
        cfg = ScenarioConfig(scenario, args.failure_prob, args.step_size, args.side,
                             args.radius, int(rng.integers(2**63)))
        source = SwitchingMatrices(g, cfg, kind)
    x0 = rng.uniform(0.0, 1.0, g.n_nodes)
    run = ConsensusRun(spec, source, x0, args.tol, args.max_rounds, stop=args.stop,
                       keep_states=args.states)
    trace = run_method(run)
    if args.out:
        harness.emit_trace_plotdata(trace, args.out, states=args.states)
    hit = trace.rounds_to_tol[float(args.tol)]
    print(f"method={spec.kind.value} weights={kind.short} n={g.n_nodes} "
          f"lambda_2={spectrum.lambda_2:.6g} lambda_N={spectrum.lambda_N:.6g}")
    if spec.params is not None:
        print(f"lambda_m={spec.params.lambda_m:.6g} lambda_M={spec.params.lambda_M:.6g}")
    print(f"consensus={trace.target:.12g} rounds_to_tol={hit if hit is not None else 'not reached'} "
          f"final_error={trace.errors[-1]:.3e} comm_rounds={trace.comm_rounds}")
    if trace.diverged:
        print(f"DIVERGED at round {trace.diverged_at}")
        return EXIT_DIVERGED
    return EXIT_OK


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    changes = {}
    for name in ("seed", "n_graphs", "n_inits", "max_rounds"):
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    if getattr(args, "n", None) is not None:
        changes["n_nodes"] = args.n
    return cfg.replace(**changes) if changes else cfg


def cmd_experiment(args) -> int:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    cfg = _apply_overrides(cfg, args)
    table = harness.run_experiment(cfg, workers=args.workers)
    harness.emit_csv(table, args.out)
    print(f"wrote {args.out} ({len(table.cells)} cells, {table.n_failed_graphs} failed graphs)")
    return EXIT_OK


def cmd_tables(args) -> int:
    all_presets = harness.presets(args.seed)
    names = list(all_presets) if "all" in args.names else args.names
    unknown = [n for n in names if n not in all_presets]
    if unknown:
        raise harness.ConfigError(f"unknown table(s): {', '.join(unknown)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        for suffix, cfg in all_presets[name]:
            cfg = _apply_overrides(cfg, args)
            table = harness.run_experiment(cfg, workers=args.workers)
            path = out_dir / (f"{name}_{suffix}.csv" if suffix else f"{name}.csv")
            harness.emit_csv(table, path)
            print(f"wrote {path}")
    return EXIT_OK


def cmd_check_params(args) -> int:
    params = None
    if args.lambda_m is not None or args.lambda_M is not None:
        params = ChebyParams(args.lambda_m, args.lambda_M)
        print(f"params: lambda_m={params.lambda_m:.6g} lambda_M={params.lambda_M:.6g} "
              f"c={params.c:.6g} d={params.d:.6g}")
    if args.lambda_2 is not None and args.lambda_N is not None:
        spectrum = Spectrum((1.0, args.lambda_2, args.lambda_N),
                            tuple(complex(z) for z in args.complex))
        if params is None:
            params = optimal_params(spectrum)
            print(f"optimal params: lambda_m={params.lambda_m:.6g} lambda_M={params.lambda_M:.6g}")
        print(f"fixed-topology convergence: {check_fixed_convergence(params, spectrum)}")
        print(f"convergence factor nu: {conv_factor_nu(params, args.lambda_2, args.lambda_N):.6g}")
        lam = spectrum.rate
        if 0.0 < lam < 1.0:
            print(f"power-iteration rate: {lam:.6g}; symmetric lambda_M beating it: "
                  f"< {safe_symmetric_bound(lam):.6g}")
    if args.lambda_max is not None and args.lambda_min is not None:
        env = SwitchingEnvelope(args.lambda_max, args.lambda_min)
        if params is not None:
            print(f"switching sufficient condition: {check_switching_convergence(params, env)}")
        if env.lambda_max >= abs(env.lambda_min):
            lam = corollary_symmetric_param(env, args.margin)
            print(f"symmetric switching parameter: lambda_M = -lambda_m = {lam:.6g}")
        asym = corollary_asymmetric_params(env, args.margin)
        print(f"centred switching parameters: lambda_m={asym.lambda_m:.6g} "
              f"lambda_M={asym.lambda_M:.6g}")
    if params is None and args.lambda_max is None:
        raise ValueError("nothing to check: give parameters, a spectrum or an envelope")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chebcons", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="single consensus run")
    r.add_argument("--method", choices=[m.value for m in Method], default="cheby")
    r.add_argument("--weights", default="localdegree",
                   choices=["localdegree", "bestconstant", "nonsymmetric"])
    r.add_argument("--lambda-m", type=float)
    r.add_argument("--lambda-M", type=float)
    r.add_argument("--n", type=int, default=30)
    r.add_argument("--side", type=float, default=80.0)
    r.add_argument("--radius", type=float, default=20.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--tol", type=float, default=1e-5)
    r.add_argument("--max-rounds", type=int, default=3000)
    r.add_argument("--stop", choices=["error", "disagreement"], default="error")
    r.add_argument("--scenario", choices=["fixed", "linkfail", "motion", "random"], default="fixed")
    r.add_argument("--failure-prob", type=float, default=0.05)
    r.add_argument("--step-size", type=float, default=5.0)
    r.add_argument("--graph-file")
    r.add_argument("--dump-weights")
    r.add_argument("--states", action="store_true", help="include per-agent states in --out")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="Monte Carlo experiment from a config file")
    e.add_argument("--config")
    e.add_argument("--out", default="results.csv")
    _add_overrides(e)
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("check-params", help="evaluate convergence predicates")
    c.add_argument("--lambda-m", type=float)
    c.add_argument("--lambda-M", type=float)
    c.add_argument("--lambda-2", type=float)
    c.add_argument("--lambda-N", type=float)
    c.add_argument("--complex", action="append", default=[],
                   help="complex eigenvalue such as 0.1+0.2j (repeatable)")
    c.add_argument("--lambda-max", type=float)
    c.add_argument("--lambda-min", type=float)
    c.add_argument("--margin", type=float, default=1e-4)
    c.set_defaults(func=cmd_check_params)

    t = sub.add_parser("tables", help="run desk-scale table presets")
    t.add_argument("names", nargs="+", help="table1 ... table6, or all")
    t.add_argument("--out-dir", default=".")
    _add_overrides(t)
    t.set_defaults(func=cmd_tables)
    return p


def _add_overrides(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--n-graphs", type=int)
    p.add_argument("--n-inits", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--workers", type=int, default=1)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "tables":
        args.seed = 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (harness.ConfigError, ValueError, GraphGenerationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
