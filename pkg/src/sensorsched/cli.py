"""Command-line interface tying model files to the solver and reports.

Subcommands: validate, solve, evaluate, entropy, diagnose, compare.
Exit codes: 0 success, 1 domain failure (bad model invariants, guards,
unresolved solves), 2 usage or parse failure.

Model files are UTF-8 JSON: {"states": [...], "observations": [...],
"transition": [[...], ...], "sensors": [{"name": ..., "emission":
[[...], ...]}, ...]}.  Dimensions are inferred from the arrays.
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import plots
from .belief import Belief, CostFunction
from .diagnostics import (
    WeightFunction,
    check_average_cost_identity,
    check_contraction,
    estimate_invariant_measure,
    model_positivity_report,
)
from .exact import (
    HorizonTooLarge,
    cesaro_estimation_entropy,
    conditional_entropy_oracle,
)
from .model import ModelFormatError, load_model, normalize_model, validate_model
from .policies import ConstantPolicy, ThresholdPolicy
from .simulate import estimate_average_cost
from .solver import (
    GridPolicy,
    GridTooLarge,
    MultichainUnresolved,
    build_all_kernels,
    build_grid,
    evaluate_grid_policy,
    greedy_myopic_policy,
    grid_for_points,
    policy_iteration,
    policy_kernel_matrix,
    read_policy_csv,
    solve_poisson,
    write_policy_csv,
    write_solution_json,
)
from .solver import cost_table as grid_cost_table

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """Bad flag values or incompatible options (exit 2)."""


def _cost_function(args):
    base = 2.0 if args.log_base == "2" else np.e
    return CostFunction(kind=args.cost, log_base=base)


def _base_name(cf):
    return "2" if cf.log_base in (2, 2.0) else "e"


def _load_valid_model(path):
    model = load_model(path)
    report = validate_model(model)
    if report:
        for line in report:
            print(f"invalid model: {line}", file=sys.stderr)
        raise SystemExit(EXIT_DOMAIN)
    return normalize_model(model)


def _parse_x0(spec, num_states):
    if spec is None or spec == "uniform":
        return Belief.uniform(num_states)
    try:
        vals = [float(v) for v in spec.split(",")]
    except ValueError as e:
        raise UsageError(f"bad --x0 {spec!r}: {e}") from e
    if len(vals) != num_states:
        raise UsageError(
            f"--x0 has {len(vals)} entries, model has {num_states} states")
    return Belief(np.array(vals))


def _parse_policy(spec, model):
    """Parse const:<a> | threshold:<theta> | file:<path>.

    Returns (policy function, description).  File policies act by
    nearest-cell lookup in the grid they were exported from.
    """
    kind, _, arg = spec.partition(":")
    if kind == "const":
        try:
            a = int(arg)
        except ValueError as e:
            raise UsageError(f"bad sensor index {arg!r}") from e
        if not 0 <= a < model.num_sensors:
            raise UsageError(f"sensor {a} out of range "
                             f"[0, {model.num_sensors})")
        return ConstantPolicy(a), f"const:{a}"
    if kind == "threshold":
        if model.num_states != 2:
            raise UsageError("threshold policies require a 2-state model")
        if model.num_sensors < 2:
            raise UsageError("threshold policies need at least 2 sensors")
        try:
            theta = float(arg)
        except ValueError as e:
            raise UsageError(f"bad threshold {arg!r}") from e
        return ThresholdPolicy(theta), f"threshold:{theta:g}"
    if kind == "file":
        try:
            points, gp = read_policy_csv(arg)
        except OSError as e:
            raise UsageError(f"cannot read policy file: {e}") from e
        grid = grid_for_points(points)
        if points.shape[1] != model.num_states:
            raise UsageError("policy file dimension does not match model")
        return gp.as_policy_function(grid), f"file:{arg}"
    raise UsageError(f"bad policy spec {spec!r} "
                     "(expected const:<a> | threshold:<theta> | file:<path>)")


def cmd_validate(args):
    try:
        model = load_model(args.model)
    except (ModelFormatError, OSError) as e:
        print(f"parse failure: {e}", file=sys.stderr)
        return EXIT_USAGE
    report = validate_model(model)
    if report:
        for line in report:
            print(line)
        return EXIT_DOMAIN
    print("model OK")
    return EXIT_OK


def cmd_solve(args):
    model = _load_valid_model(args.model)
    cf = _cost_function(args)
    grid = build_grid(model.num_states, args.grid_res)
    kernels = build_all_kernels(model, grid)
    if args.init == "greedy":
        init = greedy_myopic_policy(model, grid, cf, kernels=kernels)
    else:
        _, _, a = args.init.partition(":")
        init = GridPolicy.constant(grid, int(a or 0))
    report = policy_iteration(model, grid, init=init,
                              max_iters=args.max_iters, cf=cf,
                              kernels=kernels)

    write_policy_csv(grid, report.final_policy, args.out + ".policy.csv")
    write_solution_json(report, grid, cf, args.out + ".solution.json")
    if args.plot:
        plots.plot_solution(
            grid, report.final_policy, report.final_solution.f,
            [it.g for it in report.iterations], cf, args.out + ".png")
    print(f"g = {report.g:.12g} (cost {cf.kind}, log base {_base_name(cf)})")
    print(f"iterations = {report.num_iterations} ({report.termination})")
    print(f"policy written to {args.out}.policy.csv")
    return EXIT_OK


def cmd_evaluate(args):
    model = _load_valid_model(args.model)
    cf = _cost_function(args)
    policy, desc = _parse_policy(args.policy, model)
    x0 = _parse_x0(args.x0, model.num_states)

    grid = build_grid(model.num_states, args.grid_res)
    gp = GridPolicy.from_function(grid, policy)
    g = evaluate_grid_policy(model, grid, gp, cf)
    result = {
        "policy": desc,
        "cost": cf.kind,
        "log_base": _base_name(cf),
        "grid_resolution": args.grid_res,
        "grid_poisson_g": g,
    }
    print(f"[grid poisson, r={args.grid_res}] g = {g:.12g} "
          f"(log base {_base_name(cf)})")

    if args.steps:
        est = estimate_average_cost(
            model, policy, x0, args.steps, burn_in=args.burn_in,
            n_chains=args.chains, base_seed=args.seed, cf=cf)
        result["monte_carlo"] = {
            "mean": est.mean, "half_width_95": est.half_width,
            "burn_in": est.burn_in, "total_steps": est.total_steps,
            "chains": est.n_chains, "seed": args.seed,
        }
        print(f"[monte carlo, {args.steps} steps x {args.chains} chains] "
              f"mean = {est.mean:.12g} +/- {est.half_width:.3g} "
              f"(log base {_base_name(cf)})")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_entropy(args):
    model = _load_valid_model(args.model)
    cf = _cost_function(args)
    policy, _ = _parse_policy(args.policy, model)
    x0 = _parse_x0(args.x0, model.num_states)

    res = cesaro_estimation_entropy(model, policy, x0, args.horizon + 1, cf)
    with_oracle = cf.kind == "entropy"
    oracle = None
    if with_oracle:
        oracle = [conditional_entropy_oracle(model, policy, x0, n,
                                             log_base=cf.log_base)
                  for n in range(args.horizon + 1)]

    header = ["n", "conditional_entropy"]
    if with_oracle:
        header.append("oracle_entropy")
    header.append("cesaro_average")
    rows = []
    for n in range(args.horizon + 1):
        row = [n, float(res.terms[n])]
        if with_oracle:
            row.append(float(oracle[n]))
        row.append(float(res.partial_averages[n]))
        rows.append(row)

    print("  ".join(header) + f"   (log base {_base_name(cf)})")
    for row in rows:
        print("  ".join(f"{v:.10g}" if isinstance(v, float) else str(v)
                        for v in row))
    print(f"cesaro average over {args.horizon + 1} terms: "
          f"{res.average:.12g}")

    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v
                                 for v in row])
    if args.plot:
        ns = list(range(args.horizon + 1))
        plots.plot_entropy_table(
            ns, res.terms, oracle, res.partial_averages, cf,
            (args.out or "entropy") + ".png")
    return EXIT_OK


def cmd_diagnose(args):
    model = _load_valid_model(args.model)
    cf = _cost_function(args)
    policy, desc = _parse_policy(args.policy, model)
    grid = build_grid(model.num_states, args.grid_res)
    kernels = build_all_kernels(model, grid)

    weight = WeightFunction(theta=args.theta)
    contraction = check_contraction(
        model, policy, weight, grid=grid, num_samples=args.samples,
        seed=args.seed)

    gp = GridPolicy.from_function(grid, policy)
    pk = policy_kernel_matrix(kernels, gp)
    measure = estimate_invariant_measure(pk)
    identity = check_average_cost_identity(model, grid, gp, cf,
                                           kernels=kernels)
    positivity = model_positivity_report(model)

    doc = {
        "policy": desc,
        "contraction": {
            "weight": contraction.weight,
            "worst_ratio": contraction.worst_ratio,
            "worst_point": contraction.worst_point.tolist(),
            "num_points": contraction.num_points,
            "contraction": contraction.contraction,
        },
        "invariant_measure": {
            "converged": measure.converged,
            "unique": measure.unique,
            "tv_gap": measure.tv_gap,
        },
        "average_cost_identity": {
            "g_poisson": identity.g_poisson,
            "integral_mu_c": identity.integral_mu_c,
            "gap": identity.gap,
        },
        "positivity": positivity,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    print(f"drift check (u = {contraction.weight}): {contraction.verdict()}")
    print(f"invariant measure: converged={measure.converged} "
          f"unique={measure.unique} tv_gap={measure.tv_gap:.3g}")
    print(f"average-cost identity: g={identity.g_poisson:.10g} "
          f"integral={identity.integral_mu_c:.10g} gap={identity.gap:.3g}")
    prim = positivity["transition_primitive"]
    power = positivity["primitive_power"]
    print("transition matrix: "
          + (f"primitive (power {power})" if prim else "not primitive"))
    print("sensors strictly positive: "
          + ", ".join(str(b) for b in
                      positivity["sensors_strictly_positive"]))
    return EXIT_OK


def cmd_compare(args):
    model = _load_valid_model(args.model)
    cf = _cost_function(args)
    if not args.policy:
        raise UsageError("give at least one --policy")
    x0 = _parse_x0(args.x0, model.num_states)
    grid = build_grid(model.num_states, args.grid_res)
    kernels = build_all_kernels(model, grid)

    rows = []
    for spec in args.policy:
        policy, desc = _parse_policy(spec, model)
        gp = GridPolicy.from_function(grid, policy)
        g = evaluate_grid_policy(model, grid, gp, cf, kernels=kernels)
        entry = {"policy": desc, "grid_g": g}
        if args.steps:
            est = estimate_average_cost(
                model, policy, x0, args.steps, burn_in=args.burn_in,
                n_chains=args.chains, base_seed=args.seed, cf=cf)
            entry["mc_mean"] = est.mean
            entry["mc_half_width"] = est.half_width
        rows.append(entry)
    rows.sort(key=lambda r: r["grid_g"])

    header = ["rank", "policy", "grid_g"]
    if args.steps:
        header += ["mc_mean", "mc_half_width_95"]
    print("  ".join(header) + f"   (log base {_base_name(cf)})")
    for rank, r in enumerate(rows, 1):
        line = [str(rank), r["policy"], f"{r['grid_g']:.10g}"]
        if args.steps:
            line += [f"{r['mc_mean']:.10g}", f"{r['mc_half_width']:.3g}"]
        print("  ".join(line))

    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rank, r in enumerate(rows, 1):
                row = [rank, r["policy"], repr(r["grid_g"])]
                if args.steps:
                    row += [repr(r["mc_mean"]), repr(r["mc_half_width"])]
                writer.writerow(row)
    if args.plot:
        names = [r["policy"] for r in rows]
        plots.plot_comparison(
            names, [r["grid_g"] for r in rows],
            [r["mc_mean"] for r in rows] if args.steps else None,
            [r["mc_half_width"] for r in rows] if args.steps else None,
            cf, (args.out or "compare") + ".png")
    return EXIT_OK


def _add_cost_flags(p):
    p.add_argument("--cost", choices=["entropy", "quadratic"],
                   default="entropy", help="per-step cost over beliefs")
    p.add_argument("--log-base", choices=["2", "e"], default="2",
                   help="entropy log base (default 2: bits)")


def _add_mc_flags(p):
    p.add_argument("--steps", type=int, default=0,
                   help="Monte Carlo steps per chain (0 disables)")
    p.add_argument("--burn-in", type=int, default=None,
                   help="steps discarded per chain (default 10%% of steps)")
    p.add_argument("--chains", type=int, default=4,
                   help="independent chains (default 4)")
    p.add_argument("--seed", type=int, default=0,
                   help="base RNG seed (default 0)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sensorsched",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve",
                       help="policy iteration for the min-entropy schedule")
    p.add_argument("--model", required=True)
    p.add_argument("--grid-res", type=int, default=20,
                   help="belief grid resolution (default 20)")
    _add_cost_flags(p)
    p.add_argument("--init", default="const:0",
                   help="initial policy: const:<a> or greedy (default const:0)")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--out", default="solution",
                   help="output prefix for .policy.csv / .solution.json")
    p.add_argument("--plot", action="store_true",
                   help="also write <out>.png with the solver summary")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate",
                       help="average cost of a policy (grid and Monte Carlo)")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True,
                   help="const:<a> | threshold:<theta> | file:<path>")
    p.add_argument("--grid-res", type=int, default=20)
    p.add_argument("--x0", default="uniform",
                   help="initial belief, comma-separated (default uniform)")
    _add_cost_flags(p)
    _add_mc_flags(p)
    p.add_argument("--out", help="write a JSON record here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("entropy",
                       help="exact conditional entropies per horizon")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--x0", default="uniform")
    p.add_argument("--horizon", type=int, default=6)
    _add_cost_flags(p)
    p.add_argument("--out", help="write the table as CSV here")
    p.add_argument("--plot", action="store_true",
                   help="also write <out>.png with the entropy curves")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("diagnose",
                       help="ergodicity and consistency reports")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--grid-res", type=int, default=20)
    _add_cost_flags(p)
    p.add_argument("--theta", type=float, default=1.0,
                   help="drift weight u = 1 + theta*h2 (default 1)")
    p.add_argument("--samples", type=int, default=1000,
                   help="random simplex test points (default 1000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compare", help="rank policies by average cost")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", action="append", default=[],
                   help="repeatable: const:<a> | threshold:<theta> | file:<path>")
    p.add_argument("--grid-res", type=int, default=20)
    p.add_argument("--x0", default="uniform")
    _add_cost_flags(p)
    _add_mc_flags(p)
    p.add_argument("--out", help="write the ranking as CSV here")
    p.add_argument("--plot", action="store_true",
                   help="also write <out>.png with the ranking chart")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as e:
        return e.code
    except (UsageError, ModelFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (GridTooLarge, MultichainUnresolved, HorizonTooLarge,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
