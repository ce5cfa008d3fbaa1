"""Command-line front end.

Subcommands: solve (one run, trace + summary), experiment (seed sweep,
rate report), verify (Monte Carlo checks of the tail bounds), report
(render a stored rate report as a plot-ready CSV).

Exit codes: 0 success, 1 configuration error, 2 solver/experiment
failure, 3 failed statistical check.
"""

import argparse
import math
import os
import sys

import numpy as np

from stosqp import tail_bounds
from stosqp.driver import run
from stosqp.errors import ConfigError, StosqpError
from stosqp.harness.config import (
    Node,
    build_output,
    check_schema_version,
    env_output_dir,
    env_workers,
    load_json_file,
    parse_solve_config,
)
from stosqp.harness.experiment import parse_experiment_spec, run_experiment
from stosqp.harness.runio import atomic_write_text, read_json, write_json_atomic, write_trace_csv
from stosqp.problems import NoiseModel, make_quadratic

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CHECK_FAILED = 3

# relative slack when testing whether the scheduled probability mass
# reaches the ell threshold; the uniform schedule hits it only up to
# float rounding
_MASS_RTOL = 1e-9

DEFAULT_BATTERY = (
    {"name": "chernoff_tail", "s": 3, "delta": 0.1, "count": 100, "trials": 100000},
    {
        "name": "capped_process",
        "p": 0.05,
        "s_max": 3,
        "k_max": 200,
        "delta": 0.1,
        "trials": 10000,
    },
    {
        "name": "ptau_symmetric",
        "n": 6,
        "m": 2,
        "problem_seed": 0,
        "variance_bound": 1.0,
        "trials": 10000,
    },
    {
        "name": "subgaussian_max",
        "total_variance": 1.0,
        "n": 2,
        "k_max": 100,
        "delta": 0.1,
        "trials": 1000,
    },
)


def _check_chernoff(node, rng):
    s = node.int_("s", default=3)
    delta = node.num("delta", default=0.1)
    count = node.int_("count", default=100)
    trials = node.int_("trials", default=100000)
    mu_factor = node.num("mu_factor", default=1.0)
    node.close()
    target = tail_bounds.ell(s, delta)
    probs = np.minimum(np.full(count, target * mu_factor / count), 1.0)
    mass = float(probs.sum())
    informational = mass < target * (1.0 - _MASS_RTOL)
    stat = tail_bounds.mc_chernoff_check(probs, s, delta, trials, rng)
    threshold = delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    return {
        "check": "chernoff_tail",
        "params": {
            "s": s,
            "delta": delta,
            "count": count,
            "trials": trials,
            "mu_factor": mu_factor,
            "prob_mass": mass,
        },
        "statistic": stat,
        "threshold": threshold,
        "pass": stat <= threshold,
        "informational": informational,
    }


def _check_capped(node, rng):
    p = node.num("p", default=0.05)
    s_max = node.int_("s_max", default=3)
    k_max = node.int_("k_max", default=200)
    delta = node.num("delta", default=0.1)
    trials = node.int_("trials", default=10000)
    node.close()
    res = tail_bounds.simulate_capped_process(
        np.full(k_max + 1, p), s_max, k_max, delta, trials, rng
    )
    threshold = 1.0 - delta
    ok = res.freq_bound_holds >= threshold and res.freq_count_exceeds == 0.0
    return {
        "check": "capped_process",
        "params": {
            "p": p,
            "s_max": s_max,
            "k_max": k_max,
            "delta": delta,
            "trials": trials,
            "freq_count_exceeds": res.freq_count_exceeds,
        },
        "statistic": res.freq_bound_holds,
        "threshold": threshold,
        "pass": ok,
        "informational": False,
    }


def _check_ptau(node, rng):
    n = node.int_("n", default=6)
    m = node.int_("m", default=2)
    problem_seed = node.int_("problem_seed", default=0)
    variance_bound = node.num("variance_bound", default=1.0)
    trials = node.int_("trials", default=10000)
    node.close()
    problem = make_quadratic(n, m, problem_seed)
    noise = NoiseModel.gaussian(variance_bound)
    stat = tail_bounds.mc_ptau_symmetric(
        problem, problem.x0, np.eye(n), noise, trials, rng
    )
    threshold = 0.5 - 3.0 * math.sqrt(0.25 / trials)
    return {
        "check": "ptau_symmetric",
        "params": {
            "n": n,
            "m": m,
            "problem_seed": problem_seed,
            "variance_bound": variance_bound,
            "trials": trials,
        },
        "statistic": stat,
        "threshold": threshold,
        "pass": stat >= threshold,
        "informational": False,
    }


def _check_subgaussian(node, rng):
    total_variance = node.num("total_variance", default=1.0)
    n = node.int_("n", default=2)
    k_max = node.int_("k_max", default=100)
    delta = node.num("delta", default=0.1)
    trials = node.int_("trials", default=1000)
    node.close()
    M = tail_bounds.gaussian_subgaussian_scale(total_variance, n)
    noise = NoiseModel.gaussian(total_variance)
    stat = tail_bounds.mc_subgaussian_max(noise, M, k_max, delta, trials, rng, n=n)
    threshold = 1.0 - delta - 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    return {
        "check": "subgaussian_max",
        "params": {
            "total_variance": total_variance,
            "n": n,
            "k_max": k_max,
            "delta": delta,
            "trials": trials,
            "scale": M,
        },
        "statistic": stat,
        "threshold": threshold,
        "pass": stat >= threshold,
        "informational": False,
    }


_CHECKS = {
    "chernoff_tail": _check_chernoff,
    "capped_process": _check_capped,
    "ptau_symmetric": _check_ptau,
    "subgaussian_max": _check_subgaussian,
}


def _cmd_solve(args):
    cfg = parse_solve_config(load_json_file(args.config))
    out_dir = env_output_dir(cfg.out_dir)
    result = run(cfg.problem, cfg.algo)
    write_trace_csv(os.path.join(out_dir, cfg.trace_name), result.trace)
    payload = {
        "schema_version": 1,
        "problem": cfg.problem.name,
        "k_star": result.k_star,
        "summary": result.summary,
    }
    write_json_atomic(os.path.join(out_dir, cfg.summary_name), payload)
    print(
        "solve: %d iteration(s), k*=%d, final stationarity %.6g, ||c||_1 %.6g"
        % (
            result.summary["iterations"],
            result.k_star,
            result.summary["final_stationarity"],
            result.summary["final_c_norm1"],
        )
    )
    return EXIT_OK


def _cmd_experiment(args):
    spec = parse_experiment_spec(load_json_file(args.spec))
    spec.out_dir = env_output_dir(spec.out_dir)
    spec.workers = env_workers(spec.workers)
    report, rows = run_experiment(spec)
    write_json_atomic(os.path.join(spec.out_dir, spec.report_name), report.to_payload())
    write_json_atomic(
        os.path.join(spec.out_dir, spec.runs_name),
        {"schema_version": 1, "runs": rows},
    )
    for k_max, mean, se, n_ok in zip(
        report.k_max_list, report.means, report.standard_errors, report.successes
    ):
        print("k_max=%d: mean=%.6g se=%.6g (%d/%d runs)" % (k_max, mean, se, n_ok, spec.replications))
    if report.slope is not None:
        print("log-log slope vs sqrt(k_max+1): %.3f" % report.slope)
    if report.failures:
        print("%d replication(s) failed; see %s" % (len(report.failures), spec.runs_name))
    return EXIT_OK


def _cmd_verify(args):
    doc = load_json_file(args.params)
    root = Node(doc, "")
    check_schema_version(root)
    seed = root.int_("seed", default=0)
    raw_checks = root.list_("checks")
    out = build_output(root.node("output"), {"dir": ".", "report": "verify_report.json"})
    root.close()

    if raw_checks is None:
        raw_checks = [dict(entry) for entry in DEFAULT_BATTERY]

    rows = []
    failed = False
    children = np.random.SeedSequence(seed).spawn(max(len(raw_checks), 1))
    for i, raw in enumerate(raw_checks):
        node = Node(raw, "checks[%d]" % i)
        name = node.str_("name", required=True)
        if name not in _CHECKS:
            raise ConfigError("checks[%d].name: unknown check %r" % (i, name))
        row = _CHECKS[name](node, np.random.default_rng(children[i]))
        rows.append(row)
        verdict = "pass" if row["pass"] else "FAIL"
        if row["informational"]:
            verdict = "informational (%s)" % verdict
        elif not row["pass"]:
            failed = True
        print(
            "%s: statistic=%.6g threshold=%.6g %s"
            % (row["check"], row["statistic"], row["threshold"], verdict)
        )

    out_dir = env_output_dir(out["dir"])
    write_json_atomic(
        os.path.join(out_dir, out["report"]),
        {"schema_version": 1, "checks": rows},
    )
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _cmd_report(args):
    payload = read_json(os.path.join(args.dir, "rate_report.json"))
    if payload.get("schema_version") != 1:
        raise ConfigError("rate_report.json: unsupported schema_version")
    k_list = payload["k_max_list"]
    means = payload["means"]
    ses = payload["standard_errors"]
    lines = ["# schema_version=1", "k_max,mean,standard_error"]
    for k_max, mean, se in zip(k_list, means, ses):
        lines.append("%d,%.17g,%.17g" % (k_max, mean, se))
        print("k_max=%d: mean=%.6g se=%.6g" % (k_max, mean, se))
    if payload.get("slope") is not None:
        print("log-log slope vs sqrt(k_max+1): %.3f" % payload["slope"])
    out_dir = env_output_dir(args.dir)
    atomic_write_text(os.path.join(out_dir, "report.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stosqp",
        description="stochastic SQP solver harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one configured solve")
    p_solve.add_argument("config", help="path to a solve config JSON")
    p_solve.set_defaults(func=_cmd_solve)

    p_exp = sub.add_parser("experiment", help="run a rate-measurement sweep")
    p_exp.add_argument("spec", help="path to an experiment spec JSON")
    p_exp.set_defaults(func=_cmd_experiment)

    p_verify = sub.add_parser("verify", help="run Monte Carlo tail-bound checks")
    p_verify.add_argument("params", help="path to a verify params JSON")
    p_verify.set_defaults(func=_cmd_verify)

    p_report = sub.add_parser("report", help="render a stored rate report")
    p_report.add_argument("dir", help="directory holding rate_report.json")
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except StosqpError as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
