"""Seed-sweep orchestration.

Runs the solver over a grid of iteration budgets with replicated
seeds, records the stationarity statistic
||grad f + J^T y_true||^2 + ||c||_1 at the sampled index k*, and fits
the log-log decay of its mean against sqrt(k_max + 1).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from stosqp.driver import AlgoConfig, BetaSchedule, run
from stosqp.errors import ExperimentFailure, InvalidRange, StosqpError
from stosqp.harness.config import (
    Node,
    build_algo_template,
    build_output,
    build_problem_from_dict,
    check_schema_version,
)

SCHEMA_VERSION = 1

# fraction of replications that must succeed for a report to be valid
SUCCESS_FRACTION = 0.8


@dataclass
class ExperimentSpec:
    """Sweep definition: problem selector, algorithm template (fields
    the sweep itself does not control), iteration budgets, and
    replication plan."""

    problem_cfg: dict
    algo_template: dict
    k_max_list: tuple
    replications: int
    gamma: float = 0.5
    seed: int = 0
    out_dir: str = "."
    report_name: str = "rate_report.json"
    runs_name: str = "runs.json"
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidRange(
                "replications must be >= 1, got %r" % (self.replications,)
            )
        ks = tuple(self.k_max_list)
        if not ks:
            raise InvalidRange("k_max_list must be nonempty")
        if any(k < 0 for k in ks):
            raise InvalidRange("k_max values must be >= 0")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise InvalidRange("k_max_list must be strictly increasing")
        self.k_max_list = ks
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidRange("gamma must lie in (0, 1], got %r" % (self.gamma,))
        if self.workers < 1:
            raise InvalidRange("workers must be >= 1, got %r" % (self.workers,))


@dataclass
class RateReport:
    """Per-budget mean and standard error of the statistic, plus the
    fitted log-log slope against sqrt(k_max + 1)."""

    k_max_list: tuple
    means: tuple
    standard_errors: tuple
    slope: float
    replications: int
    successes: tuple
    failures: tuple

    def to_payload(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "k_max_list": list(self.k_max_list),
            "means": list(self.means),
            "standard_errors": list(self.standard_errors),
            "slope": self.slope,
            "replications": self.replications,
            "successes": list(self.successes),
            "failures": list(self.failures),
        }


def parse_experiment_spec(doc):
    root = Node(doc, "")
    check_schema_version(root)
    problem_node = root.node("problem", required=True)
    problem_raw = dict(problem_node.raw)
    build_problem_from_dict(problem_raw)  # validate now, rebuild per worker
    template = build_algo_template(root.node("algo_template", required=True))
    k_max_list = root.list_("k_max_list", required=True)
    for i, k in enumerate(k_max_list):
        if isinstance(k, bool) or not isinstance(k, int):
            raise InvalidRange("k_max_list[%d]: expected an integer, got %r" % (i, k))
    replications = root.int_("replications", required=True)
    gamma = root.num("gamma", default=0.5)
    seed = root.int_("seed", default=0)
    workers = root.int_("workers", default=1)
    out = build_output(
        root.node("output"),
        {"dir": ".", "report": "rate_report.json", "runs": "runs.json"},
    )
    root.close()
    return ExperimentSpec(
        problem_cfg=problem_raw,
        algo_template=template,
        k_max_list=tuple(k_max_list),
        replications=replications,
        gamma=gamma,
        seed=seed,
        out_dir=out["dir"],
        report_name=out["report"],
        runs_name=out["runs"],
        workers=workers,
    )


def statistic_of(record):
    return float(record.stationarity**2 + record.c_norm1)


def _run_cell(problem_cfg, template, k_max, gamma, seed):
    """One replication; module-level so worker processes can import it."""
    problem = build_problem_from_dict(problem_cfg)
    algo = AlgoConfig(
        k_max=k_max,
        beta_schedule=BetaSchedule.constant(gamma),
        seed=seed,
        **template,
    )
    keep = template.get("stop_eps") is not None
    res = run(problem, algo, keep_trace=keep)
    rec = res.trace[res.k_star] if keep else res.trace[0]
    return statistic_of(rec), res.k_star, res.summary


def run_experiment(spec):
    """Execute the sweep; returns (RateReport, per-run rows).

    Raises ExperimentFailure when any budget completes fewer than 80%
    of its replications; partial failures below that threshold are
    listed in the report.
    """
    R = spec.replications
    # one root stream; run (i, r) owns substream index i * R + r
    seeds = np.random.SeedSequence(spec.seed).generate_state(
        len(spec.k_max_list) * R, np.uint32
    )
    jobs = []
    for i, k_max in enumerate(spec.k_max_list):
        for r in range(R):
            jobs.append((i, r, k_max, int(seeds[i * R + r])))

    outcomes = {}
    if spec.workers == 1:
        for i, r, k_max, seed in jobs:
            try:
                outcomes[(i, r)] = _run_cell(
                    spec.problem_cfg, spec.algo_template, k_max, spec.gamma, seed
                )
            except StosqpError as exc:
                outcomes[(i, r)] = exc
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = {
                pool.submit(
                    _run_cell,
                    spec.problem_cfg,
                    spec.algo_template,
                    k_max,
                    spec.gamma,
                    seed,
                ): (i, r)
                for i, r, k_max, seed in jobs
            }
            for fut, key in futures.items():
                try:
                    outcomes[key] = fut.result()
                except StosqpError as exc:
                    outcomes[key] = exc

    rows = []
    failures = []
    means = []
    ses = []
    successes = []
    for i, k_max in enumerate(spec.k_max_list):
        stats = []
        for r in range(R):
            seed = int(seeds[i * R + r])
            outcome = outcomes[(i, r)]
            if isinstance(outcome, StosqpError):
                failures.append(
                    {"k_max": k_max, "replication": r, "seed": seed, "error": str(outcome)}
                )
                continue
            stat, k_star, summary = outcome
            stats.append(stat)
            rows.append(
                {
                    "k_max": k_max,
                    "replication": r,
                    "seed": seed,
                    "statistic": stat,
                    "k_star": k_star,
                    "summary": summary,
                }
            )
        successes.append(len(stats))
        if len(stats) < SUCCESS_FRACTION * R:
            raise ExperimentFailure(
                "k_max=%d: only %d of %d replications succeeded"
                % (k_max, len(stats), R)
            )
        arr = np.asarray(stats)
        means.append(float(arr.mean()))
        ses.append(float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0)

    slope = None
    if len(spec.k_max_list) >= 2 and all(v > 0.0 for v in means):
        xs = np.log(np.sqrt(np.asarray(spec.k_max_list, dtype=np.float64) + 1.0))
        slope = float(np.polyfit(xs, np.log(np.asarray(means)), 1)[0])

    report = RateReport(
        k_max_list=spec.k_max_list,
        means=tuple(means),
        standard_errors=tuple(ses),
        slope=slope,
        replications=R,
        successes=tuple(successes),
        failures=tuple(failures),
    )
    return report, rows
