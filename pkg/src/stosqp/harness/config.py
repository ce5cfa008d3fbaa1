"""JSON run configuration: fail-closed parsing with field-path errors.

Unknown keys are rejected rather than ignored; a silent typo in sigma
or eps_tau would corrupt an experiment with no visible symptom.  Every
error message names the offending field by its dotted path.
"""

import json
import os
from dataclasses import dataclass

from stosqp.driver import AlgoConfig, BetaSchedule, HessianPolicy
from stosqp.errors import ConfigError, StosqpError
from stosqp.merit import MeritParams
from stosqp.problems import (
    NoiseModel,
    Problem,
    make_quadratic,
    make_random_licq,
    make_rosenbrock_sphere,
)

SCHEMA_VERSION = 1

ENV_OUTPUT_DIR = "STOSQP_OUTPUT_DIR"
ENV_WORKERS = "STOSQP_WORKERS"


def _join(path, key):
    return key if not path else "%s.%s" % (path, key)


class Node:
    """One JSON object with consumption tracking.

    Every field must be taken through a typed getter; close() rejects
    whatever was not consumed.
    """

    def __init__(self, raw, path):
        if not isinstance(raw, dict):
            raise ConfigError("%s: expected an object" % (path or "top level"))
        self.raw = raw
        self.path = path
        self._seen = set()

    def _take(self, key, required, default):
        if key not in self.raw:
            if required:
                raise ConfigError("%s: required field is missing" % _join(self.path, key))
            return False, default
        self._seen.add(key)
        return True, self.raw[key]

    def int_(self, key, required=False, default=None):
        present, v = self._take(key, required, default)
        if present and (isinstance(v, bool) or not isinstance(v, int)):
            raise ConfigError("%s: expected an integer, got %r" % (_join(self.path, key), v))
        return v

    def num(self, key, required=False, default=None):
        present, v = self._take(key, required, default)
        if present:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError("%s: expected a number, got %r" % (_join(self.path, key), v))
            return float(v)
        return v

    def str_(self, key, required=False, default=None):
        present, v = self._take(key, required, default)
        if present and not isinstance(v, str):
            raise ConfigError("%s: expected a string, got %r" % (_join(self.path, key), v))
        return v

    def list_(self, key, required=False, default=None):
        present, v = self._take(key, required, default)
        if present and not isinstance(v, list):
            raise ConfigError("%s: expected an array" % _join(self.path, key))
        return v

    def node(self, key, required=False):
        present, v = self._take(key, required, None)
        if not present:
            return None
        return Node(v, _join(self.path, key))

    def close(self):
        unknown = sorted(set(self.raw) - self._seen)
        if unknown:
            raise ConfigError(
                "%s: unknown field(s) %s"
                % (self.path or "top level", ", ".join(repr(u) for u in unknown))
            )

    def require_range(self, key, value, low, high, low_open=True, high_open=True):
        """Range check producing a dotted-path message."""
        ok_low = value > low if low_open else value >= low
        ok_high = value < high if high_open else value <= high
        if not (ok_low and ok_high):
            lo = "(" if low_open else "["
            hi = ")" if high_open else "]"
            raise ConfigError(
                "%s: must lie in %s%g, %g%s, got %r"
                % (_join(self.path, key), lo, low, high, hi, value)
            )


def load_json_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (path, exc)) from exc


def check_schema_version(node):
    v = node.int_("schema_version", required=True)
    if v != SCHEMA_VERSION:
        raise ConfigError(
            "schema_version: unsupported value %r, this build reads %d"
            % (v, SCHEMA_VERSION)
        )


def build_problem(node):
    name = node.str_("name", required=True)
    try:
        if name == "quadratic":
            n = node.int_("n", required=True)
            m = node.int_("m", required=True)
            seed = node.int_("seed", required=True)
            n_components = node.int_("n_components")
            spread = node.num("component_spread", default=1.0)
            node.close()
            return make_quadratic(
                n, m, seed, n_components=n_components, component_spread=spread
            )
        if name == "rosenbrock_sphere":
            node.close()
            return make_rosenbrock_sphere()
        if name == "random_licq":
            n = node.int_("n", required=True)
            m = node.int_("m", required=True)
            seed = node.int_("seed", required=True)
            node.close()
            return make_random_licq(n, m, seed)
    except ConfigError:
        raise
    except StosqpError as exc:
        raise ConfigError("%s: %s" % (node.path, exc)) from exc
    raise ConfigError("%s: unknown problem %r" % (_join(node.path, "name"), name))


def build_problem_from_dict(raw, path="problem"):
    """Rebuild a problem from its raw config fragment (worker side)."""
    return build_problem(Node(raw, path))


def build_merit(node):
    if node is None:
        return MeritParams()
    sigma = node.num("sigma", default=0.5)
    eps_tau = node.num("eps_tau", default=0.1)
    eps_xi = node.num("eps_xi", default=0.1)
    tau_init = node.num("tau_init", default=1.0)
    xi_init = node.num("xi_init", default=1.0)
    node.require_range("sigma", sigma, 0.0, 1.0)
    node.require_range("eps_tau", eps_tau, 0.0, 1.0)
    node.require_range("eps_xi", eps_xi, 0.0, 1.0)
    if tau_init <= 0.0:
        raise ConfigError("%s: must be positive, got %r" % (_join(node.path, "tau_init"), tau_init))
    if xi_init <= 0.0:
        raise ConfigError("%s: must be positive, got %r" % (_join(node.path, "xi_init"), xi_init))
    node.close()
    return MeritParams(
        sigma=sigma, eps_tau=eps_tau, eps_xi=eps_xi, tau_init=tau_init, xi_init=xi_init
    )


def build_beta_schedule(node):
    if node is None:
        return BetaSchedule.constant()
    kind = node.str_("kind", required=True)
    try:
        if kind == "constant":
            gamma = node.num("gamma", default=0.5)
            node.close()
            return BetaSchedule.constant(gamma)
        if kind == "explicit":
            values = node.list_("values", required=True)
            node.close()
            return BetaSchedule.explicit(values)
    except ConfigError:
        raise
    except StosqpError as exc:
        raise ConfigError("%s: %s" % (node.path, exc)) from exc
    raise ConfigError("%s: unknown schedule kind %r" % (_join(node.path, "kind"), kind))


def build_hessian_policy(node):
    if node is None:
        return HessianPolicy.identity()
    kind = node.str_("kind", required=True)
    try:
        if kind == "identity":
            node.close()
            return HessianPolicy.identity()
        if kind == "regularized":
            zeta = node.num("zeta", default=0.1)
            shift0 = node.num("shift0", default=1e-3)
            growth = node.num("growth", default=10.0)
            max_shifts = node.int_("max_shifts", default=40)
            node.close()
            return HessianPolicy.regularized(zeta, shift0, growth, max_shifts)
    except ConfigError:
        raise
    except StosqpError as exc:
        raise ConfigError("%s: %s" % (node.path, exc)) from exc
    # user hooks hold callables and cannot come from JSON
    raise ConfigError("%s: unknown policy kind %r" % (_join(node.path, "kind"), kind))


def build_noise(node):
    kind = node.str_("kind", required=True)
    try:
        if kind == "none":
            node.close()
            return NoiseModel.none()
        if kind == "gaussian":
            vb = node.num("variance_bound", required=True)
            node.close()
            return NoiseModel.gaussian(vb)
        if kind == "symmetric_bounded":
            vb = node.num("variance_bound", required=True)
            radius = node.num("radius", required=True)
            node.close()
            return NoiseModel.symmetric_bounded(vb, radius)
        if kind == "minibatch":
            n_components = node.int_("n_components", required=True)
            batch = node.int_("batch", required=True)
            node.close()
            return NoiseModel.minibatch(n_components, batch)
    except ConfigError:
        raise
    except StosqpError as exc:
        raise ConfigError("%s: %s" % (node.path, exc)) from exc
    raise ConfigError("%s: unknown noise kind %r" % (_join(node.path, "kind"), kind))


def build_mode(node):
    """Returns (mode, noise, stop_eps) for AlgoConfig."""
    kind = node.str_("kind", required=True)
    if kind == "stochastic":
        noise_node = node.node("noise", required=True)
        noise = build_noise(noise_node)
        node.close()
        return "stochastic", noise, None
    if kind == "deterministic":
        stop_eps = node.num("stop_eps")
        if stop_eps is not None and stop_eps <= 0.0:
            raise ConfigError(
                "%s: must be positive, got %r" % (_join(node.path, "stop_eps"), stop_eps)
            )
        node.close()
        return "deterministic", None, stop_eps
    raise ConfigError("%s: unknown mode kind %r" % (_join(node.path, "kind"), kind))


def _algo_common(node):
    """Fields shared by full algo configs and experiment templates."""
    merit = build_merit(node.node("merit"))
    theta = node.num("theta", default=1.0)
    hessian = build_hessian_policy(node.node("hessian_policy"))
    mode, noise, stop_eps = build_mode(node.node("mode", required=True))
    d_zero_tol = node.num("d_zero_tol", default=1e-12)
    kkt_tol = node.num("kkt_tol", default=1e-9)
    return {
        "merit": merit,
        "theta": theta,
        "hessian_policy": hessian,
        "mode": mode,
        "noise": noise,
        "stop_eps": stop_eps,
        "d_zero_tol": d_zero_tol,
        "kkt_tol": kkt_tol,
    }


def build_algo(node):
    k_max = node.int_("k_max", required=True)
    seed = node.int_("seed", default=0)
    beta = build_beta_schedule(node.node("beta_schedule"))
    common = _algo_common(node)
    node.close()
    try:
        return AlgoConfig(k_max=k_max, seed=seed, beta_schedule=beta, **common)
    except StosqpError as exc:
        raise ConfigError("%s: %s" % (node.path, exc)) from exc


def build_algo_template(node):
    """AlgoConfig kwargs for an experiment sweep.

    k_max, the beta schedule, and the seed are controlled by the sweep
    itself and must not appear in the template.
    """
    for key in ("k_max", "beta_schedule", "seed"):
        if key in node.raw:
            raise ConfigError(
                "%s: controlled by the experiment sweep, remove it"
                % _join(node.path, key)
            )
    common = _algo_common(node)
    node.close()
    return common


def build_output(node, defaults):
    """Output locations; `defaults` maps allowed keys to default values
    ("dir" plus the file-name keys relevant to the command)."""
    values = dict(defaults)
    if node is not None:
        for key, default in defaults.items():
            v = node.str_(key, default=default)
            if not v:
                raise ConfigError("%s: must be a nonempty string" % _join(node.path, key))
            values[key] = v
        node.close()
    return values


@dataclass
class SolveConfig:
    problem: Problem
    problem_cfg: dict
    algo: AlgoConfig
    out_dir: str
    trace_name: str
    summary_name: str


def parse_solve_config(doc):
    root = Node(doc, "")
    check_schema_version(root)
    problem_node = root.node("problem", required=True)
    problem_raw = dict(problem_node.raw)
    problem = build_problem(problem_node)
    algo = build_algo(root.node("algo", required=True))
    out = build_output(
        root.node("output"),
        {"dir": ".", "trace": "trace.csv", "summary": "summary.json"},
    )
    root.close()
    return SolveConfig(
        problem=problem,
        problem_cfg=problem_raw,
        algo=algo,
        out_dir=out["dir"],
        trace_name=out["trace"],
        summary_name=out["summary"],
    )


def env_output_dir(configured):
    return os.environ.get(ENV_OUTPUT_DIR) or configured


def env_workers(configured):
    raw = os.environ.get(ENV_WORKERS)
    if raw is None:
        return configured
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError("%s: not an integer: %r" % (ENV_WORKERS, raw)) from exc
    if workers < 1:
        raise ConfigError("%s: must be >= 1, got %d" % (ENV_WORKERS, workers))
    return workers
