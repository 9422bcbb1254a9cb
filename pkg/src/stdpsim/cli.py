"""Batch experiment runner.

Configs are single JSON documents validated strictly before anything
runs: unknown keys are rejected with the path to the offending field.
The ``run`` verb writes one trace file per seed plus a manifest that
echoes the resolved config bit-exactly, so re-running from the manifest
reproduces byte-identical traces.  ``validate`` runs the oracle
comparison suites and prints a pass/fail table; ``scenarios`` lists the
bundled experiment layouts.

Exit codes: 0 on success, 1 on validation or engine failure, 2 on config
errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from stdpsim import __version__
from stdpsim.checks import CheckResult, run_all_checks
from stdpsim.discrete import (
    DiscreteParams,
    run_discrete_full,
    simulate_fast_calcium,
    time_average,
    write_discrete_trace,
)
from stdpsim.kernels import CalciumSpec, ExponentialCurve, PairBasedSpec
from stdpsim.markov import PositivityError, build_kernel
from stdpsim.simulator import (
    AdditiveRule,
    ConstantDrop,
    FrozenRule,
    LinearActivation,
    NeuronSpec,
    SimConfig,
    build_activation,
    build_reset,
    build_weight_rule,
    run,
    run_unfiltered,
    write_trace,
)
from stdpsim.spike_core import RngStream, SpikeTrain, sample_homogeneous_arrivals

__all__ = ["main", "ConfigError", "load_config", "run_scenario", "SCENARIOS"]

ENGINES = ("continuous", "continuous-unfiltered", "discrete", "discrete-fast")


class ConfigError(ValueError):
    """A config failed parsing or schema validation; exit code 2."""


# ---------------------------------------------------------------------------
# Config loading and schema validation
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    """Read a JSON config, unwrapping a manifest's ``config`` echo if given."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "config" in doc and "version" in doc:
        doc = doc["config"]
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: manifest 'config' must be an object")
    return doc


def _as_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    return value


def _check_keys(obj: dict, path: str, required: set, optional: set) -> None:
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {sorted(missing)}")
    extra = set(obj) - required - optional
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {sorted(extra)}")


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer")
    return value


def _as_seeds(value, path: str) -> list[int]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of integers")
    return [_as_int(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _as_times(value, path: str) -> SpikeTrain:
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list of times")
    try:
        return SpikeTrain.from_times(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_section(obj, path: str, builder: Callable, label: str):
    section = _as_object(obj, path)
    _check_keys(section, path, {"rule"} if label == "rule" else {"kind"}, {"params"})
    name = section.get("rule" if label == "rule" else "kind")
    params = section.get("params", {})
    if not isinstance(name, str):
        raise ConfigError(f"{path}: '{'rule' if label == 'rule' else 'kind'}' must be a string")
    _as_object(params, f"{path}.params")
    try:
        return builder(name, params)
    except PositivityError:
        # an invariant violation, not a schema problem: exit code 1
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_neuron(obj, path: str) -> NeuronSpec:
    section = _as_object(obj, path)
    _check_keys(section, path, {"rate", "activation"}, {"reset"})
    activation = _build_section(
        section["activation"], f"{path}.activation", build_activation, "kind"
    )
    reset = (
        _build_section(section["reset"], f"{path}.reset", build_reset, "kind")
        if "reset" in section
        else None
    )
    try:
        kw = {"reset": reset} if reset is not None else {}
        return NeuronSpec(
            rate=_as_number(section["rate"], f"{path}.rate"),
            activation=activation,
            **kw,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_TOP_KEYS_COMMON = {"scenario", "seeds", "out", "horizon", "report"}
_CONTINUOUS_KEYS = {
    "engine", "kernel", "neuron", "weight", "alpha", "w_init", "x_init",
    "h_max", "rk_step", "sample_dt", "event_ceiling", "pre_times",
    "post_times", "record",
}
_DISCRETE_FAST_KEYS = {"engine", "discrete", "x0", "c0"}
_DISCRETE_KEYS = {"engine", "discrete", "channel", "alpha", "x0", "c0", "w0"}

_DISCRETE_PARAM_KEYS = {
    "lam", "beta", "gamma", "c1", "c2", "w", "a_p", "a_d", "mu", "k0",
}
_CHANNEL_KEYS = {"c1", "c2", "decay", "theta_p", "theta_d", "rate_p", "rate_d", "c_init"}


def _build_discrete_params(obj, path: str) -> DiscreteParams:
    section = _as_object(obj, path)
    _check_keys(section, path, {"lam", "beta", "gamma"}, _DISCRETE_PARAM_KEYS)
    kw = dict(section)
    if isinstance(kw.get("gamma"), list):
        kw["gamma"] = tuple(kw["gamma"])
    if isinstance(kw.get("k0"), list):
        kw["k0"] = tuple(kw["k0"])
    try:
        return DiscreteParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_channel(obj, path: str) -> CalciumSpec:
    section = _as_object(obj, path)
    _check_keys(section, path, _CHANNEL_KEYS - {"c_init"}, {"c_init"})
    try:
        return CalciumSpec(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Job construction
# ---------------------------------------------------------------------------


def _continuous_job(config: dict, unfiltered: bool) -> Callable:
    kernel = _build_section(config["kernel"], "kernel", build_kernel, "rule")
    neuron = _build_neuron(config["neuron"], "neuron")
    weight = _build_section(config["weight"], "weight", build_weight_rule, "rule")
    alpha = _as_number(config["alpha"], "alpha")
    horizon = _as_number(config["horizon"], "horizon")
    opts = {}
    for key in ("w_init", "x_init", "h_max", "rk_step", "sample_dt"):
        if key in config:
            opts[key] = _as_number(config[key], key)
    if "event_ceiling" in config:
        opts["event_ceiling"] = _as_int(config["event_ceiling"], "event_ceiling")
    if "record" in config and not isinstance(config["record"], bool):
        raise ConfigError("record: expected a boolean")
    opts["record"] = config.get("record", True)
    pre = _as_times(config["pre_times"], "pre_times") if "pre_times" in config else None
    post = _as_times(config["post_times"], "post_times") if "post_times" in config else None
    runner = run_unfiltered if unfiltered else run

    def job(seed: int, out_dir: str) -> dict:
        try:
            cfg = SimConfig(
                neuron=neuron, kernel=kernel, weight=weight, alpha=alpha,
                horizon=horizon, seed=seed, pre_train=pre, post_train=post,
                **opts,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        result = runner(cfg)
        name = f"{config['scenario']}_seed{seed}.tsv"
        write_trace(os.path.join(out_dir, name), result)
        return {
            "seed": seed,
            "files": [name],
            "summary": {"events": result.counts, "final_w": result.final.w},
        }

    return job


def _discrete_fast_job(config: dict) -> Callable:
    params = _build_discrete_params(config["discrete"], "discrete")
    horizon = _as_number(config["horizon"], "horizon")
    x0 = _as_int(config.get("x0", 0), "x0")
    c0 = _as_int(config.get("c0", 0), "c0")

    def job(seed: int, out_dir: str) -> dict:
        trace = simulate_fast_calcium(params, horizon, RngStream(seed), x0=x0, c0=c0)
        name = f"{config['scenario']}_seed{seed}.tsv"
        write_discrete_trace(os.path.join(out_dir, name), trace)
        return {
            "seed": seed,
            "files": [name],
            "summary": {
                "events": int(trace.times.size - 1),
                "mean_x": time_average(trace, trace.x),
                "mean_c": time_average(trace, trace.c),
            },
        }

    return job


def _discrete_full_job(config: dict) -> Callable:
    params = _build_discrete_params(config["discrete"], "discrete")
    channel = _build_channel(config["channel"], "channel")
    alpha = _as_number(config["alpha"], "alpha")
    horizon = _as_number(config["horizon"], "horizon")
    x0 = _as_int(config.get("x0", 0), "x0")
    c0 = _as_int(config.get("c0", 0), "c0")
    w0 = _as_int(config.get("w0", 0), "w0")

    def job(seed: int, out_dir: str) -> dict:
        trace = run_discrete_full(
            params, channel, alpha, horizon, RngStream(seed), x0=x0, c0=c0, w0=w0
        )
        name = f"{config['scenario']}_seed{seed}.tsv"
        write_discrete_trace(os.path.join(out_dir, name), trace)
        return {
            "seed": seed,
            "files": [name],
            "summary": {
                "events": int(trace.times.size - 1),
                "final_w": int(trace.w[-1]),
            },
        }

    return job


# ---------------------------------------------------------------------------
# Bundled scenarios
# ---------------------------------------------------------------------------


def _pairbased_s1_job(config: dict) -> Callable:
    horizon = _as_number(config.get("horizon", 40.0), "horizon")
    pot = ExponentialCurve(1.0, 1.0)
    dep = ExponentialCurve(0.55, 1.4)

    def job(seed: int, out_dir: str) -> dict:
        # one fixed spike pattern per seed, replayed through every variant
        rng = RngStream(seed)
        pre = sample_homogeneous_arrivals(rng, 1.0, horizon)
        post = sample_homogeneous_arrivals(rng, 1.0, horizon)
        neuron = NeuronSpec(rate=0.0, activation=LinearActivation(1.0))
        files = []
        finals = {}
        for scheme in ("all_to_all", "nearest_symmetric", "nearest_reduced"):
            spec = PairBasedSpec.hebbian(pot, dep, scheme=scheme)
            for mode, runner in (("filtered", run), ("unfiltered", run_unfiltered)):
                cfg = SimConfig(
                    neuron=neuron, kernel=spec, weight=AdditiveRule(), alpha=1.0,
                    horizon=horizon, pre_train=pre, post_train=post,
                    sample_dt=0.5,
                )
                result = runner(cfg)
                name = f"pairbased-s1_seed{seed}_{scheme}_{mode}.tsv"
                write_trace(os.path.join(out_dir, name), result)
                files.append(name)
                finals[f"{scheme}_{mode}"] = result.final.w
        return {"seed": seed, "files": files, "summary": {"final_w": finals}}

    return job


def _calcium_s2_job(config: dict) -> Callable:
    horizon = _as_number(config.get("horizon", 200.0), "horizon")
    spec = CalciumSpec(
        c1=1.0, c2=1.0, decay=1.0, theta_p=1.3, theta_d=0.6,
        rate_p=1.0, rate_d=0.5,
    )
    params = DiscreteParams(lam=1.0, beta=1.0, gamma=1.0, c1=1, c2=1, w=2)

    def job(seed: int, out_dir: str) -> dict:
        cfg = SimConfig(
            neuron=NeuronSpec(
                rate=1.0, activation=LinearActivation(1.0), reset=ConstantDrop(1.0)
            ),
            kernel=spec, weight=FrozenRule(), alpha=1.0, horizon=horizon,
            seed=seed, w_init=2.0, sample_dt=0.5,
        )
        result = run(cfg)
        cont = f"calcium-s2_seed{seed}_continuous.tsv"
        write_trace(os.path.join(out_dir, cont), result)
        trace = simulate_fast_calcium(params, horizon, RngStream(seed))
        disc = f"calcium-s2_seed{seed}_discrete.tsv"
        write_discrete_trace(os.path.join(out_dir, disc), trace)
        return {
            "seed": seed,
            "files": [cont, disc],
            "summary": {"discrete_mean_c": time_average(trace, trace.c)},
        }

    return job


SCENARIOS = {
    "pairbased-s1": (
        _pairbased_s1_job,
        "three pair-based schemes on one fixed spike pattern, filtered and "
        "unfiltered weights (6 traces per seed)",
    ),
    "calcium-s2": (
        _calcium_s2_job,
        "continuous vs integer-quanta calcium side by side (2 traces per seed)",
    ),
}


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------


def _resolve_job(config: dict) -> Callable:
    scenario = config.get("scenario", "custom")
    if not isinstance(scenario, str):
        raise ConfigError("scenario: expected a string")
    if scenario in SCENARIOS:
        _check_keys(config, "<config>", {"seeds"}, _TOP_KEYS_COMMON)
        return SCENARIOS[scenario][0](config)
    engine = config.get("engine")
    if engine is None:
        raise ConfigError(
            f"unknown scenario {scenario!r} and no engine given; "
            f"bundled scenarios: {sorted(SCENARIOS)}"
        )
    if engine not in ENGINES:
        raise ConfigError(f"engine: unknown engine {engine!r}; known: {list(ENGINES)}")
    if engine == "continuous":
        keys = _CONTINUOUS_KEYS
        required = {"engine", "kernel", "neuron", "weight", "alpha"}
    elif engine == "continuous-unfiltered":
        keys = _CONTINUOUS_KEYS
        required = {"engine", "kernel", "neuron", "weight", "alpha"}
    elif engine == "discrete-fast":
        keys = _DISCRETE_FAST_KEYS
        required = {"engine", "discrete"}
    else:
        keys = _DISCRETE_KEYS
        required = {"engine", "discrete", "channel", "alpha"}
    _check_keys(config, "<config>", required | {"seeds", "horizon"},
                keys | _TOP_KEYS_COMMON)
    if engine == "continuous":
        return _continuous_job(config, unfiltered=False)
    if engine == "continuous-unfiltered":
        return _continuous_job(config, unfiltered=True)
    if engine == "discrete-fast":
        return _discrete_fast_job(config)
    return _discrete_full_job(config)


def run_scenario(config: dict) -> dict:
    """Run every seed, write traces and the manifest, return the manifest."""
    config = dict(config)
    config.setdefault("scenario", "custom")
    seeds = _as_seeds(config.get("seeds"), "seeds")
    out_dir = config.get("out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out: expected an output directory path")
    if "report" in config and not isinstance(config["report"], bool):
        raise ConfigError("report: expected a boolean")
    job = _resolve_job(config)
    os.makedirs(out_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=min(8, len(seeds))) as pool:
        outcomes = list(pool.map(lambda s: job(s, out_dir), seeds))
    outcomes.sort(key=lambda o: o["seed"])
    files = [name for o in outcomes for name in o["files"]]
    manifest = {
        "version": __version__,
        "seeds": seeds,
        "config": config,
        "files": files,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if config.get("report"):
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(
                {str(o["seed"]): o["summary"] for o in outcomes},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# Validation verb
# ---------------------------------------------------------------------------


def _check_buildable(config: dict) -> CheckResult:
    try:
        _resolve_job(config)
    except ConfigError:
        raise
    except ValueError as exc:
        return CheckResult(
            name="config-buildable", passed=False, measured=math.inf,
            bound=0.0, detail=str(exc),
        )
    return CheckResult(
        name="config-buildable", passed=True, measured=0.0, bound=0.0,
        detail="engine objects constructed",
    )


def validate_config(config: dict, quick: bool = False) -> list[CheckResult]:
    """Buildability plus the oracle comparison suites."""
    results = [_check_buildable(config)]
    results.extend(run_all_checks(quick))
    return results


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _apply_overrides(config: dict, args) -> dict:
    config = dict(config)
    if args.seed is not None:
        try:
            config["seeds"] = [int(v) for v in args.seed.split(",")]
        except ValueError as exc:
            raise ConfigError("--seed: expected comma-separated integers") from exc
    if args.out is not None:
        config["out"] = args.out
    if args.horizon is not None:
        config["horizon"] = args.horizon
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stdpsim",
        description="event-driven synaptic plasticity experiments",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "validate"):
        p = sub.add_parser(verb)
        p.add_argument("config", help="JSON config (or manifest) path")
        p.add_argument("--seed", help="override seed list, comma-separated")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--horizon", type=float, help="override horizon")
        if verb == "validate":
            p.add_argument(
                "--quick", action="store_true",
                help="reduced sample counts and looser bounds",
            )
    sub.add_parser("scenarios")
    args = parser.parse_args(argv)

    if args.verb == "scenarios":
        for name, (_, description) in sorted(SCENARIOS.items()):
            print(f"{name}: {description}")
        return 0

    try:
        config = _apply_overrides(load_config(args.config), args)
        if args.verb == "run":
            manifest = run_scenario(config)
            print(f"wrote {len(manifest['files'])} trace file(s) to {config['out']}")
            return 0
        results = validate_config(config, quick=args.quick)
        for result in results:
            print(result.line())
        return 0 if all(r.passed for r in results) else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # engine failures propagate with context
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
