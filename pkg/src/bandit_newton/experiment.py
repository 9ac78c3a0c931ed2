"""Replicated runs, sweeps and their file outputs."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import environments, geometry, ons
from .config import OVERRIDE_KEYS, ExperimentConfig
from .errors import AlgorithmFault, ConfigError, InvalidInputError

log = logging.getLogger(__name__)


def position_body(body, spec, epsilon, rng):
    kind = (spec or {}).get("kind", "identity")
    if kind == "identity":
        return geometry.positioned(body, epsilon=epsilon)
    if kind == "affine":
        return geometry.positioned(body, spec.get("T"), spec.get("c"), epsilon=epsilon)
    if kind == "isotropic":
        return geometry.position_isotropic(body, spec.get("n_samples"), rng, epsilon=epsilon)
    raise ConfigError(f"unknown positioning {kind!r}")


def build(config):
    """Body, positioned body, constants and oracle for a config (the oracle depends only on ``seed``)."""
    try:
        body = geometry.body_from_spec(config.body)
        consts = config.constants()
        env_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
        pos = position_body(body, config.positioning, consts.epsilon, env_rng)
        oracle = environments.build_oracle(config.loss, body, max(config.n, 1), config.mode, env_rng)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    return body, pos, consts, oracle


def rounded_set(x):
    """Threshold rounding of a point of the unit cube at ½."""
    return frozenset(int(i) for i in np.flatnonzero(np.asarray(x) >= 0.5))


def run_replica(config, index):
    """One replica; returns ``(trace, record)`` where ``record`` goes into the summary."""
    _, pos, consts, oracle = build(config)
    seed = config.seed + index
    algo_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    rng, noise_rng = np.random.default_rng(algo_ss), np.random.default_rng(noise_ss)
    record = {"replica": index, "seed": seed, "fault": None}
    if config.n == 0:
        trace = ons.RegretTrace(d=pos.dim)
        trace.cum_true_regret = np.zeros(0)
    else:
        try:
            trace = ons.run(oracle, pos, consts, rng, noise_rng=noise_rng)
        except AlgorithmFault as exc:
            trace = exc.trace
            record["fault"] = str(exc)
            log.error("replica %d: %s", index, exc)
    n_done = len(trace)
    reg = trace.final_regret
    record.update({
        "rounds": n_done,
        "final_regret": reg,
        "reg_over_sqrt_n": reg / math.sqrt(n_done) if n_done else 0.0,
        "restarts": trace.restarts,
        "bonuses": trace.bonuses,
        "max_bonus_count": trace.max_bonus_count,
        "floor_events": trace.floor_events,
        "final_w": trace.final_w,
    })
    if trace.final_mu is not None:
        record["final_mu"] = [float(v) for v in trace.final_mu]
    if trace.x_star is not None:
        record["x_star"] = [float(v) for v in trace.x_star]
    loss = oracle.loss_at(1)
    if isinstance(loss, environments.LovaszLoss) and trace.final_mu is not None:
        S = rounded_set(trace.final_mu)
        best, best_val = environments.brute_force_minimum(loss.table, loss.d)
        record.update({"rounded_set": sorted(S), "rounded_value": loss.set_value(S),
                       "min_set": sorted(best), "min_value": best_val})
    return trace, record


def _replica_job(args):
    config_dict, index, out_dir = args
    config = ExperimentConfig.from_dict(config_dict)
    trace, record = run_replica(config, index)
    path = os.path.join(out_dir, f"replica_{index:03d}.csv")
    try:
        trace.to_csv(path)
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc}") from exc
    record["trace"] = os.path.basename(path)
    return record


def summarize(config, records):
    consts = config.constants()
    regrets = np.array([r["final_regret"] for r in records]) if records else np.zeros(0)
    ratios = np.array([r["reg_over_sqrt_n"] for r in records]) if records else np.zeros(0)
    summary = {
        "n": config.n,
        "d": config.dim,
        "mode": config.mode,
        "replicas": len(records),
        "constants": {k: getattr(consts, k) for k in ("L", "eta", "lam", "sigma_sq", "gamma",
                                                    "epsilon", "F_max", "C_log")},
        "constant_warnings": list(consts.warnings),
        "mean_final_regret": float(regrets.mean()) if len(regrets) else 0.0,
        "median_final_regret": float(np.median(regrets)) if len(regrets) else 0.0,
        "mean_reg_over_sqrt_n": float(ratios.mean()) if len(ratios) else 0.0,
        "restarts": int(sum(r["restarts"] for r in records)),
        "bonuses": int(sum(r["bonuses"] for r in records)),
        "floor_events": int(sum(r["floor_events"] for r in records)),
        "faults": int(sum(r["fault"] is not None for r in records)),
        "per_replica": records,
    }
    return summary


def run_experiment(config, out_dir=None, workers=1):
    """Run every replica, write one CSV each plus ``summary.json``; return the summary dict."""
    out_dir = config.out if out_dir is None else out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    build(config)  # surface config errors before any replica starts
    jobs = [(config.to_dict(), i, out_dir) for i in range(config.replicas)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replica_job, jobs))
    else:
        records = [_replica_job(j) for j in jobs]
    summary = summarize(config, records)
    path = os.path.join(out_dir, "summary.json")
    try:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc}") from exc
    return summary


SWEEP_COLUMNS = ("value", "mean_regret", "reg_over_sqrt_n", "restarts", "runtime_s")


def _resize_body(body, d):
    body = dict(body)
    for key in ("center", "lo", "hi", "shape", "rows"):
        if key in body:
            raise ConfigError(f"cannot sweep d on a body with an explicit {key!r}")
    body["d"] = int(d)
    return body


def config_for(config, axis, value):
    if axis == "n":
        return config.with_override("n", int(value))
    if axis == "d":
        data = config.to_dict()
        data["body"] = _resize_body(data["body"], value)
        data["loss"] = {k: v for k, v in data["loss"].items() if k not in ("center", "c", "pieces")}
        if data["loss"].get("loss") in ("linear", "maxlinear"):
            raise ConfigError("sweeping d needs a loss without explicit coefficients")
        return ExperimentConfig.from_dict(data)
    if axis in OVERRIDE_KEYS or axis in ("delta", "replicas", "seed"):
        return config.with_override(axis, value)
    raise ConfigError(f"cannot sweep over {axis!r}")


def sweep(config, axis, values, out_dir=None, workers=1):
    """run_experiment for each value; writes ``sweep.csv`` and returns its rows."""
    out_dir = config.out if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for value in values:
        cfg = config_for(config, axis, value)
        start = time.perf_counter()
        summary = run_experiment(cfg, os.path.join(out_dir, f"{axis}={value}"), workers)
        rows.append({
            "value": value,
            "mean_regret": summary["mean_final_regret"],
            "reg_over_sqrt_n": summary["mean_reg_over_sqrt_n"],
            "restarts": summary["restarts"],
            "runtime_s": time.perf_counter() - start,
            "faults": summary["faults"],
        })
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([r[c] for c in SWEEP_COLUMNS])
    return rows
