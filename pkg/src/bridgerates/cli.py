"""Command-line front end: config-driven experiments with reproducible outputs.

Every subcommand reads one JSON config, runs a single experiment, and
writes three files into the output directory: ``<cmd>.json`` (the full
result), ``<cmd>.csv`` (flat numeric metrics), and ``<cmd>.schema.json``
(the shape of the JSON). Outputs carry the config hash and the effective
seed and contain no timestamps, so a rerun with the same config is
byte-identical. Failures write ``error.json`` and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bridge import BridgeSpec, conditional_samples
from .chain import GeneratorMatrix, ProbVector, invariant_measure, is_irreducible, transition_at, validate_generator
from .conjugate import save_samples
from .estimate import (
    ball_rate,
    build_oracle,
    contract_dvg_from_bfg,
    infconv_bfg,
    infconv_dvg,
    mc_decay_rate,
)
from .ratefun import PairMeasure, bfg_rate, dvg_rate, pair_empirical_rate

__all__ = ["ExperimentConfig", "main"]

SEED_ENV = "BRIDGERATES_SEED"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's inputs, loaded strictly from a JSON file."""

    generator: list
    t0: float = 1.0
    mode: str = "occupation"
    n_samples: int = 20_000
    seed: int = 0
    threads: int = 1
    lam_box: float = 40.0
    rho: list | None = None
    flux: list | None = None
    theta: list | None = None
    x: int | None = None
    y: int | None = None
    epsilon: float = 0.03
    n_grid: list | None = None
    n_paths: int = 100_000
    reference: float | None = None

    @classmethod
    def from_file(cls, path) -> tuple["ExperimentConfig", str]:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        if "generator" not in raw:
            raise ValueError("config needs a 'generator' matrix")
        canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(canonical.encode()).hexdigest()
        return cls(**raw), digest

    def chain(self) -> GeneratorMatrix:
        return validate_generator(self.generator)

    def rho_vector(self) -> ProbVector:
        if self.rho is None:
            raise ValueError("config needs 'rho' for this command")
        return ProbVector(np.asarray(self.rho, dtype=float))


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    """Recursively convert to plain JSON types; nonfinite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _schema_of(payload):
    if isinstance(payload, dict):
        return {
            "type": "object",
            "properties": {k: _schema_of(v) for k, v in sorted(payload.items())},
        }
    if isinstance(payload, list):
        return {"type": "array", "items": _schema_of(payload[0]) if payload else {}}
    if isinstance(payload, bool):
        return {"type": "boolean"}
    if isinstance(payload, int):
        return {"type": "integer"}
    if isinstance(payload, float):
        return {"type": "number"}
    if payload is None:
        return {"type": "null"}
    return {"type": "string"}


def _flat_metrics(payload, prefix=""):
    """Numeric leaves of the payload as (dotted-path, value) pairs."""
    rows = []
    if isinstance(payload, dict):
        for key in sorted(payload):
            rows.extend(_flat_metrics(payload[key], f"{prefix}{key}."))
    elif isinstance(payload, list):
        for idx, item in enumerate(payload):
            rows.extend(_flat_metrics(item, f"{prefix}{idx}."))
    elif isinstance(payload, bool):
        rows.append((prefix[:-1], int(payload)))
    elif isinstance(payload, (int, float)):
        rows.append((prefix[:-1], payload))
    elif payload in ("inf", "-inf", "nan"):
        rows.append((prefix[:-1], payload))
    return rows


def _write_outputs(out_dir: Path, name: str, payload: dict, config_hash: str, seed: int) -> None:
    payload = dict(payload)
    payload["config_hash"] = config_hash
    payload["seed"] = seed
    payload = _jsonable(payload)
    (out_dir / f"{name}.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / f"{name}.schema.json").write_text(
        json.dumps(_schema_of(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(out_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value", "config_hash", "seed"])
        for metric, value in _flat_metrics(payload):
            if metric in ("config_hash", "seed"):
                continue
            writer.writerow([metric, value, config_hash, seed])


# ---------------------------------------------------------------------------
# subcommands


def cmd_chain_info(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    P = transition_at(Q, cfg.t0)
    return {
        "n_states": Q.n_states,
        "irreducible": is_irreducible(Q),
        "exit_rates": Q.exit_rates,
        "uniformization_rate": float(Q.exit_rates.max()),
        "invariant": invariant_measure(Q).weights,
        "t0": cfg.t0,
        "transition_t0": P.probs,
    }


def cmd_rates(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    rho = cfg.rho_vector()
    res = dvg_rate(rho, Q)
    payload = {
        "rho": rho.weights,
        "dvg": {
            "value": res.value,
            "maximizer": res.maximizer,
            "gradient_norm": res.gradient_norm,
            "iterations": res.iterations,
        },
    }
    if cfg.flux is not None:
        j = np.asarray(cfg.flux, dtype=float)
        payload["bfg"] = {"value": bfg_rate(rho, j, Q), "flux": j}
    if cfg.theta is not None:
        P = transition_at(Q, cfg.t0)
        theta = PairMeasure(np.asarray(cfg.theta, dtype=float))
        payload["pair"] = {"value": pair_empirical_rate(theta, P), "t0": cfg.t0}
    return payload


def cmd_bridge_sample(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    out_dir = Path(args.out)
    pairs = (
        [(cfg.x, cfg.y)]
        if cfg.x is not None and cfg.y is not None
        else [(x, y) for x in range(Q.n_states) for y in range(Q.n_states)]
    )
    summary = []
    for x, y in pairs:
        spec = BridgeSpec(Q, x, y, cfg.t0)
        law = conditional_samples(spec, cfg.mode, cfg.n_samples, cfg.seed, threads=args.threads)
        dump = out_dir / f"samples_{cfg.mode}_x{x}_y{y}.f64"
        save_samples(dump, law.samples)
        summary.append({
            "x": x,
            "y": y,
            "n_samples": law.n_samples,
            "d": law.d,
            "mean": law.mean(),
            "file": dump.name,
        })
    return {"mode": cfg.mode, "t0": cfg.t0, "pairs": summary}


def cmd_infconv(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    rho = cfg.rho_vector()
    oracle = build_oracle(
        Q, cfg.t0, cfg.mode, cfg.n_samples, cfg.seed,
        cache_dir=args.cache, threads=args.threads, lam_box=cfg.lam_box,
    )
    P = transition_at(Q, cfg.t0)
    if cfg.mode == "occupation":
        res = infconv_dvg(rho, oracle, P, seed=cfg.seed)
        reference = dvg_rate(rho, Q).value
        target = {"rho": rho.weights}
    else:
        if cfg.flux is None:
            raise ValueError("flux mode needs a 'flux' target in the config")
        j = np.asarray(cfg.flux, dtype=float)
        res = infconv_bfg(rho, j, oracle, P, seed=cfg.seed)
        reference = bfg_rate(rho, j, Q)
        target = {"rho": rho.weights, "flux": j}
    per_time = res.value / cfg.t0 if math.isfinite(res.value) else math.inf
    error = abs(per_time - reference) if math.isfinite(per_time) and math.isfinite(reference) \
        else (0.0 if per_time == reference else math.inf)
    return {
        "mode": cfg.mode,
        "t0": cfg.t0,
        "n_samples": cfg.n_samples,
        "target": target,
        "value_per_window": res.value,
        "value_per_time": per_time,
        "reference": reference,
        "abs_error": error,
        "certificate": res.certificate,
        "feasible": res.feasible,
        "converged": res.converged,
        "iterations": res.iterations,
        "theta": res.theta.weights,
        "k": res.k.vectors,
    }


def cmd_contract(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    rho = cfg.rho_vector()
    res = contract_dvg_from_bfg(rho, Q)
    reference = dvg_rate(rho, Q).value
    return {
        "rho": rho.weights,
        "value": res.value,
        "dual_value": res.dual_value,
        "gap": res.gap,
        "reference": reference,
        "abs_error": abs(res.value - reference),
        "flux": res.flux,
        "potential": res.potential,
    }


def cmd_mc_verify(cfg: ExperimentConfig, args) -> dict:
    Q = cfg.chain()
    rho = cfg.rho_vector()
    if cfg.n_grid is None:
        raise ValueError("config needs 'n_grid' for mc-verify")
    fit = mc_decay_rate(Q, rho, cfg.epsilon, cfg.n_grid, cfg.n_paths, cfg.seed)
    reference = cfg.reference
    if reference is None:
        reference, _ = ball_rate(Q, rho, cfg.epsilon)
    rel_error = abs(fit.slope - reference) / reference if reference > 0 else math.inf
    return {
        "target": rho.weights,
        "epsilon": cfg.epsilon,
        "n_grid": fit.n_grid,
        "hits": fit.hits,
        "n_paths": fit.n_paths,
        "neg_log_prob": fit.neg_log_prob,
        "slope": fit.slope,
        "slope_se": fit.slope_se,
        "intercept": fit.intercept,
        "reference": reference,
        "rel_error": rel_error,
    }


HANDLERS = {
    "chain-info": cmd_chain_info,
    "rates": cmd_rates,
    "bridge-sample": cmd_bridge_sample,
    "infconv": cmd_infconv,
    "contract": cmd_contract,
    "mc-verify": cmd_mc_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgerates",
        description="Rate functionals of Markov chains, cross-validated three ways.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in HANDLERS.items():
        cmd = sub.add_parser(name, help=handler.__doc__)
        cmd.add_argument("--config", required=True, help="path to the JSON experiment config")
        cmd.add_argument("--out", default="out", help="output directory (default: out)")
        cmd.add_argument("--threads", type=int, default=None,
                         help="sampling threads (default: config value)")
        cmd.add_argument("--cache", default=None,
                         help="directory for reusable per-pair sample dumps")
        cmd.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = None
    seed = None
    try:
        cfg, config_hash = ExperimentConfig.from_file(args.config)
        env_seed = os.environ.get(SEED_ENV)
        if env_seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(env_seed))
        if args.threads is None:
            args.threads = cfg.threads
        seed = cfg.seed
        payload = args.handler(cfg, args)
    except Exception as exc:
        error = {
            "command": args.command,
            "error": type(exc).__name__,
            "message": str(exc),
            "config_hash": config_hash,
        }
        (out_dir / "error.json").write_text(
            json.dumps(_jsonable(error), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write_outputs(out_dir, args.command, payload, config_hash, seed)
    print(f"wrote {out_dir / (args.command + '.json')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
