"""Command-line entry point: ``arpo {score,advantage,simulate,compare,report}``.

Exit codes: 0 success, 2 input/schema error, 3 config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .advantage import compute_arpo
from .config import Config, load_config
from .errors import ConfigError, InputError
from .io import dumps, group_records, read_rollouts, score_records, write_atomic, write_jsonl
from .rewards import RewardWeights
from .sim import compare_strategies, make_env, run_training

log = logging.getLogger("arpo")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3


def _effective_config(args: argparse.Namespace) -> Config:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "weights", None):
        try:
            w = RewardWeights.parse(args.weights)
        except InputError as exc:
            raise ConfigError(str(exc)) from None
        cfg = replace(cfg, reward=replace(cfg.reward, weights=w))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _score(args: argparse.Namespace, cfg: Config):
    records = read_rollouts(args.input)
    breakdowns = score_records(records, cfg.reward.weights, cfg.reward.box_variants)
    return records, breakdowns


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    records, breakdowns = _score(args, cfg)
    rows = (
        {"line": r.line, "prompt_id": r.prompt_id, **b.to_json()} for r, b in zip(records, breakdowns)
    )
    write_jsonl(args.output, rows)
    log.info("scored %d records", len(records))
    return EXIT_OK


def _advantages(args: argparse.Namespace, cfg: Config):
    records, breakdowns = _score(args, cfg)
    groups = group_records(records, [b.r_total for b in breakdowns])
    return records, breakdowns, compute_arpo(groups, args.step, cfg.advantage, cfg.train.total_steps)


def _skip_payload(result) -> dict:
    return {
        **result.skip_report.to_json(),
        "lambda_t": result.lambda_t,
        "t_p": result.t_p,
        "degenerate_std": result.degenerate_std,
    }


def cmd_advantage(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    _, _, result = _advantages(args, cfg)
    write_jsonl(args.output, (r.to_json() for r in result.records))
    skip_path = args.skip_report or f"{args.output}.skips.json"
    write_atomic(skip_path, dumps(_skip_payload(result)) + "\n")
    log.info("%d advantage records, %d groups skipped", len(result.records), len(result.skip_report.skipped))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    records, breakdowns, result = _advantages(args, cfg)
    domains: dict[str, dict] = {}
    for rec, b in zip(records, breakdowns):
        d = domains.setdefault(rec.domain.value, {"responses": 0, "_groups": set(), "_r": [], "_t": [], "_s": [], "_f": []})
        d["responses"] += 1
        d["_groups"].add(rec.prompt_id)
        d["_r"].append(b.r_total)
        d["_t"].append(b.r_task)
        d["_s"].append(b.r_spatial)
        d["_f"].append(b.r_fmt)
    adv: dict[str, list[float]] = {}
    for r in result.records:
        adv.setdefault(r.domain.value, []).append(abs(r.a_final))
    stats = {s.domain.value: s for s in result.domain_stats}
    summary = {}
    for name in sorted(domains):
        d = domains[name]
        summary[name] = {
            "responses": d["responses"],
            "groups": len(d["_groups"]),
            "retained_groups": stats[name].n_groups if name in stats else 0,
            "mean_reward": float(np.mean(d["_r"])),
            "mean_r_task": float(np.mean(d["_t"])),
            "mean_r_spatial": float(np.mean(d["_s"])),
            "mean_r_fmt": float(np.mean(d["_f"])),
            "domain_temperature": stats[name].temperature if name in stats else None,
            "mean_abs_advantage": float(np.mean(adv[name])) if name in adv else 0.0,
        }
    report = {
        "tool": "arpo",
        "version": __version__,
        "step": args.step,
        "config": cfg.to_dict(),
        "domains": summary,
        "skip_report": _skip_payload(result),
    }
    write_atomic(args.output, json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    env = cfg.env
    for seed in cfg.seeds:
        tasks = make_env(env.counts, env.num_actions, env.deceptive_fraction, env.seed + seed, env.hard_domain)
        for st in cfg.strategies:
            log.info("simulate strategy=%s seed=%d", st, seed)
            m = run_training(replace(cfg.train, strategy=st, seed=seed), tasks, cfg.advantage, env.deceptive_logit)
            write_atomic(out / f"metrics_{st}_seed{seed}.csv", m.to_csv())
            summary = {"tool": "arpo", "version": __version__, **m.summary()}
            write_atomic(out / f"summary_{st}_seed{seed}.json", json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    report = compare_strategies(
        cfg.train,
        cfg.strategies,
        cfg.seeds,
        cfg.env,
        cfg.advantage,
        on_run=lambda m: log.info("done strategy=%s seed=%d", m.strategy, m.seed),
    )
    payload = {"tool": "arpo", "version": __version__, "config": cfg.to_dict(), **report.to_json()}
    write_atomic(args.output, json.dumps(payload, indent=2) + "\n")
    for st in report.strategies:
        print(f"{st}: minority ({report.minority_domain}) mean accuracy {report.minority_mean(st):.3f}, "
              f"wins vs {report.strategies[0]}: {report.wins(st)}/{len(report.seeds)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arpo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"arpo {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
        if needs_input:
            p.add_argument("--input", required=True, help="rollout JSONL")
        p.add_argument("--output", required=True)
        p.add_argument("--config", help="JSON config document")
        p.add_argument("--seed", type=int, help="override every seed in the config")

    p = sub.add_parser("score", help="score rollout records")
    common(p)
    p.add_argument("--weights", help="task,spatial,format weights, e.g. 0.8,0.1,0.1")
    p.set_defaults(func=cmd_score)

    for name, func, help_ in (
        ("advantage", cmd_advantage, "compute per-response advantages"),
        ("report", cmd_report, "summarize rewards and advantages per domain"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--weights", help="task,spatial,format weights")
        p.add_argument("--step", type=int, default=0, help="training step for the curriculum exponent")
        if name == "advantage":
            p.add_argument("--skip-report", help="skip report path (default: OUTPUT.skips.json)")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="run the tabular training simulation")
    common(p, needs_input=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare strategies across seeds")
    common(p, needs_input=False)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
