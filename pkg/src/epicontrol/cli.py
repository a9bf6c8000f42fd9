"""Command-line harness: baselines, training, evaluation, ablations, dumps.

Every subcommand is reproducible from (config, seeds) alone; output files
carry both in comment headers.  Exit codes: 0 success, 2 usage error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_mod
from . import gnn as gnn_mod
from .config import SCENARIO_NAMES, config_description, load_world_config, scenario_world_config
from .episode import BaselinePolicy, ThresholdPolicy, run_episode
from .errors import ConfigurationError, ContractError, NumericError
from .metrics import comparison_csv_text, daily_csv_text, summary_json_text
from .policy import parse_baseline_name
from .training import TrainConfig, curve_csv_text, evaluate_policy, train
from .world import WorldConfig

USAGE_ERROR = 2
NUMERIC_ERROR = 3

ABLATION_NAMES = ("no_graph", "no_guard")


def _sanitize(name: str) -> str:
    return name.replace("(", "_").replace(")", "").replace(":", "_").replace(",", "_")


def _parse_seeds(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigurationError(f"seeds must be comma-separated integers (got {text!r})") from None


def _world_config(args) -> WorldConfig:
    cfg = scenario_world_config(args.scenario)
    if getattr(args, "config", None):
        cfg = load_world_config(args.config, base=cfg)
    if getattr(args, "population_override", None):
        cfg = cfg.copy(population=args.population_override)
    cfg.validate()
    return cfg


def _headers(args, cfg: WorldConfig, seeds) -> list:
    return [
        f"scenario: {args.scenario}",
        f"config: {config_description(cfg)}",
        f"seeds: {','.join(str(s) for s in seeds)}",
    ]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _run_policy_sweep(args, cfg, methods, out_dir: Path) -> list:
    """Run (method, policy) pairs across seeds; emit daily CSV + summary JSON
    per episode and one comparison table. Returns comparison rows."""
    seeds = _parse_seeds(args.seeds)
    rows = []
    for method_name, policy in methods:
        i_vals, q_vals, s_vals = [], [], []
        for seed in seeds:
            episode_cfg = cfg.copy(rng_seed=seed)
            result = run_episode(episode_cfg, policy)
            metrics = result.metrics
            i_vals.append(metrics.total_infections)
            q_vals.append(metrics.total_cost)
            s_vals.append(metrics.score())
            stem = f"{_sanitize(method_name)}_seed{seed}"
            headers = _headers(args, episode_cfg, [seed]) + [f"method: {method_name}"]
            _write(out_dir / f"{stem}_daily.csv", daily_csv_text(metrics, headers))
            _write(out_dir / f"{stem}_summary.json", summary_json_text(metrics, args.scenario, seed))
            print(
                f"{method_name} seed={seed}: I={metrics.total_infections} "
                f"Q={metrics.total_cost:.2f} score={metrics.score():.4g}"
            )
        rows.append(
            (method_name, float(np.mean(i_vals)), float(np.mean(q_vals)), float(np.mean(s_vals)))
        )
    table = comparison_csv_text(rows, _headers(args, cfg, seeds))
    _write(out_dir / "comparison.csv", table)
    return rows


def cmd_baseline(args) -> int:
    cfg = _world_config(args)
    names = [n.strip() for n in args.name.split(",") if n.strip()]
    if not names:
        raise ConfigurationError("no baseline names given")
    methods = []
    for name in names:
        parse_baseline_name(name)  # validate early with a helpful error
        methods.append((name, BaselinePolicy(name)))
    _run_policy_sweep(args, cfg, methods, Path(args.out))
    return 0


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    if args.total_steps is not None:
        cfg.total_steps = args.total_steps
    if args.learning_rate is not None:
        cfg.learning_rate = args.learning_rate
    if "no_guard" in getattr(args, "ablation", []):
        cfg.guard_enabled = False
    return cfg


def _gnn_config(args) -> gnn_mod.GnnConfig:
    trunk = gnn_mod.TRUNK_MLP if "no_graph" in getattr(args, "ablation", []) else gnn_mod.TRUNK_GNN
    return gnn_mod.GnnConfig(
        k_layers=args.gnn_layers, d_hidden=args.gnn_hidden, trunk=trunk
    )


def _do_train(args, cfg: WorldConfig, out_dir: Path, tag: str = "") -> Path:
    train_cfg = _train_config(args)
    gnn_cfg = _gnn_config(args)
    seeds = _parse_seeds(args.seeds)
    train_seed = seeds[0]
    label = tag or "model"

    def progress(update, days, ev):
        print(f"[{label}] update={update} env_days={days} eval_score={ev['score']:.4g}")

    result = train(cfg, train_cfg, train_seed, gnn_cfg=gnn_cfg)
    headers = _headers(args, cfg, [train_seed]) + [f"ablation: {','.join(args.ablation) or 'none'}"]
    _write(out_dir / f"{label}_curve.csv", curve_csv_text(result, headers))
    ckpt_dir = out_dir / f"{label}_checkpoint"
    ckpt_mod.save_checkpoint(ckpt_dir, result.params, gnn_cfg, train_seed)
    print(
        f"[{label}] trained {result.env_days} env days, best eval score "
        f"{result.best_eval_score:.4g} (random-init {result.initial_eval_score:.4g})"
    )
    return ckpt_dir


def cmd_train(args) -> int:
    cfg = _world_config(args)
    _do_train(args, cfg, Path(args.out))
    return 0


def cmd_eval(args) -> int:
    cfg = _world_config(args)
    params, gnn_cfg, _ = ckpt_mod.load_checkpoint(args.checkpoint)
    seeds = _parse_seeds(args.seeds)
    policy = ThresholdPolicy(gnn_cfg, params)
    _run_policy_sweep(args, cfg, [("rl", policy)], Path(args.out))
    return 0


def cmd_ablate(args) -> int:
    """Train matched-budget arms (full, plus each requested ablation) and
    evaluate all of them on the shared seed list."""
    cfg = _world_config(args)
    out_dir = Path(args.out)
    arms = ["full"] + [a for a in args.ablation]
    rows = []
    seeds = _parse_seeds(args.seeds)
    for arm in arms:
        arm_args = argparse.Namespace(**vars(args))
        arm_args.ablation = [] if arm == "full" else [arm]
        ckpt_dir = _do_train(arm_args, cfg, out_dir, tag=arm)
        params, gnn_cfg, _ = ckpt_mod.load_checkpoint(ckpt_dir)
        ev = evaluate_policy(cfg, gnn_cfg, params, seeds)
        rows.append((arm, ev["I"], ev["Q"], ev["score"]))
        print(f"[{arm}] eval I={ev['I']:.2f} Q={ev['Q']:.2f} score={ev['score']:.4g}")
    _write(out_dir / "ablation.csv", comparison_csv_text(rows, _headers(args, cfg, seeds)))
    return 0


def _dump_policy(args):
    if args.checkpoint:
        params, gnn_cfg, _ = ckpt_mod.load_checkpoint(args.checkpoint)
        return ThresholdPolicy(gnn_cfg, params), True
    parse_baseline_name(args.baseline)
    return BaselinePolicy(args.baseline), False


def cmd_dump_risk(args) -> int:
    cfg = _world_config(args)
    seeds = _parse_seeds(args.seeds)
    policy, _ = _dump_policy(args)
    out_dir = Path(args.out)
    for seed in seeds:
        episode_cfg = cfg.copy(rng_seed=seed)
        lines = [f"# {h}" for h in _headers(args, episode_cfg, [seed])]
        lines.append("day,individual_id,p_infe")

        def record(rec):
            for i, p in enumerate(rec.risk.p_infe):
                lines.append(f"{rec.day},{i},{p:.10g}")

        run_episode(episode_cfg, policy, on_day=record)
        _write(out_dir / f"risk_seed{seed}.csv", "\n".join(lines) + "\n")
        print(f"risk dump seed={seed}: {len(lines) - 4} rows")
    return 0


def cmd_dump_actions(args) -> int:
    cfg = _world_config(args)
    seeds = _parse_seeds(args.seeds)
    policy, has_thresholds = _dump_policy(args)
    if not has_thresholds:
        raise ConfigurationError("dump-actions needs --checkpoint (thresholds are policy outputs)")
    out_dir = Path(args.out)
    for seed in seeds:
        episode_cfg = cfg.copy(rng_seed=seed)
        lines = [f"# {h}" for h in _headers(args, episode_cfg, [seed])]
        lines.append("day,individual_id,p_infe,P1,P2,P3,action")

        def record(rec):
            thr = rec.extras["thresholds"]
            for i in range(episode_cfg.population):
                lines.append(
                    f"{rec.day},{i},{rec.risk.p_infe[i]:.10g},{thr.p1[i]:.10g},"
                    f"{thr.p2[i]:.10g},{thr.p3[i]:.10g},{int(rec.actions[i])}"
                )

        run_episode(episode_cfg, policy, on_day=record)
        _write(out_dir / f"actions_seed{seed}.csv", "\n".join(lines) + "\n")
        print(f"action dump seed={seed} written")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epicontrol",
        description="Epidemic intervention simulator, baselines, and policy training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds_default="0,1,2"):
        p.add_argument("--scenario", default="default", choices=SCENARIO_NAMES)
        p.add_argument("--seeds", default=seeds_default, help="comma-separated seed list")
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--population-override", type=int, default=None)
        p.add_argument(
            "--ablation",
            action="append",
            default=[],
            choices=ABLATION_NAMES,
            help="repeatable ablation flag",
        )
        p.add_argument("--gnn-layers", type=int, default=3)
        p.add_argument("--gnn-hidden", type=int, default=32)
        p.add_argument("--total-steps", type=int, default=None, help="env-day budget for training")
        p.add_argument("--learning-rate", type=float, default=None)

    p = sub.add_parser("baseline", help="run one or more baseline policies")
    common(p)
    p.add_argument("--name", required=True, help="comma list, e.g. lockdown,expert(0.01)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("train", help="train the intervention policy")
    common(p, seeds_default="0")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train matched full/ablated arms and compare")
    common(p, seeds_default="0")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("dump-risk", help="per-day infection-probability CSV")
    common(p, seeds_default="0")
    p.add_argument("--baseline", default="no_intervention")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_dump_risk)

    p = sub.add_parser("dump-actions", help="per-day threshold/action CSV")
    common(p, seeds_default="0")
    p.add_argument("--baseline", default="no_intervention")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_dump_actions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigurationError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
