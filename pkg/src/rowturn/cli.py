"""Single entry point: field generation, demo collection, training,
evaluation, plotting, and the teleop server.

Exit codes: 0 success, 1 validation error (bad arguments, bad config,
missing or malformed input), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import dataio
from .config import RunConfig, load_config
from .demos import collect_dataset, RecoverySpec
from .diffusion import load_checkpoint, save_checkpoint
from .evaluation import (
    build_scenarios,
    compute_metrics,
    diffusion_policy_factory,
    pursuit_policy_factory,
    result_to_demo,
    run_grid,
    write_metrics,
)
from .plotting import TrajectoryView, export_birdseye
from .training import fit, normalize_dataset
from .world import RobotState, generate_field


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    p = _Parser(prog="rowturn", description=__doc__)
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="config override, repeatable",
    )
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_field = sub.add_parser("field", help="field-map utilities")
    field_sub = p_field.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    p_gen = field_sub.add_parser("gen", help="generate a stalk map file")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", required=True)

    p_demos = sub.add_parser("demos", help="demonstration utilities")
    demos_sub = p_demos.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    p_collect = demos_sub.add_parser("collect", help="record a demonstration dataset")
    p_collect.add_argument("--n", type=int, default=None)
    p_collect.add_argument("--seed", type=int, default=None, help="base seed")
    p_collect.add_argument("--mix", type=float, default=None, help="recovery fraction")
    p_collect.add_argument("--out", required=True)

    p_train = sub.add_parser("train", help="fit the denoiser on a dataset")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True, help="checkpoint path")
    p_train.add_argument("--log", default=None, help="training-log JSONL path")

    p_eval = sub.add_parser("eval", help="closed-loop evaluation")
    p_eval.add_argument("--ckpt", default=None, help="checkpoint (omit with --policy demonstrator)")
    p_eval.add_argument("--policy", choices=("diffusion", "demonstrator"), default="diffusion")
    p_eval.add_argument("--out-dir", required=True)
    p_eval.add_argument("--plot", action="store_true", help="also write birdseye.svg")
    p_eval.add_argument(
        "--export-rollouts", action="store_true", help="also write rollouts.jsonl (demo format)"
    )

    p_plot = sub.add_parser("plot", help="bird's-eye SVG from a dataset file")
    p_plot.add_argument("--data", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--max", type=int, default=16, help="max trajectories")

    p_teleop = sub.add_parser("teleop", help="teleoperation server")
    teleop_sub = p_teleop.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    p_serve = teleop_sub.add_parser("serve", help="serve the authoritative sim loop")
    p_serve.add_argument("--out-dir", default="teleop_out")
    p_serve.add_argument("--static", default=None, help="UI bundle directory")
    p_serve.add_argument("--max-ticks", type=int, default=None, help=argparse.SUPPRESS)

    return p


def _cmd_field_gen(args, cfg: RunConfig) -> int:
    spec = cfg.field if args.seed is None else replace(cfg.field, seed=args.seed)
    stalks = generate_field(spec)
    dataio.write_stalks(args.out, stalks, cfg.digest())
    print(f"wrote {len(stalks)} stalks to {args.out}")
    return 0


def _cmd_demos_collect(args, cfg: RunConfig) -> int:
    d = cfg.demos
    n = d.n if args.n is None else args.n
    base_seed = d.base_seed if args.seed is None else args.seed
    mix = d.recovery_mix if args.mix is None else args.mix
    demos = collect_dataset(
        n,
        base_seed,
        mix,
        cfg.field,
        cfg.robot,
        cfg.rays.build(),
        cfg.obs.n_obs,
        start_lane=d.lane_or_none,
        recovery=RecoverySpec(dither_sigma=d.dither_sigma),
    )
    dataio.write_demos(args.out, demos, cfg.rays.build().total_rays, cfg.obs.n_obs, cfg.digest())
    n_steps = sum(len(demo.steps) for demo in demos)
    print(f"wrote {len(demos)} demos ({n_steps} steps) to {args.out}")
    return 0


def _cmd_train(args, cfg: RunConfig) -> int:
    header, demos = dataio.read_demos(args.data)
    data = normalize_dataset(
        demos,
        horizon=cfg.diffusion.horizon,
        stride=cfg.training.chunk_stride,
        n_obs=header["n_obs"],
        scan_dim=header["scan_dim"],
    )
    ckpt = fit(data, cfg.training, cfg.diffusion, config_digest=cfg.digest(), log_path=args.log)
    save_checkpoint(args.out, ckpt)
    print(
        f"trained on {len(data)} chunks from {len(demos)} demos; "
        f"final loss {ckpt.train_info['final_loss']:.5f}; wrote {args.out}"
    )
    return 0


def _cmd_eval(args, cfg: RunConfig) -> int:
    rays = cfg.rays.build()
    grid = build_scenarios(cfg.field, cfg.robot, list(cfg.eval.seeds), tuple(cfg.eval.kinds))
    if args.policy == "demonstrator":
        make_policy = pursuit_policy_factory(cfg.diffusion.horizon)
    else:
        if not args.ckpt:
            raise ValueError("--ckpt is required with --policy diffusion")
        ckpt = load_checkpoint(args.ckpt)
        make_policy = diffusion_policy_factory(ckpt, cfg.eval.sample_seed)
    results = run_grid(
        grid,
        make_policy,
        rays,
        cfg.obs.n_obs,
        exec_horizon=cfg.eval.exec_horizon,
        max_steps=cfg.eval.max_steps,
    )
    report = compute_metrics(results, grid)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics(report, out_dir / "metrics.json", out_dir / "metrics.txt", cfg.digest())
    if args.export_rollouts:
        demos = [
            result_to_demo(res, sc, replace(cfg.field, seed=sc.seed), dt=cfg.robot.dt)
            for res, sc in zip(results, grid.scenarios)
        ]
        dataio.write_demos(out_dir / "rollouts.jsonl", demos, rays.total_rays, cfg.obs.n_obs, cfg.digest())
    if args.plot:
        stalks = generate_field(replace(cfg.field, seed=grid.scenarios[0].seed))
        export_birdseye(results, stalks, out_dir / "birdseye.svg", cfg.digest())
    print(report.format_text(), end="")
    print(f"wrote metrics to {out_dir}")
    return 0


def _cmd_plot(args, cfg: RunConfig) -> int:
    header, demos = dataio.read_demos(args.data)
    demos = demos[: args.max]
    if not demos:
        raise ValueError(f"{args.data}: no demonstrations to plot")
    views = [
        TrajectoryView(
            [RobotState(d.meta.start_pose, *d.meta.start_vel)] + [s.state for s in d.steps]
        )
        for d in demos
    ]
    stalks = generate_field(demos[0].meta.field_spec)
    export_birdseye(views, stalks, args.out, header.get("config_digest", ""))
    print(f"wrote {args.out} with {len(views)} trajectories")
    return 0


def _cmd_teleop_serve(args, cfg: RunConfig) -> int:
    from .teleop import serve_teleop

    static = args.static
    if static is None:
        bundled = Path("frontend/dist")
        static = bundled if bundled.is_dir() else None
    serve_teleop(cfg, args.out_dir, static, max_ticks=args.max_ticks)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "field":
            return _cmd_field_gen(args, cfg)
        if args.command == "demos":
            return _cmd_demos_collect(args, cfg)
        if args.command == "train":
            return _cmd_train(args, cfg)
        if args.command == "eval":
            return _cmd_eval(args, cfg)
        if args.command == "plot":
            return _cmd_plot(args, cfg)
        if args.command == "teleop":
            return _cmd_teleop_serve(args, cfg)
        raise AssertionError(f"unhandled command {args.command}")
    except (ValueError, dataio.SchemaError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
