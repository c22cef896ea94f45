"""Command line entry point.

Subcommands:
    train    PPO (optionally Lagrangian or shaped by a cost file)
    evolve   run the full cost-function search
    eval     roll out a saved policy deterministically and report rates
    heatmap  rasterise a cost expression over the arena
    serve    HTTP review/monitoring API over a runs directory

Exit codes:
    0  success
    1  unexpected internal error
    2  invalid configuration or arguments
    3  evolution ended with no viable candidate
    4  generation endpoint failure
    5  missing or unreadable artifact (policy, cost file, run)
    6  a supplied expression failed to parse or used unknown features
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import env as env_module
from .config import ConfigError, LlmSection, RunConfig, load_config
from .dsl import Expr, ParseError, UnknownFeatureError, parse, validate
from .ecf import AutoReviewer, InteractiveReviewer, RemoteReviewer, ReviewQueue
from .evolution import NoViableCandidateError, default_seed_library, evolve
from .fpe import aggregate_episodes
from .llm import (
    ENV_BASE_URL,
    ChatEndpoint,
    LlmEndpointConfig,
    LlmError,
    MockScript,
)
from .metrics import heatmap
from .nets import GaussianPolicy, Mlp, read_policy_checkpoint, write_policy_checkpoint
from .ppo import LagrangeState, run_eval_episodes, train
from .rundir import RunDir, new_run_id
from .service import ReviewService, parse_addr

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NO_VIABLE = 3
EXIT_ENDPOINT = 4
EXIT_MISSING = 5
EXIT_BAD_EXPR = 6


def _load_expr_file(path: str, registry) -> Expr:
    text = Path(path).read_text()
    expr = parse(text)
    validate(expr, registry)
    return expr


def _build_client(llm: LlmSection):
    if llm.mode == "off":
        return None
    if llm.mode == "mock":
        if llm.fixtures_dir:
            return MockScript.from_dir(llm.fixtures_dir)
        return MockScript.packaged()
    base_url = os.environ.get(ENV_BASE_URL, "") or llm.base_url
    if not base_url:
        raise ConfigError(
            [f"llm.mode is 'live' but neither {ENV_BASE_URL} nor "
             "llm.base_url is set"]
        )
    endpoint = LlmEndpointConfig.from_env(
        base_url=base_url,
        model=os.environ.get("E2CFD_LLM_MODEL", "") or llm.model,
        temperature=llm.temperature,
        timeout_s=llm.timeout_s,
        max_retries=llm.max_retries,
        backoff_base_s=llm.backoff_base_s,
    )
    return ChatEndpoint(endpoint)


def _build_reviewer(config: RunConfig):
    """Reviewer plus an optional service that must be stopped afterwards."""
    mode = config.review.mode
    if mode == "auto":
        return AutoReviewer(), None
    if mode == "interactive":
        return InteractiveReviewer(), None
    queue = ReviewQueue()
    service = ReviewService(config.output.dir, config.env, queue)
    host, port = parse_addr(config.review.addr)
    host, port = service.start(host, port)
    logger.info("review service listening on http://%s:%d", host, port)
    return RemoteReviewer(queue, timeout_s=config.review.timeout_s), service


def _fresh_nets(config: RunConfig, with_cost_head: bool):
    rng = np.random.default_rng(config.ppo.seed)
    obs_dim = len(env_module.FEATURES)
    policy = GaussianPolicy(obs_dim, 2, rng)
    value_net = Mlp([obs_dim, 64, 64, 1], rng)
    cost_net = Mlp([obs_dim, 64, 64, 1], rng) if with_cost_head else None
    return policy, value_net, cost_net


def cmd_train(args) -> int:
    config = load_config(args.config)
    shaping = None
    if args.cost:
        shaping = _load_expr_file(args.cost, env_module.FEATURES)
    lagrangian = args.algo == "ppo-lag"
    policy, value_net, cost_net = _fresh_nets(config, lagrangian)
    lagrange = (
        LagrangeState(d=config.safety.threshold) if lagrangian else None
    )
    logger.info(
        "training %s for %d epochs (%d steps each)",
        args.algo, config.ppo.epochs, config.ppo.steps_per_epoch,
    )
    report = train(
        config.env, policy, value_net, config.ppo,
        shaping=shaping, lagrange=lagrange, cost_value_net=cost_net,
    )
    episodes = run_eval_episodes(
        config.env, policy, 20, seed=config.ppo.seed + 10_000,
        gamma=config.ppo.gamma,
    )
    aggregate = aggregate_episodes(episodes, report.wall_clock_s)
    out_root = Path(config.output.dir)
    name = config.output.run_id or new_run_id(config.ppo.seed)
    out_dir = out_root / f"{name}-train"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(report.to_csv())
    write_policy_checkpoint(out_dir / "policy.ckpt", policy)
    print(f"wrote {out_dir}/metrics.csv and policy.ckpt")
    print(
        f"eval over {aggregate.episodes} episodes: "
        f"avg_return={aggregate.avg_return:.3f} "
        f"avg_cost={aggregate.avg_cost:.3f} "
        f"tcr={aggregate.tcr:.3f} her={aggregate.her:.3f} "
        f"train_wall={report.wall_clock_s:.1f}s"
    )
    if lagrange is not None and report.lambda_history:
        print(f"final lambda={report.lambda_history[-1]:.4f}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = load_config(args.config)
    client = _build_client(config.llm)
    seed_library = (
        list(config.seed_library)
        if config.seed_library is not None
        else list(default_seed_library())
    )
    evo = config.evolution
    if config.llm.score_expr_from_llm:
        evo = replace(evo, llm_score_expr=True)
    reviewer, service = _build_reviewer(config)
    run_dir = RunDir(
        Path(config.output.dir)
        / (config.output.run_id or new_run_id(evo.seed))
    )
    try:
        result = evolve(
            config.env, config.ppo, evo, config.safety, run_dir,
            seed_library=seed_library, client=client, reviewer=reviewer,
            config_echo=config.as_dict(),
        )
    finally:
        if service is not None:
            service.stop()
    best = result.best
    print(f"run directory: {result.run_path}")
    print(f"best candidate: {best.candidate_id} (iteration {best.iteration})")
    print(f"fitness: {best.fitness:.4f}")
    if best.metrics is not None:
        print(
            f"tcr={best.metrics.tcr:.3f} her={best.metrics.her:.3f} "
            f"avg_cost={best.metrics.avg_cost:.3f}"
        )
    print(f"cost expression: {best.source_text}")
    print(f"total wall clock: {result.wall_clock_s:.1f}s")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = load_config(args.config)
    try:
        policy = read_policy_checkpoint(args.policy)
    except ValueError as exc:
        print(f"unreadable policy checkpoint: {exc}", file=sys.stderr)
        return EXIT_MISSING
    episodes = run_eval_episodes(
        config.env, policy, args.episodes, seed=args.seed,
        gamma=config.ppo.gamma,
    )
    aggregate = aggregate_episodes(episodes, 0.0)
    print(
        f"episodes={aggregate.episodes} "
        f"avg_return={aggregate.avg_return:.3f} "
        f"avg_cost={aggregate.avg_cost:.3f} "
        f"tcr={aggregate.tcr:.3f} her={aggregate.her:.3f}"
    )
    return EXIT_OK


def cmd_heatmap(args) -> int:
    config = load_config(args.config)
    expr = _load_expr_file(args.cost, env_module.FEATURES)
    grid = heatmap(expr, config.env, resolution=args.resolution)
    Path(args.out).write_text(grid.to_csv())
    print(f"wrote {args.out}")
    if args.pgm:
        Path(args.pgm).write_text(grid.to_pgm())
        print(f"wrote {args.pgm}")
    return EXIT_OK


def cmd_serve(args) -> int:
    config = load_config(args.config)
    host, port = parse_addr(args.addr or config.review.addr)
    service = ReviewService(config.output.dir, config.env)
    print(f"serving {config.output.dir} on http://{host}:{port} (Ctrl-C stops)")
    try:
        service.serve_forever(host, port)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="e2cfd",
        description="evolutionary cost-function design for safe RL",
    )
    parser.add_argument(
        "--log-level", default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy with PPO")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--algo", choices=["ppo", "ppo-lag"], default="ppo")
    p_train.add_argument("--cost", help="cost expression file used as shaping")
    p_train.set_defaults(func=cmd_train)

    p_evolve = sub.add_parser("evolve", help="search for a cost function")
    p_evolve.add_argument("--config", required=True)
    p_evolve.set_defaults(func=cmd_evolve)

    p_eval = sub.add_parser("eval", help="evaluate a saved policy")
    p_eval.add_argument("--policy", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=1234)
    p_eval.set_defaults(func=cmd_eval)

    p_heat = sub.add_parser("heatmap", help="rasterise a cost expression")
    p_heat.add_argument("--cost", required=True)
    p_heat.add_argument("--config", required=True)
    p_heat.add_argument("--out", required=True, help="CSV output path")
    p_heat.add_argument("--pgm", help="also write a PGM image here")
    p_heat.add_argument("--resolution", type=int, default=50)
    p_heat.set_defaults(func=cmd_heatmap)

    p_serve = sub.add_parser("serve", help="run the review/monitoring API")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--addr", help="host:port (default from config)")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc.render(), file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, UnknownFeatureError) as exc:
        print(f"expression error: {exc}", file=sys.stderr)
        return EXIT_BAD_EXPR
    except NoViableCandidateError as exc:
        print(f"evolution failed: {exc}", file=sys.stderr)
        return EXIT_NO_VIABLE
    except LlmError as exc:
        print(f"generation endpoint failure: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:  # pragma: no cover - the last-resort path
        logging.getLogger(__name__).exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
