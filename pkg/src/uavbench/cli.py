"""Command-line entry point for the flight-task pipeline.

Subcommands: ``ingest`` (fuse raw logs into episodes), ``gen`` (rule-based
episode generation), ``eval`` (closed-loop scoring), ``serve`` (live bridge
endpoint), ``stats`` (corpus report), and ``replay`` (re-execute one episode
and dump its message transcript).  Exit codes: 0 success, 1 runtime failure
(one-line ``error: <Type>: <message>`` on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from uavbench import datamodel as dm
from uavbench import eval as evaluation
from uavbench import ingest, sim
from uavbench.bridge.policies import LocalOracle, RemotePolicy
from uavbench.bridge.schemes import run_scheme
from uavbench.bridge.server import BridgeServer, write_transcript
from uavbench.config import Config, ConfigError, load_config
from uavbench.errors import HarnessError


def parse_address(text: str) -> tuple[str, int]:
    """Parse ``HOST:PORT`` (``:PORT`` means localhost)."""
    host, sep, port_s = text.rpartition(":")
    if not sep:
        raise ConfigError(f"address {text!r} must look like HOST:PORT")
    try:
        port = int(port_s)
    except ValueError:
        raise ConfigError(f"address {text!r} has a non-numeric port")
    if not 0 <= port <= 65535:
        raise ConfigError(f"port {port} outside 0..65535")
    return (host or "127.0.0.1", port)


def _load_cases(directory: Path) -> list[evaluation.EvalCase]:
    """Episode/scenario file pairs from a directory, sorted by filename."""
    if not directory.is_dir():
        raise ConfigError(f"episode directory {directory} does not exist")
    cases = []
    for ep_path in sorted(directory.glob("*.episode")):
        episode = dm.deserialize_episode(ep_path.read_bytes())
        sc_path = ep_path.with_suffix(".scenario")
        if not sc_path.exists():
            raise ConfigError(f"no scenario file next to {ep_path.name}")
        scenario = sim.parse_scenario(sc_path.read_text(encoding="utf-8"))
        cases.append(evaluation.EvalCase(episode=episode, scenario=scenario))
    if not cases:
        raise ConfigError(f"no .episode files in {directory}")
    return cases


def _load_episodes(directory: Path) -> list[dm.Episode]:
    if not directory.is_dir():
        raise ConfigError(f"episode directory {directory} does not exist")
    return [
        dm.deserialize_episode(p.read_bytes())
        for p in sorted(directory.glob("*.episode"))
    ]


def _policy_factory(spec_text: str, cfg: Config):
    """Map ``oracle`` / ``remote:HOST:PORT`` to a per-scenario policy builder."""
    if spec_text == "oracle":
        params = cfg.sim_params()
        return lambda scenario: LocalOracle(scenario, params)
    if spec_text.startswith("remote:"):
        address = parse_address(spec_text[len("remote:"):])
        shared = RemotePolicy(address)
        return lambda scenario: shared
    raise ConfigError(
        f"unknown policy {spec_text!r}; expected 'oracle' or 'remote:HOST:PORT'"
    )


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_ingest(args: argparse.Namespace, cfg: Config) -> int:
    log = ingest.parse_flight_log(Path(args.log).read_bytes())
    frames = ingest.parse_frame_index(Path(args.frames).read_bytes())
    episode = ingest.align_and_resample(
        log, frames, args.rate, episode_id=args.episode_id
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{episode.id}.episode"
    path.write_bytes(dm.serialize_episode(episode))
    dm.write_manifest(out_dir)
    print(f"wrote {path} ({len(episode.frames)} frames)")
    return 0


def cmd_gen(args: argparse.Namespace, cfg: Config) -> int:
    task_type = dm.TaskType(args.task)
    params = cfg.sim_params()
    if args.n < 1:
        raise ConfigError(f"--n must be at least 1, got {args.n}")
    if args.scenario is not None and args.n != 1:
        raise ConfigError("--scenario fixes one scene; use it with --n 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for i in range(args.n):
        seed_i = cfg.seed + i
        if args.scenario is not None:
            # A supplied scene must be the canonical one for (task, its seed):
            # instruction parameters are derived from the scene layout, so an
            # edited file has no well-defined instruction to pair with.
            scene = sim.parse_scenario(Path(args.scenario).read_text("utf-8"))
            seed_i = scene.seed
            instruction, derived = sim.scenario_for_task(task_type, seed_i, params)
            if sim.render_scenario(derived) != sim.render_scenario(scene):
                raise ConfigError(
                    f"scenario {args.scenario} does not match the generated "
                    f"scene for task {task_type.value}, seed {seed_i}"
                )
            scenario = scene
        else:
            instruction, scenario = sim.scenario_for_task(task_type, seed_i, params)
        episode_id = f"{task_type.value}-{seed_i:04d}"
        episode = sim.generate_episode(
            instruction, scenario, params=params, episode_id=episode_id
        )
        (out_dir / f"{episode_id}.episode").write_bytes(
            dm.serialize_episode(episode)
        )
        (out_dir / f"{episode_id}.scenario").write_text(
            sim.render_scenario(scenario), encoding="utf-8"
        )
        written += 1
    dm.write_manifest(out_dir)
    print(f"wrote {written} episode(s) to {out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace, cfg: Config) -> int:
    cases = _load_cases(Path(args.episodes))
    policy = _policy_factory(args.policy, cfg)
    report = evaluation.evaluate_suite(
        cases,
        policy,
        cfg.scheme_config(),
        cfg.latency_model(),
        d_th=cfg.d_th,
        seed=cfg.seed,
        timeout_s=args.timeout,
    )
    sys.stdout.write(report.table())
    overall = report.summary()["overall"]
    print(
        f"overall\t{overall['count']}\t{overall['sr']:.4f}"
        f"\t{overall['mean_ndtw']:.4f}"
    )
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.summary(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_serve(args: argparse.Namespace, cfg: Config) -> int:
    scenario = sim.parse_scenario(Path(args.scenario).read_text("utf-8"))
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None
    factory = None
    if args.policy != "oracle":
        builder = _policy_factory(args.policy, cfg)
        factory = lambda: builder(scenario)  # noqa: E731
    server = BridgeServer(
        scenario,
        parse_address(args.listen),
        cfg=cfg.scheme_config(),
        lat=cfg.latency_model(),
        policy_factory=factory,
        params=cfg.sim_params(),
        trace=trace,
        seed=cfg.seed,
    )
    host, port = server.address
    print(f"serving on {host}:{port}", flush=True)
    try:
        server.run(ticks=args.ticks)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
        if trace is not None:
            trace.close()
    return 0


def cmd_stats(args: argparse.Namespace, cfg: Config) -> int:
    episodes = _load_episodes(Path(args.episodes))
    stats = ingest.dataset_stats(episodes)
    sys.stdout.write(ingest.stats_table(stats))
    if args.out:
        Path(args.out).write_text(
            json.dumps(ingest.stats_summary(stats), indent=2, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_replay(args: argparse.Namespace, cfg: Config) -> int:
    ep_path = Path(args.episode)
    episode = dm.deserialize_episode(ep_path.read_bytes())
    sc_path = ep_path.with_suffix(".scenario")
    if not sc_path.exists():
        raise ConfigError(f"no scenario file next to {ep_path.name}")
    scenario = sim.parse_scenario(sc_path.read_text(encoding="utf-8"))
    params = cfg.sim_params()
    result = run_scheme(
        cfg.scheme_config(),
        cfg.latency_model(),
        LocalOracle(scenario, params),
        sim.make_world(scenario),
        episode.instruction,
        instruction_id=episode.id,
        params=params,
        seed=cfg.seed,
    )
    with open(args.out, "w", encoding="utf-8") as out:
        write_transcript(result.transcript, out)
    print(
        f"replayed {episode.id}: {len(result.trajectory)} poses, "
        f"{len(result.transcript)} messages -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("config")
    g.add_argument("--config", metavar="FILE", help="JSON config file")
    g.add_argument("--seed", type=int, help="base RNG seed")
    g.add_argument(
        "--scheme",
        choices=["stop", "cont", "global"],
        help="chunk alignment scheme",
    )
    g.add_argument("--latency", metavar="PRESET", help="uplink latency preset")
    g.add_argument("--chunk-size", type=int, dest="chunk_size")
    g.add_argument("--chunk-period", type=float, dest="chunk_period")
    g.add_argument("--step-dt", type=float, dest="step_dt")
    g.add_argument("--d-th", type=float, dest="d_th", help="score bandwidth (m)")
    g.add_argument("--v-max", type=float, dest="v_max")
    g.add_argument("--omega-max", type=float, dest="omega_max")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="uavbench",
        description="Closed-loop benchmark harness for language-conditioned "
        "fine-grained UAV flight tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "ingest", parents=[common],
        help="fuse a flight log and frame index into an episode file",
    )
    p.add_argument("--log", required=True, metavar="FILE")
    p.add_argument("--frames", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--id", dest="episode_id", default=None)
    p.add_argument("--rate", type=float, default=dm.CONTROL_RATE_HZ)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser(
        "gen", parents=[common],
        help="generate rule-based episodes with their scenario files",
    )
    p.add_argument(
        "--task", required=True, choices=[t.value for t in dm.TaskType]
    )
    p.add_argument("--n", type=int, default=1, help="episodes to generate")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument(
        "--scenario", metavar="FILE",
        help="fly this scenario file instead of sampling a scene per seed",
    )
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser(
        "eval", parents=[common],
        help="fly every episode closed-loop and print the score table",
    )
    p.add_argument("--episodes", required=True, metavar="DIR")
    p.add_argument(
        "--policy", default="oracle",
        help="'oracle' or 'remote:HOST:PORT' (default oracle)",
    )
    p.add_argument("--timeout", type=float, default=120.0, metavar="SECONDS")
    p.add_argument("--out", metavar="FILE", help="also write a JSON summary")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser(
        "serve", parents=[common],
        help="run the live control bridge on a listen address",
    )
    p.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT")
    p.add_argument("--scenario", required=True, metavar="FILE")
    p.add_argument(
        "--policy", default="oracle",
        help="'oracle' or 'remote:HOST:PORT' (default oracle)",
    )
    p.add_argument("--trace", metavar="FILE", help="append message trace here")
    p.add_argument(
        "--ticks", type=int, default=None,
        help="stop after this many control ticks (default: run forever)",
    )
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser(
        "stats", parents=[common], help="report corpus statistics"
    )
    p.add_argument("--episodes", required=True, metavar="DIR")
    p.add_argument("--out", metavar="FILE", help="also write a JSON summary")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser(
        "replay", parents=[common],
        help="re-execute one episode and write its message transcript",
    )
    p.add_argument("--episode", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(handler=cmd_replay)
    return parser


_OVERRIDE_KEYS = (
    "seed",
    "scheme",
    "latency",
    "chunk_size",
    "chunk_period",
    "step_dt",
    "d_th",
    "v_max",
    "omega_max",
)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            overrides={k: getattr(args, k) for k in _OVERRIDE_KEYS},
        )
        print(
            f"# uavbench {args.command} seed={cfg.seed} "
            f"scheme={cfg.scheme} latency={cfg.latency}"
        )
        return args.handler(args, cfg)
    except HarnessError as e:
        msg = str(e).replace("\n", " ")
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
