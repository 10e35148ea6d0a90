#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""This module provides the dapgkit command line interface."""

import argparse
import logging
import pathlib
import sys

import attr

from ._version import get_versions
from .envs import EnvSpec
from .exceptions import ConfigError, FormatError, InvalidInputError, SerializationError
from .harness import RunConfig, resolve_config, run_training, evaluate, write_eval_report, generate_demos, \
    CONFIG_FILE, DEFAULT_DEMO_COUNT
from .storage import read_checkpoint
from .utilities import get_log_level, configure_logger

PROJECT_NAME = "dapgkit"

# Usage, configuration and dimension errors exit with 2, every other fault with 1.
USAGE_ERRORS = (ConfigError, FormatError, InvalidInputError, SerializationError, FileNotFoundError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROJECT_NAME,
        description="Train and evaluate demonstration-augmented natural policy gradient agents."
    )
    parser.add_argument("-V", "--version", action="store_true", help="display the version and exit")
    parser.add_argument("-v", "--verbose", action="count", help="increase the level of output")
    parser.add_argument("-d", "--debug", action="store_true", help="enable debug features")
    parser.add_argument("-l", "--log-file", type=str, help="output the log to the specified file")
    commands = parser.add_subparsers(dest="command")

    train = commands.add_parser("train", help="train a policy from demonstrations")
    train.add_argument("--config", type=str, required=True,
                       help="configuration file (or the name of a packaged configuration)")

    ev = commands.add_parser("eval", help="evaluate a checkpoint under visual distractors")
    ev.add_argument("--checkpoint", type=str, required=True, help="policy checkpoint")
    ev.add_argument("--config", type=str, help="configuration (defaults to the config.cfg next to the checkpoint)")
    ev.add_argument("--distractors", type=str, default="none",
                    help="comma-separated distractor modes; 'none' is the clean run")
    ev.add_argument("--rollouts", type=int, help="episodes per mode (defaults to dapg.eval_rollouts)")

    demos = commands.add_parser("gen-demos", help="record scripted expert demonstrations")
    demos.add_argument("--config", type=str, default="state_reacher",
                       help="configuration file (or the name of a packaged configuration)")
    demos.add_argument("--env", type=str, help="environment id, overriding the configured one")
    demos.add_argument("--count", type=int, default=DEFAULT_DEMO_COUNT, help="number of successful episodes")
    demos.add_argument("--out", type=str, help="output directory (defaults to run.demo_path)")
    demos.add_argument("--seed", type=int, help="seed, overriding run.seed")
    demos.add_argument("--dump-frames", type=str, help="also write rendered frames as PNG to this directory")

    return parser


def cli_train(args) -> int:
    config = resolve_config(args.config)
    state = run_training(config)
    logging.getLogger(__name__).info("Completed {} iterations; artifacts in {}.".format(state.k, config.output_dir))
    return 0


def cli_eval(args) -> int:
    checkpoint = pathlib.Path(args.checkpoint)
    if not checkpoint.is_file():
        raise FileNotFoundError("No checkpoint at '{}'.".format(checkpoint))
    if args.config is None:
        config = RunConfig.load(checkpoint.parent / CONFIG_FILE)
    else:
        config = resolve_config(args.config)
    policy = read_checkpoint(checkpoint)
    modes = [m.strip() for m in args.distractors.split(",") if m.strip()]
    report = evaluate(policy, config, modes, args.rollouts)
    write_eval_report(report, checkpoint.parent)
    for r in report.results:
        print("{:<18s} success {:.3f}  return {:10.3f}  ({} rollouts)".format(
            r.mode, r.success_rate, r.mean_return, r.rollouts
        ))
    return 0


def cli_gen_demos(args) -> int:
    config = resolve_config(args.config)
    if args.env is not None and args.env != config.env.id:
        try:
            env = EnvSpec.for_env(args.env, observation_mode=config.env.observation_mode,
                                  reward_mode=config.env.reward_mode, seed=config.env.seed)
        except ValueError as e:
            raise ConfigError("env.id", str(e))
        config = attr.evolve(config, env=env)
    if args.seed is not None:
        config = attr.evolve(config, run=attr.evolve(config.run, seed=args.seed))
    generate_demos(config, args.count, args.out, args.dump_frames)
    return 0


COMMANDS = {
    "train": cli_train,
    "eval": cli_eval,
    "gen-demos": cli_gen_demos,
}


def main(argv=None) -> int:
    """
    Run one dapgkit command and return its exit status.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print("{}, version {}".format(PROJECT_NAME, get_versions()["version"]))
        return 0
    if args.command is None:
        parser.print_usage()
        return 2

    # Configure the logging system.
    log_level = get_log_level(args.verbose, args.debug)
    log = configure_logger(PROJECT_NAME, log_level, log_path=args.log_file, with_warnings=args.debug)

    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        log.project.error(str(e))
        return 2
    except Exception as e:
        if args.debug:
            log.project.exception("The command '{}' failed.".format(args.command))
        else:
            log.project.error("{}: {}".format(type(e).__name__, e))
        return 1
    finally:
        # Detach the handlers installed above
        for logger in (log.project, log.py_warnings):
            if logger is None:
                continue
            for handler in list(logger.handlers):
                handler.close()
                logger.removeHandler(handler)
        logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
