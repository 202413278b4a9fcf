import argparse
import importlib
import logging
import os
import sys
import traceback
from typing import Callable, Dict, List, Optional

from config import CONFIG
from commands import FORMAT_CSV, FORMAT_JSON, CommandResult, RunConfig
from models.errors import CoarseMedianError, InputError
from utils.analytics import run_analytics
from utils.documents import render_csv, render_json, write_artifact
from utils.helpers import format_labels
from utils.limits import MODE_EXHAUSTIVE, MODE_SAMPLED

logger = logging.getLogger('coarsemed')

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

COMMANDS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'commands')

_installed_handlers: List[logging.Handler] = []


def setup_logging():
    """
    Route logs to stderr and, when enabled, to <LOG_DIR>/coarsemed.log.

    stdout carries artifacts only. Handlers installed by an earlier call are
    replaced, so repeated in-process runs log to the current streams.
    """
    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if CONFIG['LOG_TO_FILE']:
        if not os.path.exists(CONFIG['LOG_DIR']):
            os.makedirs(CONFIG['LOG_DIR'])
        handlers.append(logging.FileHandler(os.path.join(CONFIG['LOG_DIR'], 'coarsemed.log'), encoding='utf-8'))
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
        _installed_handlers.append(handler)
    root.setLevel(CONFIG['LOG_LEVEL'])


class CoarseMedCLI:
    """Argument parsing, command-module loading and dispatch"""

    def __init__(self):
        self.parser = argparse.ArgumentParser(
            prog="coarsemed",
            description="Finite median algebras, cube complexes and coarse median approximations",
        )
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="command")
        self.common = argparse.ArgumentParser(add_help=False)
        self.common.add_argument("--input", action="append", default=[], help="input JSON document ('-' for stdin)")
        self.common.add_argument("--output", help="artifact path (default: stdout)")
        self.common.add_argument("--seed", type=int, default=CONFIG['DEFAULT_SEED'], help="64-bit sampling seed")
        self.common.add_argument("--mode", choices=[MODE_EXHAUSTIVE, MODE_SAMPLED],
                                 help="evaluation mode (default: exhaustive within caps)")
        self.common.add_argument("--samples", type=int, help="sample count in sampled mode")
        self.common.add_argument("--format", choices=[FORMAT_JSON, FORMAT_CSV], default=FORMAT_JSON)
        self.handlers: Dict[str, Callable[[RunConfig], CommandResult]] = {}

    def add_command(self, name: str, handler: Callable[[RunConfig], CommandResult], help: str,
                    arguments: Optional[Callable[[argparse.ArgumentParser], None]] = None):
        """Register a subcommand; ``arguments`` adds command-specific flags."""
        if name in self.handlers:
            raise ValueError(f"command {name} registered twice")
        parser = self.subparsers.add_parser(name, parents=[self.common], help=help)
        if arguments is not None:
            arguments(parser)
        self.handlers[name] = handler
        logger.debug(f"Registered command: {name}")

    def load_commands(self):
        """Load all command modules with error handling and logging"""
        for filename in sorted(os.listdir(COMMANDS_DIR)):
            if filename.endswith('.py') and not filename.startswith('_'):
                try:
                    module = importlib.import_module(f'commands.{filename[:-3]}')
                    module.setup(self)
                    logger.debug(f"Loaded command module: {filename}")
                except Exception as e:
                    logger.error(f"Failed to load command module {filename}: {e}", exc_info=True)

    def parse(self, argv: Optional[List[str]] = None) -> RunConfig:
        args = self.parser.parse_args(argv)
        if args.command is None:
            self.parser.print_usage(sys.stderr)
            raise InputError("no command given")
        common = {"input", "output", "seed", "mode", "samples", "format", "command"}
        options = argparse.Namespace(**{k: v for k, v in vars(args).items() if k not in common})
        return RunConfig(command=args.command, inputs=list(args.input), output=args.output, seed=args.seed,
                         mode=args.mode, samples=args.samples, format=args.format, options=options)

    def emit(self, run: RunConfig, result: CommandResult):
        if run.format == FORMAT_CSV:
            if result.rows is None:
                raise InputError(f"{run.command} has no CSV output")
            text = render_csv(result.rows, result.columns)
        else:
            text = render_json(result.payload)
        write_artifact(text, run.output)
        run_analytics.record_artifact()

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Parse, dispatch and emit.

        Returns:
            int: 0 on success, 1 on a failed check or consistency error, 2 on bad input
        """
        try:
            run = self.parse(argv)
        except SystemExit as e:
            # argparse: unknown subcommand or bad flag
            return EXIT_OK if e.code == 0 else EXIT_INPUT
        except InputError as e:
            _report(e)
            return EXIT_INPUT

        run_analytics.record_command(run.command)
        logger.info(f"Running {run.command} (mode={run.mode or 'auto'}, seed={run.seed})")
        try:
            result = self.handlers[run.command](run)
            self.emit(run, result)
        except InputError as e:
            _report(e)
            return EXIT_INPUT
        except CoarseMedianError as e:
            # ConsistencyError, APrioriBoundError, ApproximationError
            _report(e)
            return EXIT_FAILED
        except Exception as e:
            run_analytics.record_error(type(e).__name__, {"message": str(e)})
            logger.critical(f"Unexpected error in {run.command}: {e}")
            logger.debug(''.join(traceback.format_exception(type(e), e, e.__traceback__)))
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAILED
        finally:
            logger.info(f"Run statistics: {run_analytics.export_to_json()}")

        if not result.ok:
            _print_failure(result.message or f"{run.command} check failed", result.witness)
            return EXIT_FAILED
        return EXIT_OK


def _print_failure(message: str, witness=None):
    print(f"error: {message}", file=sys.stderr)
    if witness is not None:
        print(f"witness: ({', '.join(format_labels(witness))})", file=sys.stderr)


def _report(error: CoarseMedianError):
    run_analytics.record_error(type(error).__name__, {
        "message": str(error),
        "witness": getattr(error, 'witness', None),
    })
    logger.error(f"{type(error).__name__}: {error}")
    _print_failure(str(error), getattr(error, 'witness', None))


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    run_analytics.reset()
    cli = CoarseMedCLI()
    cli.load_commands()
    return cli.run(argv)


if __name__ == "__main__":
    sys.exit(main())
