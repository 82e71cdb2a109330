"""Command-line entry point: `python -m src.cli {generate,derive,evaluate} ...`."""
import argparse
import sys

from src.commands import derive, evaluate, generate

COMMANDS = {
    "generate": (generate, "Render a scene script into a trace and its oracle ground truth"),
    "derive": (derive, "Derive ground truth from a recorded trace"),
    "evaluate": (evaluate, "Evaluate predictions against ground truth"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="tracegt", description="Ground truth from recorded rendering traces")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text) in COMMANDS.items():
        module.add_arguments(subparsers.add_parser(name, help=help_text, description=help_text))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command][0].run(args)


if __name__ == "__main__":
    sys.exit(main())
