"""lula-lab command line: ``lula-lab <command> [--config PATH] [--model PATH] [--out PATH] [--seed N]``."""
# Python stdlib
import argparse
import sys

# Internal
from . import get_version
from .commands import COMMANDS, load_command_class


def build_parser(stdout=None, stderr=None):
    parser = argparse.ArgumentParser(prog='lula-lab', description='Laplace approximations with LULA units.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + get_version())
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for name in COMMANDS:
        command = load_command_class(name)(stdout=stdout, stderr=stderr)
        subparser = subparsers.add_parser(name, help=command.help, description=command.help)
        command.add_arguments(subparser)
        subparser.set_defaults(command_instance=command)
    return parser


def main(argv=None, stdout=None, stderr=None):
    """Runs a command and returns its exit code (0 success, 1 failure, 2 configuration error)."""
    parser = build_parser(stdout, stderr)
    try:
        options = parser.parse_args(argv)
    except SystemExit as exit:
        return exit.code
    return options.command_instance.execute(options)


if __name__ == '__main__':
    sys.exit(main())
