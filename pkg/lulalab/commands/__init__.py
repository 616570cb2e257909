"""Command-line commands: one module per command, each defining a Command class."""
# Python stdlib
from importlib import import_module

COMMANDS = ('train', 'laplace', 'lula', 'eval', 'demo-toy', 'config-reference')


def load_command_class(name):
    """Returns the Command class of the named command (dashes map to underscores)."""
    if name not in COMMANDS:
        raise KeyError(name)
    return import_module('.%s' % (name.replace('-', '_'),), __name__).Command
