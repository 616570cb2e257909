# Python stdlib
import os.path


class ImproperlyConfigured(Exception):
    pass


def ensure_path(filename):
    """Makes sure the directory of filename exists."""
    d = os.path.dirname(os.path.abspath(filename))
    if not os.path.isdir(d):
        os.makedirs(d)


def stem_path(path, suffix):
    """Builds a sibling path: the extension of path is replaced by suffix.

    e.g. stem_path('runs/model.xml', '.history.csv') -> 'runs/model.history.csv'
    """
    root, _ = os.path.splitext(path)
    return root + suffix
