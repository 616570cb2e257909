# Python stdlib
import os
import os.path
import logging


DEFAULT_SETTINGS = {
    # Logging settings
    'LOGGER_NAME': 'lulalab',
    'LOGGER_FORMAT': '%(asctime)s %(levelname)s %(message)s',
    # Relative to the working directory the package is imported from.
    'LOG_FILE': os.path.join(os.getcwd(), 'logs', 'lulalab.log'),
    # Maximum size of one log file: when the size is reached, the file is archived and a new file is created.
    'LOG_SIZE': 5 * 1024 * 2 ** 10,  # 5 MB
    'LOG_LEVEL': logging.INFO,
    # Upper bound on worker threads (finite-difference coordinates, prediction batches).
    'THREADS': os.cpu_count() or 1,
    # full_ggn curvature is refused above this many parameters.
    'FULL_GGN_MAX_PARAMS': 5000,
    # Relative diagonal jitter tried, in order, when a Cholesky factorization fails.
    'JITTER_STEPS': (1e-8, 1e-6),
}

ENV_PREFIX = 'LULA_LAB_'


def _coerce(key, raw):
    """Converts an environment string to the type of the default value."""
    default = DEFAULT_SETTINGS[key]
    if isinstance(default, tuple):
        return tuple(float(v) for v in raw.split(','))
    if key == 'LOG_LEVEL' and not raw.isdigit():
        return getattr(logging, raw.upper())
    return type(default)(raw)


# Get the user settings from the environment to update the default settings.
user_settings = {}
for _key in DEFAULT_SETTINGS:
    _raw = os.environ.get(ENV_PREFIX + _key)
    if _raw is not None:
        user_settings[_key] = _coerce(_key, _raw)

LULA_LAB_SETTINGS = dict(DEFAULT_SETTINGS, **user_settings)
LULA_LAB_SETTINGS['THREADS'] = max(1, int(LULA_LAB_SETTINGS['THREADS']))

globals().update(LULA_LAB_SETTINGS)
