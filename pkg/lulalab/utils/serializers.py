# Third-party
import numpy as np

# Significant digits written for every float: enough for a bitwise round-trip of float64.
FLOAT_FORMAT = '%.17g'


class SerializationFailed(Exception):
    pass


class DeserializationFailed(Exception):
    pass


def serialize_array(values):
    """Serializes a float array into a whitespace separated string.

    The array is flattened in row-major (C) order; the shape must be stored next to it.
    Every float is written in base 10 with 17 significant digits.

    Args:
        values: an array-like of floats

    Returns:
        A string.

    Raises:
        A SerializationFailed exception if the values are not finite floats.
    """
    try:
        flat = np.asarray(values, dtype=np.float64).ravel(order='C')
    except (TypeError, ValueError) as err:
        raise SerializationFailed('The values cannot be converted to float64: %s' % (err,))

    if not np.all(np.isfinite(flat)):
        raise SerializationFailed('Only finite values can be serialized.')

    return ' '.join(FLOAT_FORMAT % v for v in flat)


def deserialize_array(text, shape):
    """Deserializes a string written by serialize_array.

    Args:
        text: the whitespace separated floats
        shape: the expected shape (tuple of ints)

    Returns:
        A C-ordered float64 array of the given shape.

    Raises:
        A DeserializationFailed exception if the text does not hold exactly prod(shape) floats.
    """
    tokens = (text or '').split()
    expected = int(np.prod(shape)) if len(shape) else 1
    if len(tokens) != expected:
        raise DeserializationFailed('Expected %s values for shape %s, found %s.' % (expected, tuple(shape), len(tokens)))

    try:
        flat = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as err:
        raise DeserializationFailed('A value cannot be parsed: %s' % (err,))

    if not np.all(np.isfinite(flat)):
        raise DeserializationFailed('Non-finite value found.')

    return flat.reshape(shape)


def serialize_mask(mask):
    """Serializes a boolean array as a string of 0 and 1 (row-major)."""
    return ''.join('1' if v else '0' for v in np.asarray(mask, dtype=bool).ravel(order='C'))


def deserialize_mask(text, shape):
    """Deserializes a string written by serialize_mask.

    Raises:
        A DeserializationFailed exception if the text does not match the shape.
    """
    text = (text or '').strip()
    expected = int(np.prod(shape))
    if len(text) != expected or set(text) - {'0', '1'}:
        raise DeserializationFailed('Expected %s mask flags for shape %s.' % (expected, tuple(shape)))
    return np.array([c == '1' for c in text], dtype=bool).reshape(shape)
