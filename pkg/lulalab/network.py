"""Feedforward networks f(x; theta): forward pass, reverse-mode gradients and model files.

Parameter flattening contract (used by every module): layers in order, and for
each layer the weight matrix in row-major order followed by the bias vector.
A layer of shape n_l x n_{l-1} therefore owns n_l * (n_{l-1} + 1) consecutive
entries of theta.
"""
# Python stdlib
from dataclasses import dataclass

# Third-party
import numpy as np
from lxml import etree  # http://lxml.de/

# Internal
from .utils.introspection import ActivationFactory, ActivationDoesNotExist
from .utils.serializers import serialize_array, deserialize_array, DeserializationFailed
from .utils.xmlhelper import XMLHelper, ElementNotFound

MODEL_FORMAT = 'lula-lab-network'
MODEL_VERSION = '1'


class ModelFormatError(Exception):
    pass


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError('Layer dimensions must be positive, got %s -> %s.' % (self.in_dim, self.out_dim))
        # Raises ActivationDoesNotExist for unknown names.
        ActivationFactory.get_activation_class(self.activation)

    @property
    def parameter_count(self):
        return self.out_dim * (self.in_dim + 1)


def _frozen(a):
    a = np.array(a, dtype=np.float64, order='C')
    a.setflags(write=False)
    return a


class Layer(object):
    """A dense layer: a = W h + b, followed by its activation."""

    def __init__(self, spec, weight, bias):
        weight = _frozen(weight)
        bias = _frozen(bias)
        if weight.shape != (spec.out_dim, spec.in_dim):
            raise ValueError('Weight shape %s does not match %s.' % (weight.shape, spec))
        if bias.shape != (spec.out_dim,):
            raise ValueError('Bias shape %s does not match %s.' % (bias.shape, spec))
        self.spec = spec
        self.weight = weight
        self.bias = bias
        self.activation = ActivationFactory.get(spec.activation)

    def __repr__(self):
        return '<Layer: %s -> %s %s>' % (self.spec.in_dim, self.spec.out_dim, self.spec.activation)


class Network(object):
    """An immutable L-layer feedforward network.

    Layers chain (out_dim of layer l is in_dim of layer l+1) and the last layer
    has the identity activation.
    """

    def __init__(self, layers):
        layers = tuple(layers)
        if not layers:
            raise ValueError('A network needs at least one layer.')
        for previous, layer in zip(layers[:-1], layers[1:]):
            if previous.spec.out_dim != layer.spec.in_dim:
                raise ValueError('Layer dimensions do not chain: %s then %s.' % (previous, layer))
        if layers[-1].spec.activation != 'identity':
            raise ValueError('The last layer must use the identity activation, got %s.' % (layers[-1].spec.activation,))
        self.layers = layers

    @classmethod
    def from_arrays(cls, weights, biases, activations):
        """Builds a network from per-layer weights, biases and activation names."""
        layers = []
        for weight, bias, activation in zip(weights, biases, activations):
            weight = np.asarray(weight, dtype=np.float64)
            spec = LayerSpec(in_dim=weight.shape[1], out_dim=weight.shape[0], activation=activation)
            layers.append(Layer(spec, weight, bias))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].spec.in_dim

    @property
    def output_dim(self):
        return self.layers[-1].spec.out_dim

    @property
    def dims(self):
        return (self.input_dim,) + tuple(layer.spec.out_dim for layer in self.layers)

    @property
    def activations(self):
        return tuple(layer.spec.activation for layer in self.layers)

    @property
    def weights(self):
        return [layer.weight for layer in self.layers]

    @property
    def biases(self):
        return [layer.bias for layer in self.layers]

    @property
    def parameter_count(self):
        return sum(layer.spec.parameter_count for layer in self.layers)

    def layer_offsets(self):
        """Start index of every layer in the flattened parameter vector, plus the total."""
        offsets = [0]
        for layer in self.layers:
            offsets.append(offsets[-1] + layer.spec.parameter_count)
        return offsets

    def last_layer_slice(self):
        offsets = self.layer_offsets()
        return slice(offsets[-2], offsets[-1])

    def with_arrays(self, weights, biases):
        """Returns a new network with the same architecture and the given arrays."""
        return Network(Layer(layer.spec, w, b) for layer, w, b in zip(self.layers, weights, biases))

    def with_parameters(self, theta):
        """Returns a new network whose parameters are the flattened vector theta."""
        weights, biases = unflatten_parameters(self, theta)
        return self.with_arrays(weights, biases)

    @property
    def log_desc(self):
        return '<Network %s>' % ('-'.join(str(d) for d in self.dims),)

    def __repr__(self):
        return self.log_desc


class ForwardTrace(object):
    """Pre-activations a^(l) and activations h^(l) of a batch.

    activations[0] is the input batch, activations[l] = act(pre_activations[l - 1])
    for l = 1..L, so activations[-1] is the network output.
    """

    def __init__(self, pre_activations, activations):
        self.pre_activations = pre_activations
        self.activations = activations

    @property
    def inputs(self):
        return self.activations[0]

    @property
    def output(self):
        return self.activations[-1]

    @property
    def features(self):
        """Inputs of the last layer, h^(L-1)."""
        return self.activations[-2]


class ParameterGradients(object):
    """Per-layer weight and bias gradients, shaped like the network parameters."""

    def __init__(self, weights, biases):
        self.weights = list(weights)
        self.biases = list(biases)

    @classmethod
    def zeros_like(cls, net):
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def flatten(self):
        return np.concatenate([np.concatenate([w.ravel(order='C'), b]) for w, b in zip(self.weights, self.biases)])

    def __add__(self, other):
        return ParameterGradients(
            [w + v for w, v in zip(self.weights, other.weights)],
            [b + c for b, c in zip(self.biases, other.biases)],
        )


def flatten_parameters(net):
    """Flattened parameter vector theta (layer-major, weights row-major then bias)."""
    return np.concatenate([np.concatenate([layer.weight.ravel(order='C'), layer.bias]) for layer in net.layers])


def unflatten_parameters(net, theta):
    """Splits a flattened vector into per-layer (weights, biases) lists shaped like net."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (net.parameter_count,):
        raise ValueError('Expected a parameter vector of size %s, got shape %s.' % (net.parameter_count, theta.shape))

    weights, biases = [], []
    start = 0
    for layer in net.layers:
        rows, cols = layer.spec.out_dim, layer.spec.in_dim
        weights.append(theta[start:start + rows * cols].reshape(rows, cols))
        start += rows * cols
        biases.append(theta[start:start + rows])
        start += rows
    return weights, biases


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError('Dimension mismatch: the network expects %s input columns, got shape %s.' % (net.input_dim, x.shape))
    return x


def forward(net, x):
    """Runs the network on a batch of inputs (one per row).

    Args:
        net: a Network
        x: an m x n array, or a single input vector

    Returns:
        A ForwardTrace; trace.output is the m x k output.

    Raises:
        A ValueError on dimension mismatch.
    """
    h = _as_batch(net, x)
    pre_activations, activations = [], [h]
    for layer in net.layers:
        a = h @ layer.weight.T + layer.bias
        h = layer.activation.forward(a)
        pre_activations.append(a)
        activations.append(h)
    return ForwardTrace(pre_activations, activations)


def predict(net, x):
    """Network output f(x; theta) for a batch."""
    return forward(net, x).output


def last_layer_features(net, x):
    """Inputs h^(L-1) of the last layer for a batch."""
    return forward(net, x).features


def _backprop(net, trace, grad_h, top):
    """Reverse pass from the gradient of activations[top].

    Returns:
        The pre-activation gradients (deltas) of layers 1..top (index 0..top-1)
        and the gradient of the input batch.
    """
    deltas = [None] * top
    for index in range(top - 1, -1, -1):
        layer = net.layers[index]
        a, h = trace.pre_activations[index], trace.activations[index + 1]
        delta = grad_h * layer.activation.derivative(a, h)
        deltas[index] = delta
        grad_h = delta @ layer.weight
    return deltas, grad_h


def _summed_gradients(net, trace, deltas):
    weights, biases = [], []
    for index, layer in enumerate(net.layers):
        if index < len(deltas):
            weights.append(deltas[index].T @ trace.activations[index])
            biases.append(deltas[index].sum(axis=0))
        else:
            weights.append(np.zeros_like(layer.weight))
            biases.append(np.zeros_like(layer.bias))
    return ParameterGradients(weights, biases)


def backward(net, trace, output_grad):
    """Gradients of sum(output_grad * output) w.r.t. every parameter and the inputs.

    Args:
        net: the Network that produced trace
        trace: a ForwardTrace from forward(net, x)
        output_grad: an m x k array

    Returns:
        A (ParameterGradients, input gradient m x n) pair.

    Raises:
        A ValueError on shape mismatch.
    """
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != trace.output.shape:
        raise ValueError('Shape mismatch: output %s, output gradient %s.' % (trace.output.shape, output_grad.shape))

    deltas, input_grad = _backprop(net, trace, output_grad, len(net.layers))
    return _summed_gradients(net, trace, deltas), input_grad


def backward_features(net, trace, feature_grad):
    """Like backward but starting from the gradient of the last-layer inputs h^(L-1).

    The last layer receives zero gradients.
    """
    feature_grad = np.asarray(feature_grad, dtype=np.float64)
    if feature_grad.shape != trace.features.shape:
        raise ValueError('Shape mismatch: features %s, feature gradient %s.' % (trace.features.shape, feature_grad.shape))

    deltas, input_grad = _backprop(net, trace, feature_grad, len(net.layers) - 1)
    return _summed_gradients(net, trace, deltas), input_grad


def output_jacobians(net, x):
    """Per-input Jacobians of the outputs w.r.t. the flattened parameters.

    Returns:
        An m x k x d array; [j, i] is the gradient of output i at input j,
        following the flattening contract.
    """
    trace = forward(net, x)
    m, k = trace.output.shape
    jacobians = np.empty((m, k, net.parameter_count))
    for i in range(k):
        seed = np.zeros((m, k))
        seed[:, i] = 1.0
        deltas, _ = _backprop(net, trace, seed, len(net.layers))
        blocks = []
        for index, delta in enumerate(deltas):
            h = trace.activations[index]
            blocks.append((delta[:, :, None] * h[:, None, :]).reshape(m, -1))
            blocks.append(delta)
        jacobians[:, i, :] = np.concatenate(blocks, axis=1)
    return jacobians


def output_jacobian(net, x):
    """Jacobian k x d of f(x; theta) w.r.t. theta for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError('A single input vector is required, got shape %s.' % (x.shape,))
    return output_jacobians(net, x)[0]


def to_element(net):
    """Builds the XML element describing net."""
    root = etree.Element('network', format=MODEL_FORMAT, version=MODEL_VERSION)
    XMLHelper.sub(root, 'input_dim', net.input_dim)
    for index, layer in enumerate(net.layers, start=1):
        elem = XMLHelper.sub(root, 'layer', index=index, in_dim=layer.spec.in_dim, out_dim=layer.spec.out_dim, activation=layer.spec.activation)
        XMLHelper.sub(elem, 'weight', serialize_array(layer.weight), rows=layer.spec.out_dim, cols=layer.spec.in_dim)
        XMLHelper.sub(elem, 'bias', serialize_array(layer.bias), size=layer.spec.out_dim)
    return root


def from_element(root):
    """Rebuilds a network from the element written by to_element.

    Raises:
        A ModelFormatError when the element is not a valid model description.
    """
    if root.tag != 'network' or root.get('format') != MODEL_FORMAT:
        raise ModelFormatError('Not a %s document (root <%s>).' % (MODEL_FORMAT, root.tag))
    if root.get('version') != MODEL_VERSION:
        raise ModelFormatError('Unsupported model version %r, expected %r.' % (root.get('version'), MODEL_VERSION))

    try:
        layers = []
        for elem in XMLHelper.get_elements('layer', root):
            spec = LayerSpec(
                in_dim=XMLHelper.get_attr(elem, 'in_dim', int),
                out_dim=XMLHelper.get_attr(elem, 'out_dim', int),
                activation=XMLHelper.get_attr(elem, 'activation'),
            )
            weight_elem = XMLHelper.get_element(elem, 'weight')
            shape = (XMLHelper.get_attr(weight_elem, 'rows', int), XMLHelper.get_attr(weight_elem, 'cols', int))
            weight = deserialize_array(weight_elem.text, shape)
            bias = deserialize_array(XMLHelper.get_text(elem, 'bias'), (spec.out_dim,))
            layers.append(Layer(spec, weight, bias))
        net = Network(layers)
        declared_input_dim = int(XMLHelper.get_text(root, 'input_dim'))
    except ActivationDoesNotExist as err:
        raise ModelFormatError('Unknown activation in model file: %s' % (err,))
    except (ElementNotFound, DeserializationFailed, ValueError) as err:
        raise ModelFormatError('Malformed model file: %s' % (err,))

    if declared_input_dim != net.input_dim:
        raise ModelFormatError('Declared input_dim does not match the first layer.')
    return net


def save(net, path):
    """Writes net to path as a self-describing XML model file."""
    XMLHelper.write(to_element(net), path)


def load(path):
    """Reads a model file written by save.

    Raises:
        A ModelFormatError for malformed, truncated or unsupported files.
    """
    try:
        root = XMLHelper.read(path)
    except etree.XMLSyntaxError as err:
        raise ModelFormatError('Malformed model file %s: %s' % (path, err))
    return from_element(root)
