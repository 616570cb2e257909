# Third-party
import numpy as np

# Standard SELU constants (Klambauer et al.), full double precision.
SELU_ALPHA = 1.6732632423543772848170429916717
SELU_SCALE = 1.0507009873554804934193349852946


class ActivationDoesNotExist(Exception):
    pass


class Activation(object):
    """An elementwise activation with its derivative.

    Subclasses implement forward(a) and derivative(a, h) where a is the
    pre-activation and h = forward(a).
    """
    name = None

    def forward(self, a):
        raise NotImplementedError

    def derivative(self, a, h):
        raise NotImplementedError

    def __repr__(self):
        return '<Activation: %s>' % (self.name,)


class Identity(Activation):
    name = 'identity'

    def forward(self, a):
        return a

    def derivative(self, a, h):
        return np.ones_like(a)


class ReLU(Activation):
    name = 'relu'

    def forward(self, a):
        return np.maximum(a, 0.0)

    def derivative(self, a, h):
        return (a > 0).astype(np.float64)


class Tanh(Activation):
    name = 'tanh'

    def forward(self, a):
        return np.tanh(a)

    def derivative(self, a, h):
        return 1.0 - h * h


class SELU(Activation):
    name = 'selu'

    def forward(self, a):
        return SELU_SCALE * np.where(a > 0, a, SELU_ALPHA * np.expm1(np.minimum(a, 0.0)))

    def derivative(self, a, h):
        return SELU_SCALE * np.where(a > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(a, 0.0)))


class ActivationFactory(object):
    """Factory to get an activation given its name."""

    # Cache of the activations to not instantiate them every time it is needed.
    activations_factory = {}

    known_activations = dict((klass.name, klass) for klass in (Identity, ReLU, Tanh, SELU))

    @classmethod
    def get_activation_class(cls, name):
        """Gets the Activation class matching the given name.

        Returns:
            The Activation class.

        Raises:
            An ActivationDoesNotExist if the name is unknown.
        """
        try:
            return cls.known_activations[name]
        except (KeyError, TypeError):
            raise ActivationDoesNotExist('Cannot find the activation %r. It must be one of: %s' % (name, ', '.join(sorted(cls.known_activations))))

    @classmethod
    def get(cls, name):
        """Returns the shared instance of the Activation matching the given name.

        Raises:
            An ActivationDoesNotExist if the name is unknown.
        """
        if name in cls.activations_factory:
            return cls.activations_factory[name]

        activation = cls.get_activation_class(name)()
        cls.activations_factory[name] = activation
        return activation

    @classmethod
    def names(cls):
        return sorted(cls.known_activations)
