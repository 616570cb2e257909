from .utils.xmlhelper import *
from .utils.loggers import *
from .utils.serializers import *
from .utils.introspection import *
from .settings import *
from .numerics import *
from .network import *
from .training import *
from .data import *
from .metrics import *
from .laplace import *
from .lula import *
from .config import *
from .commands import *
