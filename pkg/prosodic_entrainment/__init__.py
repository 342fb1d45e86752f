__version__ = '0.1.0'

from .misc import *
from .config import *
from .signal import *
from .stylize import *
from .structure import *
from .dialacts import *
from .features import *
from .entrain import *
from .stats import *
from .corpus import *
from .synth import *
from .plot import *
from .pipeline import *
