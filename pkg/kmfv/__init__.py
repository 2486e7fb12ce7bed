from .fileio import *
from .process import *
from .util import *
from .analysis import *

__version__ = '0.1-dev'
