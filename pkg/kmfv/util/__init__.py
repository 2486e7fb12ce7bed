from . import misc
from . import manifest
