from . import synth
from . import sepconv
from . import rangecoder
from . import entropy
from . import interp
from . import nets
from . import gop
from . import train
from . import codec
