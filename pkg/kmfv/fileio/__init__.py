from . import fileiobase
from . import yuv
from . import imgdir
from . import table
from . import ckpt
from . import bitstream
