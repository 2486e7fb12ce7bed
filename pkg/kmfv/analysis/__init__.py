from . import metrics
from . import bdrate
from . import report
from . import rdeval
