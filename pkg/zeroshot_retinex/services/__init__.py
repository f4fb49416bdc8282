from . import imaging
from . import networks
from . import losses
from . import optimizer
from . import processor
from . import batch_runner
