"""Zero-shot low-light image enhancement by per-image Retinex decomposition."""

__version__ = '1.0.0'

from .adapters import load_image, save_image
from .models import EnhanceConfig, LossWeights, NetConfig
from .services.processor import decompose, enhance
