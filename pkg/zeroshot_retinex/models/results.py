from dataclasses import dataclass, field

import numpy as np

from ..tensorcore import Tensor

LOSS_TERMS = ('recon', 'illum_smooth', 'refl_smooth', 'color', 'region', 'maxa', 'noise', 'total')


@dataclass
class LossBreakdown:
    """Per-term loss values of one iteration plus the weighted total"""

    recon: float
    illum_smooth: float
    refl_smooth: float
    color: float
    region: float
    maxa: float
    noise: float
    total: float
    # Differentiable total; only set while the tape that produced it is alive.
    total_tensor: Tensor = field(default=None, repr=False, compare=False)

    def as_dict(self):
        return {name: getattr(self, name) for name in LOSS_TERMS}

    def is_finite(self):
        return all(np.isfinite(v) for v in self.as_dict().values())


@dataclass
class DarkRegionMask:
    """Pixels whose luminance is at or below the dark-fraction quantile"""

    mask: np.ndarray
    fraction: float
    threshold: float

    @property
    def count(self):
        return int(self.mask.sum())


@dataclass
class DecompositionResult:
    reflectance: Tensor
    illumination: Tensor
    noise: Tensor
    loss_trace: list = field(default_factory=list)


@dataclass
class EnhanceResult:
    enhanced: Tensor
    adjusted_illumination: Tensor
    denoised: Tensor
    reflectance: Tensor
    decomposition: DecompositionResult
