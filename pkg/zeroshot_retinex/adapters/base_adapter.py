from abc import ABC, abstractmethod

import numpy as np

from ..exceptions import EmptyImageError, ShapeError
from ..tensorcore import Tensor


class BaseImageAdapter(ABC):
    """Abstract base class for image file backends"""

    formats = ()

    def __init__(self, path):
        self.path = path

    @abstractmethod
    def read_samples(self):
        """Decode the file into an HxWx3 uint8 array"""
        pass

    @abstractmethod
    def write_samples(self, samples):
        """Encode an HxWx3 uint8 array"""
        pass

    def load(self):
        samples = self.read_samples()
        if samples.size == 0 or 0 in samples.shape[:2]:
            raise EmptyImageError(f"Image has zero size: {self.path}")
        return Tensor(samples.transpose(2, 0, 1).astype(np.float64) / 255.0)

    def save(self, image):
        data = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] not in (1, 3):
            raise ShapeError(f"save expects a 1xHxW or 3xHxW tensor, got shape {data.shape}")
        if data.shape[0] == 1:
            data = np.repeat(data, 3, axis=0)
        self.write_samples(quantize(data).transpose(1, 2, 0))


def quantize(values):
    """Clamp to [0, 1] and round value*255 half away from zero"""
    scaled = np.clip(values, 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)
