from .base_adapter import BaseImageAdapter
from ..exceptions import ImageNotFoundError, ImageReadError, ImageWriteError, UnsupportedImageError
import numpy as np
import logging
import os

_logger = logging.getLogger(__name__)

# 8-bit modes; anything wider (I;16, I, F) is refused.
_EIGHT_BIT_MODES = {'1', 'L', 'LA', 'P', 'RGB', 'RGBA', 'CMYK', 'YCbCr'}


class PillowImageAdapter(BaseImageAdapter):
    """PNG/JPEG reading and PNG writing through Pillow"""

    formats = ('PNG', 'JPEG')

    def read_samples(self):
        if not os.path.isfile(self.path):
            raise ImageNotFoundError(f"No such image file: {self.path}")

        try:
            from PIL import Image, UnidentifiedImageError
        except ImportError:
            raise ImageReadError("Pillow library not installed. Install with: pip install Pillow")

        try:
            with Image.open(self.path) as img:
                if img.format not in self.formats:
                    raise UnsupportedImageError(
                        f"Unsupported image format {img.format} for {self.path}"
                    )
                if img.mode not in _EIGHT_BIT_MODES:
                    raise UnsupportedImageError(
                        f"Only 8-bit images are supported, {self.path} has mode {img.mode}"
                    )
                if img.width == 0 or img.height == 0:
                    return np.zeros((img.height, img.width, 3), dtype=np.uint8)
                # Grayscale is replicated to three channels by the conversion.
                return np.asarray(img.convert('RGB'), dtype=np.uint8)
        except UnidentifiedImageError as e:
            raise UnsupportedImageError(f"Cannot identify image {self.path}: {e}") from e
        except (OSError, SyntaxError, ValueError) as e:
            _logger.error(f"Image decode failed for {self.path}: {str(e)}")
            raise ImageReadError(f"Cannot decode {self.path}: {e}") from e

    def write_samples(self, samples):
        from PIL import Image

        try:
            Image.fromarray(np.ascontiguousarray(samples)).save(self.path, format='PNG')
        except (OSError, ValueError) as e:
            _logger.error(f"Image write failed for {self.path}: {str(e)}")
            raise ImageWriteError(f"Cannot write {self.path}: {e}") from e
