import os

from .base_adapter import BaseImageAdapter, quantize
from .pillow_adapter import PillowImageAdapter
from ..exceptions import ImageNotFoundError, UnsupportedImageError

ADAPTER_MAP = {
    '.png': PillowImageAdapter,
    '.jpg': PillowImageAdapter,
    '.jpeg': PillowImageAdapter,
}

# Outputs are always PNG.
WRITE_SUFFIXES = ('.png',)


def get_adapter(path, for_write=False):
    """Pick the image adapter for a file by its suffix"""
    suffix = os.path.splitext(str(path))[1].lower()
    if for_write and suffix not in WRITE_SUFFIXES:
        raise UnsupportedImageError(f"Output must be a .png file, got {path}")
    adapter_class = ADAPTER_MAP.get(suffix)
    if not adapter_class:
        raise UnsupportedImageError(f"Unsupported image type: {suffix or '(none)'} for {path}")
    return adapter_class(str(path))


def load_image(path):
    """Read an 8-bit PNG/JPEG into a 3xHxW tensor in [0, 1]"""
    if not os.path.isfile(str(path)):
        raise ImageNotFoundError(f"No such image file: {path}")
    return get_adapter(path).load()


def save_image(image, path):
    """Write a tensor in [0, 1] as an 8-bit PNG (values are clamped first)"""
    get_adapter(path, for_write=True).save(image)


def is_supported(path):
    return os.path.splitext(str(path))[1].lower() in ADAPTER_MAP
