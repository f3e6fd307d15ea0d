"""Image enhancement by tree search over a catalog of global edits.

Images are float32 numpy arrays of shape (H, W, 3) with values in [0, 1].
"""

from ._core import (
    TreenhanceError,
    apply,
    apply_sequence,
    catalog_size,
    delta_e,
    enhance,
    enhance_guided,
    list_operations,
    load_image,
    psnr,
    return_value,
    save_image,
    ssim,
)

__all__ = [
    "TreenhanceError",
    "apply",
    "apply_sequence",
    "catalog_size",
    "delta_e",
    "enhance",
    "enhance_guided",
    "list_operations",
    "load_image",
    "psnr",
    "return_value",
    "save_image",
    "ssim",
]
