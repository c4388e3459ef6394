"""Python bindings for the inclg face inpainting core."""

from ._inclg import (
    CheckpointError,
    ConfigError,
    DataError,
    Model,
    ShapeError,
    __version__,
    assign_group,
    build_flist,
    composite,
    derive_seed,
    landmark_loss,
    load_landmarks,
    mask_ratio,
    masked_psnr,
    pixel_loss,
    rasterize_landmarks,
    tv_loss,
    write_untrained_checkpoint,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Model",
    "ShapeError",
    "__version__",
    "assign_group",
    "build_flist",
    "composite",
    "derive_seed",
    "landmark_loss",
    "load_landmarks",
    "mask_ratio",
    "masked_psnr",
    "pixel_loss",
    "rasterize_landmarks",
    "tv_loss",
    "write_untrained_checkpoint",
]
