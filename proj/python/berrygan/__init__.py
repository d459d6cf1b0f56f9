"""Berry revelation pipeline: scene synthesis, occlusion, GAN training, counting."""

from ._core import (
    BACKGROUND,
    BERRY,
    BERRY_EDGE,
    apply_helmert,
    berry_stats,
    build_pairs,
    count_berries,
    default_config,
    estimate_helmert,
    extract_patches,
    generate_scene,
    generation_map,
    iou,
    make_leaf_bank,
    pearson,
    quantize_mask,
    quantize_value,
    r_squared,
    reocclude,
    resize_nearest,
    run_recipe,
)

__all__ = [
    "BACKGROUND",
    "BERRY",
    "BERRY_EDGE",
    "apply_helmert",
    "berry_stats",
    "build_pairs",
    "count_berries",
    "default_config",
    "estimate_helmert",
    "extract_patches",
    "generate_scene",
    "generation_map",
    "iou",
    "make_leaf_bank",
    "pearson",
    "quantize_mask",
    "quantize_value",
    "r_squared",
    "reocclude",
    "resize_nearest",
    "run_recipe",
]
