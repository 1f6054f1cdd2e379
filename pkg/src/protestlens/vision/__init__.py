from .attention import cosine_window_attention, log_cpb_bias, log_spaced_coords, relative_displacements, relative_position_index
from .model import (
    DEFAULT_ATTRIBUTES,
    ImageBatch,
    ImageExample,
    VisionClassifier,
    VisionModelConfig,
    classify_image,
    make_image_batch,
    vision_block_forward,
)
from .windows import cyclic_shift, patch_embed, patch_merge, patchify, shift_mask, window_partition, window_reverse

__all__ = [
    "cosine_window_attention", "log_cpb_bias", "log_spaced_coords", "relative_displacements",
    "relative_position_index", "DEFAULT_ATTRIBUTES", "ImageBatch", "ImageExample", "VisionClassifier",
    "VisionModelConfig", "classify_image", "make_image_batch", "vision_block_forward", "cyclic_shift",
    "patch_embed", "patch_merge", "patchify", "shift_mask", "window_partition", "window_reverse",
]
