"""Handcrafted and deep feature fusion for three-class chest X-ray classification."""

from ._radfuse import (
    CLASSES,
    GROUPS,
    STAT_NAMES,
    Model,
    RadfuseError,
    clahe,
    compute_stats,
    confidence_interval,
    confusion_matrix,
    glcm,
    gldm,
    group_width,
    handcrafted,
    kpca_fit,
    lbp_codes,
    load_gray,
    load_model,
    preprocess_image,
    read_rff,
    report,
    resize,
    split,
    write_rff,
)

__all__ = [
    "CLASSES",
    "GROUPS",
    "STAT_NAMES",
    "Model",
    "RadfuseError",
    "clahe",
    "compute_stats",
    "confidence_interval",
    "confusion_matrix",
    "glcm",
    "gldm",
    "group_width",
    "handcrafted",
    "kpca_fit",
    "lbp_codes",
    "load_gray",
    "load_model",
    "preprocess_image",
    "read_rff",
    "report",
    "resize",
    "split",
    "write_rff",
]
