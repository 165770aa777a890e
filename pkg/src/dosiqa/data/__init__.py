from .manifest import (
    DATA_ROOT_ENV,
    DatasetManifest,
    ManifestEntry,
    infer_category,
    load_manifest,
    save_manifest,
)
from .preprocess import CROP, RESIZE, TINY_CROP, TINY_RESIZE, load_image, preprocess
from .splits import SplitPlan, make_splits
from .synthetic import generate_synthetic_dataset

__all__ = [
    "DATA_ROOT_ENV", "DatasetManifest", "ManifestEntry", "infer_category", "load_manifest",
    "save_manifest", "CROP", "RESIZE", "TINY_CROP", "TINY_RESIZE", "load_image", "preprocess",
    "SplitPlan", "make_splits", "generate_synthetic_dataset",
]
