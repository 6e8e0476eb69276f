"""Training kit for the tree-ring boundary segmentation model.

Builds training tiles from annotated discs, trains a ResNet18-encoder
segmentation network (Dice loss, Adam, cosine annealing), and exports it to
the ONNX file the detection package consumes.
"""

__version__ = "0.1.0"

from .annotations import Annotation, load_annotation
from .augment import DiscSample, augment
from .config import TrainConfig, load_config, save_config
from .dataset import load_disc_samples, load_prepared, prepare
from .gt import rasterize_gt
from .model import RingSegmentationNet, dice_loss
from .onnx_export import UnsupportedLayerError, export_model
from .tiles import TrainingTile, make_tiles
from .training import TrainResult, load_checkpoint, split_discs, train

__all__ = [
    "Annotation", "DiscSample", "RingSegmentationNet", "TrainConfig",
    "TrainResult", "TrainingTile", "UnsupportedLayerError", "augment",
    "dice_loss", "export_model", "load_annotation", "load_checkpoint",
    "load_config", "load_disc_samples", "load_prepared", "make_tiles",
    "prepare", "rasterize_gt", "save_config", "split_discs", "train",
]
