"""Toy encoder-decoder trainer that maps ternary event frames to
propeller-center heatmaps, reading and writing the dataset layout used by
the propforge CLI."""

from .model import NetConfig, build_model, count_params        # noqa: F401
from .train import TrainConfig, train                          # noqa: F401
from .infer import infer_dir                                   # noqa: F401
