from .config import OptimizerConfig, RunConfig, SplitConfig, build_model
from .evaluate import cmd_eval, evaluate
from .train import TrainResult, train

__all__ = ["OptimizerConfig", "RunConfig", "SplitConfig", "build_model", "cmd_eval", "evaluate",
           "TrainResult", "train"]
