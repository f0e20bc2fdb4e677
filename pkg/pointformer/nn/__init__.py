from pointformer.nn.checkpoint import read_checkpoint, restore_checkpoint, save_checkpoint
from pointformer.nn.gradcheck import GradCheckReport, away_from_kinks, grad_check
from pointformer.nn.grid import LayerParams, Parameter, ValueGrid
from pointformer.nn.layers import (
    MLP,
    GlobalAvgPool,
    Linear,
    MaxPoolNeighbors,
    Module,
    PointNorm,
    ReLU,
    SoftmaxNeighbors,
)
from pointformer.nn.optim import OptimizerState, sgd_step, step_schedule

__all__ = [
    "GlobalAvgPool",
    "GradCheckReport",
    "LayerParams",
    "Linear",
    "MLP",
    "MaxPoolNeighbors",
    "Module",
    "OptimizerState",
    "Parameter",
    "PointNorm",
    "ReLU",
    "SoftmaxNeighbors",
    "ValueGrid",
    "away_from_kinks",
    "grad_check",
    "read_checkpoint",
    "restore_checkpoint",
    "save_checkpoint",
]
