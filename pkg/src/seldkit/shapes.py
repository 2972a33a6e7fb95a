"""Pooling and shape bookkeeping for the specialists' dataflow.

Neural stages are modelled by their shape effect only. The pooling stages are
real numpy operations so the schedule can be checked on small tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from seldkit.core import ValidationError

SPATIO_LINGUISTIC = "spatio_linguistic"
SPATIO_TEMPORAL = "spatio_temporal"
TEMPO_LINGUISTIC = "tempo_linguistic"
STRATEGIES = (SPATIO_LINGUISTIC, SPATIO_TEMPORAL, TEMPO_LINGUISTIC)

# axis positions in a (planes, time, frequency) audio tensor
AUDIO_AXES = {"channel": 0, "time": 1, "frequency": 2}
# axis positions in a (time, patch, channel) visual embedding grid
GRID_AXES = {"time": 0, "patch": 1, "channel": 2}


@dataclass(frozen=True)
class EmbeddingGrid:
    values: np.ndarray
    provenance: str = "visual-encoder stub"

    def __post_init__(self):
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValidationError(f"grid must be T x P x C with all dims >= 1, got {self.values.shape}")


@dataclass(frozen=True)
class PoolStage:
    name: str
    axis: str
    mode: str
    stride: int

    def __post_init__(self):
        if self.mode not in ("mean", "max", "identity"):
            raise ValidationError(f"stage mode must be mean, max or identity, got {self.mode!r}")
        if self.stride < 1 or (self.mode == "identity" and self.stride != 1):
            raise ValidationError("stride must be >= 1, and exactly 1 for identity stages")


PoolPlan = Sequence[PoolStage]


def pool(tensor: np.ndarray, axis: int, mode: str, stride: int) -> np.ndarray:
    """Non-overlapping window reduction (window = stride) along `axis`."""
    tensor = np.asarray(tensor)
    if mode not in ("mean", "max"):
        raise ValidationError(f"pool mode must be 'mean' or 'max', got {mode!r}")
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    axis = axis % tensor.ndim
    length = tensor.shape[axis]
    if length % stride:
        raise ValidationError(f"axis length {length} not divisible by stride {stride}")
    shape = tensor.shape[:axis] + (length // stride, stride) + tensor.shape[axis + 1:]
    windows = tensor.reshape(shape)
    return windows.mean(axis=axis + 1) if mode == "mean" else windows.max(axis=axis + 1)


def specialist_visual_pool(grid: EmbeddingGrid, strategy: str) -> np.ndarray:
    """Reduce a T x P x C grid the way each specialist's visual branch does.

    spatio_linguistic averages over time (P x C), spatio_temporal over
    channels (T x P) and tempo_linguistic over patches (T x C).
    """
    axis = {SPATIO_LINGUISTIC: 0, SPATIO_TEMPORAL: 2, TEMPO_LINGUISTIC: 1}.get(strategy)
    if axis is None:
        raise ValidationError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return grid.values.mean(axis=axis)


@dataclass(frozen=True)
class TraceStep:
    name: str
    axis: str
    mode: str
    stride: int
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]


# identity stages stand in for shape-preserving neural blocks
CANONICAL_SELD_PLAN: tuple[PoolStage, ...] = (
    PoolStage("resnet_layer1", "channel", "identity", 1),
    PoolStage("freq_pool1", "frequency", "max", 4),
    PoolStage("resnet_layer2", "channel", "identity", 1),
    PoolStage("freq_pool2", "frequency", "max", 4),
    PoolStage("resnet_layer3", "channel", "identity", 1),
    PoolStage("freq_pool3", "frequency", "max", 4),
    PoolStage("resnet_layer4", "channel", "identity", 1),
    PoolStage("time_pool1", "time", "mean", 4),
    PoolStage("conformer", "channel", "identity", 1),
    PoolStage("time_pool2", "time", "mean", 4),
)


def trace_plan(input_shape: Sequence[int], plan: PoolPlan,
               axes: dict[str, int] = AUDIO_AXES) -> list[TraceStep]:
    shape = tuple(int(d) for d in input_shape)
    steps = []
    for st in plan:
        if st.axis not in axes:
            raise ValidationError(f"stage {st.name!r}: axis {st.axis!r} not in {sorted(axes)}")
        ax = axes[st.axis]
        if shape[ax] % st.stride:
            raise ValidationError(
                f"stage {st.name!r}: {st.axis} length {shape[ax]} not divisible by {st.stride}"
            )
        out = shape[:ax] + (shape[ax] // st.stride,) + shape[ax + 1:]
        steps.append(TraceStep(st.name, st.axis, st.mode, st.stride, shape, out))
        shape = out
    return steps


def apply_plan(tensor: np.ndarray, plan: PoolPlan, axes: dict[str, int] = AUDIO_AXES) -> np.ndarray:
    for st in plan:
        if st.mode != "identity":
            tensor = pool(tensor, axes[st.axis], st.mode, st.stride)
    return tensor


def seld_encoder_trace(input_shape: Sequence[int],
                       plan: PoolPlan = CANONICAL_SELD_PLAN) -> list[TraceStep]:
    """Shape trace of the SELD encoder for a (planes, time, 64) input.

    Three stride-4 frequency max pools take 64 mel bins to 1; two stride-4
    temporal mean pools take 800 frames to 50.
    """
    if len(input_shape) != 3:
        raise ValidationError(f"expected (planes, time, freq), got {tuple(input_shape)}")
    planes, time, freq = input_shape
    if freq != 64:
        raise ValidationError(f"encoder expects 64 frequency bins, got {freq}")
    if planes < 1 or time < 1:
        raise ValidationError(f"invalid input shape {tuple(input_shape)}")
    return trace_plan(input_shape, plan)


def format_trace(steps: Sequence[TraceStep]) -> str:
    lines = [f"{'stage':<14} {'axis':<10} {'mode':<8} {'stride':>6}  {'in':<16} out"]
    for s in steps:
        lines.append(
            f"{s.name:<14} {s.axis:<10} {s.mode:<8} {s.stride:>6}  "
            f"{'x'.join(map(str, s.in_shape)):<16} {'x'.join(map(str, s.out_shape))}"
        )
    return "\n".join(lines) + "\n"
