"""Forward convolution kernels: regular, grouped, depthwise and interlaced grouped.

Every output element is accumulated in one fixed order: input channel of
the group, then kernel row, then kernel column, starting from 0.0. The
vectorised paths below only batch that loop across output elements, so
they agree bit-for-bit with a scalar loop written in the same order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisibilityError, ShapeError
from .tensor import DTYPE, Tensor4D, WeightTensor, interlace_channels, interlace_permutation

DEFAULT_BN_EPS = 1e-5


class KernelKind(str, enum.Enum):
    REGULAR = "regular"
    GROUPED = "grouped"
    DEPTHWISE = "depthwise"
    INTERLACED_GROUPED = "igc"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    in_channels: int
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3
    groups: int = 1
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", KernelKind(self.kind))
        for name in ("in_channels", "out_channels", "kernel_h", "kernel_w", "groups", "stride"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.padding < 0:
            raise ShapeError(f"padding must be >= 0, got {self.padding}")
        g = self.groups
        if self.in_channels % g or self.out_channels % g:
            raise DivisibilityError(
                f"groups={g} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}"
            )
        if self.kind is KernelKind.REGULAR and g != 1:
            raise DivisibilityError("a regular convolution has exactly one group")
        if self.kind is KernelKind.DEPTHWISE and not (g == self.in_channels == self.out_channels):
            raise DivisibilityError("depthwise convolution needs groups == in_channels == out_channels")

    @classmethod
    def regular(cls, m: int, n: int, k: int = 3, stride: int = 1, padding: int | None = None) -> KernelSpec:
        return cls(KernelKind.REGULAR, m, n, k, k, 1, stride, k // 2 if padding is None else padding)

    @classmethod
    def grouped(cls, m: int, n: int, g: int, k: int = 1, stride: int = 1, padding: int | None = None) -> KernelSpec:
        return cls(KernelKind.GROUPED, m, n, k, k, g, stride, k // 2 if padding is None else padding)

    @classmethod
    def depthwise(cls, m: int, k: int = 3, stride: int = 1, padding: int | None = None) -> KernelSpec:
        return cls(KernelKind.DEPTHWISE, m, m, k, k, m, stride, k // 2 if padding is None else padding)

    @classmethod
    def igc(cls, m: int, n: int, g: int, k: int = 3, stride: int = 1, padding: int | None = None) -> KernelSpec:
        return cls(KernelKind.INTERLACED_GROUPED, m, n, k, k, g, stride, k // 2 if padding is None else padding)

    @property
    def area(self) -> int:
        return self.kernel_h * self.kernel_w

    @property
    def in_per_group(self) -> int:
        return self.in_channels // self.groups

    @property
    def out_per_group(self) -> int:
        return self.out_channels // self.groups

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_per_group, self.kernel_h, self.kernel_w)

    def output_hw(self, height: int, width: int) -> tuple[int, int]:
        oh = (height + 2 * self.padding - self.kernel_h) // self.stride + 1
        ow = (width + 2 * self.padding - self.kernel_w) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"{height}x{width} input is too small for {self}")
        return oh, ow

    def macs_per_location(self) -> int:
        """Multiplies per output location; equals the weight count (no bias)."""
        return self.area * self.in_per_group * self.out_channels

    def as_grouped(self) -> KernelSpec:
        """The same kernel with the output interlace dropped."""
        if self.kind is KernelKind.INTERLACED_GROUPED:
            return KernelSpec(KernelKind.GROUPED, self.in_channels, self.out_channels,
                              self.kernel_h, self.kernel_w, self.groups, self.stride, self.padding)
        return self


@dataclass(frozen=True, eq=False)
class BatchNormParams:
    scale: np.ndarray
    shift: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = DEFAULT_BN_EPS

    def __post_init__(self) -> None:
        arrays = []
        for name in ("scale", "shift", "mean", "var"):
            arr = np.asarray(getattr(self, name), dtype=DTYPE).reshape(-1)
            arrays.append(arr)
            object.__setattr__(self, name, arr)
        if len({a.size for a in arrays}) != 1:
            raise ShapeError("batch-norm parameter vectors differ in length")

    @property
    def channels(self) -> int:
        return self.scale.size

    @classmethod
    def identity(cls, channels: int, eps: float = DEFAULT_BN_EPS) -> BatchNormParams:
        return cls(np.ones(channels), np.zeros(channels), np.zeros(channels), np.ones(channels), eps)


@dataclass(frozen=True)
class BlockSpec:
    """3x3 IGC -> BN -> 1x1 GC -> BN -> ReLU."""

    igc: KernelSpec
    gc: KernelSpec
    bn1: BatchNormParams = field(compare=False)
    bn2: BatchNormParams = field(compare=False)

    def __post_init__(self) -> None:
        if self.igc.out_channels != self.gc.in_channels:
            raise ShapeError(
                f"IGC produces {self.igc.out_channels} channels but GC expects {self.gc.in_channels}"
            )
        if self.gc.stride != 1:
            raise ShapeError("the GC kernel of a block must have stride 1")
        if self.bn1.channels != self.igc.out_channels or self.bn2.channels != self.gc.out_channels:
            raise ShapeError("batch-norm sizes do not match the block's channel counts")

    @classmethod
    def make(cls, m: int, l: int, n: int, g1: int, g2: int, stride: int = 1,
             interlaced: bool = True, eps: float = DEFAULT_BN_EPS) -> BlockSpec:
        first = KernelSpec.igc(m, l, g1, 3, stride) if interlaced else KernelSpec.grouped(m, l, g1, 3, stride)
        return cls(first, KernelSpec.grouped(l, n, g2, 1),
                   BatchNormParams.identity(l, eps), BatchNormParams.identity(n, eps))


def _check_operands(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> tuple[int, int]:
    if inp.channels != spec.in_channels:
        raise ShapeError(f"input has {inp.channels} channels, kernel expects {spec.in_channels}")
    if weights.shape != spec.weight_shape:
        raise ShapeError(f"weight shape {weights.shape} does not match {spec.weight_shape}")
    return spec.output_hw(inp.height, inp.width)


def _padded(inp: Tensor4D, pad: int) -> np.ndarray:
    if pad == 0:
        return inp.data
    return np.pad(inp.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _window(x: np.ndarray, ky: int, kx: int, oh: int, ow: int, stride: int) -> np.ndarray:
    return x[..., ky:ky + stride * (oh - 1) + 1:stride, kx:kx + stride * (ow - 1) + 1:stride]


def grouped_conv2d(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> Tensor4D:
    """Grouped convolution over contiguous channel groups, no interlace.

    Regular (g=1) and depthwise (g=M) are the two extreme cases.
    """
    oh, ow = _check_operands(inp, weights, spec)
    g, ipg, opg = spec.groups, spec.in_per_group, spec.out_per_group
    x = _padded(inp, spec.padding)
    b = x.shape[0]
    x = x.reshape(b, g, ipg, x.shape[2], x.shape[3])
    w = weights.data.reshape(g, opg, ipg, spec.kernel_h, spec.kernel_w)
    acc = np.zeros((b, g, opg, oh, ow), dtype=DTYPE)
    for ci in range(ipg):
        xc = x[:, :, ci, None]
        for ky in range(spec.kernel_h):
            for kx in range(spec.kernel_w):
                acc += w[None, :, :, ci, ky, kx, None, None] * _window(xc, ky, kx, oh, ow, spec.stride)
    return Tensor4D(acc.reshape(b, spec.out_channels, oh, ow))


def igc_monolithic(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> Tensor4D:
    """Interlaced grouped convolution computed directly in output order.

    Weight row ``n`` is grouped-output ``n``; output position ``k`` applies
    weight row ``perm[k]`` to input group ``k mod g``.
    """
    oh, ow = _check_operands(inp, weights, spec)
    g, ipg = spec.groups, spec.in_per_group
    perm = interlace_permutation(spec.out_channels, g)
    src_group = perm // spec.out_per_group
    x = _padded(inp, spec.padding)
    w = weights.data[perm]
    acc = np.zeros((x.shape[0], spec.out_channels, oh, ow), dtype=DTYPE)
    for ci in range(ipg):
        xc = x[:, src_group * ipg + ci]
        for ky in range(spec.kernel_h):
            for kx in range(spec.kernel_w):
                acc += w[None, :, ci, ky, kx, None, None] * _window(xc, ky, kx, oh, ow, spec.stride)
    return Tensor4D(acc)


def igc_two_step(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> Tensor4D:
    return interlace_channels(grouped_conv2d(inp, weights, spec.as_grouped()), spec.groups)


def conv2d(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec, *, two_step: bool = False) -> Tensor4D:
    if spec.kind is KernelKind.INTERLACED_GROUPED:
        return igc_two_step(inp, weights, spec) if two_step else igc_monolithic(inp, weights, spec)
    return grouped_conv2d(inp, weights, spec)


def igc_equivalence_check(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> bool:
    if spec.kind is not KernelKind.INTERLACED_GROUPED:
        raise ValueError(f"expected an interlaced grouped kernel, got {spec.kind.value}")
    return igc_monolithic(inp, weights, spec) == igc_two_step(inp, weights, spec)


def swap_even_odd_channels(t: Tensor4D) -> Tensor4D:
    if t.channels % 2:
        raise DivisibilityError(f"cannot pair up {t.channels} channels")
    perm = np.arange(t.channels) ^ 1
    return Tensor4D(t.data[:, perm])


def igc_via_depthwise_pair(inp: Tensor4D, weights: WeightTensor, spec: KernelSpec) -> Tensor4D:
    """IGC with two input channels per group, built from two depthwise convs.

    One depthwise pass runs on the input, the other on the input with each
    even/odd channel pair swapped; their sum is the grouped result, which is
    then interlaced. Requires in == out channels and groups == channels / 2.
    """
    m = spec.in_channels
    if spec.kind is not KernelKind.INTERLACED_GROUPED or spec.out_channels != m or spec.groups * 2 != m:
        raise ValueError("depthwise-pair construction needs an IGC with M == L and groups == M/2")
    _check_operands(inp, weights, spec)
    c = np.arange(m)
    # grouped output c = 2j + r reads inputs 2j (weight col 0) and 2j+1 (weight col 1)
    w_same = weights.data[c, c % 2][:, None]
    w_swap = weights.data[c, 1 - c % 2][:, None]
    dw = KernelSpec(KernelKind.DEPTHWISE, m, m, spec.kernel_h, spec.kernel_w, m, spec.stride, spec.padding)
    direct = grouped_conv2d(inp, WeightTensor(w_same), dw)
    swapped = grouped_conv2d(swap_even_odd_channels(inp), WeightTensor(w_swap), dw)
    return interlace_channels(Tensor4D(direct.data + swapped.data), spec.groups)


def batchnorm_inference(t: Tensor4D, params: BatchNormParams) -> Tensor4D:
    if params.channels != t.channels:
        raise ShapeError(f"batch-norm has {params.channels} channels, tensor has {t.channels}")
    if np.any(params.var + params.eps <= 0):
        raise ValueError("variance + eps must be positive")
    def col(v):
        return v[None, :, None, None]
    out = col(params.scale) * (t.data - col(params.mean)) / np.sqrt(col(params.var) + params.eps) + col(params.shift)
    return Tensor4D(out)


def relu(t: Tensor4D) -> Tensor4D:
    return Tensor4D(np.maximum(t.data, 0.0))


def clc_block_forward(inp: Tensor4D, block: BlockSpec, weights: tuple[WeightTensor, WeightTensor]) -> Tensor4D:
    if inp.channels != block.igc.in_channels:
        raise ShapeError(f"block expects {block.igc.in_channels} input channels, got {inp.channels}")
    w_igc, w_gc = weights
    mid = batchnorm_inference(conv2d(inp, w_igc, block.igc), block.bn1)
    return relu(batchnorm_inference(conv2d(mid, w_gc, block.gc), block.bn2))


def global_avg_pool(t: Tensor4D) -> Tensor4D:
    return Tensor4D(t.data.mean(axis=(2, 3), keepdims=True))


def linear(t: Tensor4D, weight: np.ndarray, bias: np.ndarray) -> Tensor4D:
    """Fully connected layer on a pooled (b, c, 1, 1) tensor."""
    if t.height != 1 or t.width != 1:
        raise ShapeError(f"linear layer expects 1x1 spatial input, got {t.height}x{t.width}")
    if weight.shape[1] != t.channels:
        raise ShapeError(f"linear layer expects {weight.shape[1]} features, got {t.channels}")
    out = t.data[:, :, 0, 0] @ weight.T + bias
    return Tensor4D(out[:, :, None, None])


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)
