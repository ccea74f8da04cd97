"""Dense NCHW tensors and the channel interlace permutation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivisibilityError, ShapeError

DTYPE = np.float64


def _check_dims(dims: tuple[int, ...], what: str) -> None:
    for d in dims:
        if int(d) != d or d < 1:
            raise ShapeError(f"{what} dimensions must be positive integers, got {dims}")


@dataclass(frozen=True, eq=False)
class Tensor4D:
    """Activation tensor in (batch, channel, row, column) layout.

    The backing array is C-contiguous, so ``flat`` enumerates elements
    batch-major, then channel, then row, then column.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=DTYPE)
        if arr.ndim != 4:
            raise ShapeError(f"expected a 4-D array, got shape {arr.shape}")
        _check_dims(arr.shape, "tensor")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, batch: int, channels: int, height: int, width: int, values) -> Tensor4D:
        values = np.asarray(values, dtype=DTYPE)
        _check_dims((batch, channels, height, width), "tensor")
        if values.size != batch * channels * height * width:
            raise ShapeError(
                f"{values.size} values cannot fill a {batch}x{channels}x{height}x{width} tensor"
            )
        return cls(values.reshape(batch, channels, height, width))

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def at(self, b: int, c: int, y: int, x: int) -> float:
        return float(self.data[b, c, y, x])

    def offset(self, b: int, c: int, y: int, x: int) -> int:
        """Index of element (b, c, y, x) in ``flat``."""
        for i, n in zip((b, c, y, x), self.shape):
            if not 0 <= i < n:
                raise IndexError(f"index {(b, c, y, x)} out of range for shape {self.shape}")
        return ((b * self.channels + c) * self.height + y) * self.width + x

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor4D):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class WeightTensor:
    """Convolution weights shaped (out_channels, in_channels_per_group, kh, kw)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=DTYPE)
        if arr.ndim != 4:
            raise ShapeError(f"expected a 4-D weight array, got shape {arr.shape}")
        _check_dims(arr.shape, "weight")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def out_channels(self) -> int:
        return self.data.shape[0]

    @property
    def in_channels_per_group(self) -> int:
        return self.data.shape[1]

    @property
    def kernel_h(self) -> int:
        return self.data.shape[2]

    @property
    def kernel_w(self) -> int:
        return self.data.shape[3]

    @property
    def area(self) -> int:
        return self.kernel_h * self.kernel_w

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)


def new_tensor(batch: int, channels: int, height: int, width: int, fill: float = 0.0) -> Tensor4D:
    _check_dims((batch, channels, height, width), "tensor")
    return Tensor4D(np.full((batch, channels, height, width), fill, dtype=DTYPE))


def interlace_permutation(channels: int, groups: int) -> np.ndarray:
    """Source channel for each output position: ``perm[k] = (k % g) * (C // g) + k // g``.

    Consecutive output positions cycle through the ``groups`` contiguous
    input blocks.
    """
    if groups < 1 or channels % groups:
        raise DivisibilityError(f"groups={groups} does not divide channels={channels}")
    k = np.arange(channels)
    return (k % groups) * (channels // groups) + k // groups


def inverse_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def interlace_channels(t: Tensor4D, g: int) -> Tensor4D:
    perm = interlace_permutation(t.channels, g)
    return Tensor4D(t.data[:, perm])


def permute_channels(t: Tensor4D, perm) -> Tensor4D:
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(t.channels)):
        raise ShapeError(f"not a permutation of {t.channels} channels")
    return Tensor4D(t.data[:, perm])
