"""Timing harness for single convolution kernels."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conv import KernelKind, KernelSpec, grouped_conv2d, igc_equivalence_check, igc_monolithic, igc_two_step
from .tensor import Tensor4D, WeightTensor

_KINDS = {
    "regular": KernelKind.REGULAR,
    "grouped": KernelKind.GROUPED,
    "gc": KernelKind.GROUPED,
    "depthwise": KernelKind.DEPTHWISE,
    "dw": KernelKind.DEPTHWISE,
    "igc": KernelKind.INTERLACED_GROUPED,
}


@dataclass(frozen=True)
class BenchKernel:
    spec: KernelSpec
    hw: int
    batch: int = 1

    @property
    def macs(self) -> int:
        oh, ow = self.spec.output_hw(self.hw, self.hw)
        return self.batch * oh * ow * self.spec.macs_per_location()


def parse_kernel(text: str) -> BenchKernel:
    """Parse ``KIND,m=64,n=64,g=4,k=3,hw=28,stride=1,batch=1``; only KIND and m are required."""
    kind_name, *pairs = [p.strip() for p in text.split(",") if p.strip()]
    if kind_name.lower() not in _KINDS:
        raise ValueError(f"unknown kernel kind {kind_name!r}; choose from {sorted(set(_KINDS))}")
    kind = _KINDS[kind_name.lower()]
    opts = {}
    for p in pairs:
        key, sep, val = p.partition("=")
        if not sep or key not in {"m", "n", "g", "k", "hw", "stride", "batch"}:
            raise ValueError(f"bad kernel option {p!r}")
        opts[key] = int(val)
    if "m" not in opts:
        raise ValueError("kernel needs m=<input channels>")
    m = opts["m"]
    n = opts.get("n", m)
    g = opts.get("g", m if kind is KernelKind.DEPTHWISE else 1)
    k = opts.get("k", 3)
    spec = KernelSpec(kind, m, n, k, k, g, opts.get("stride", 1), k // 2)
    return BenchKernel(spec, opts.get("hw", 28), opts.get("batch", 1))


@dataclass(frozen=True)
class BenchStats:
    label: str
    iters: int
    median_s: float
    p10_s: float
    p90_s: float
    macs: int

    @property
    def macs_per_s(self) -> float:
        return self.macs / self.median_s if self.median_s > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"label": self.label, "iters": self.iters, "median_s": self.median_s,
                "p10_s": self.p10_s, "p90_s": self.p90_s, "macs": self.macs,
                "macs_per_s": self.macs_per_s}

    def to_text(self) -> str:
        return (f"{self.label}: median {self.median_s * 1e3:.3f} ms "
                f"(p10 {self.p10_s * 1e3:.3f}, p90 {self.p90_s * 1e3:.3f}) "
                f"{self.macs_per_s / 1e6:.1f} MMAC/s over {self.iters} iters")


def time_call(fn: Callable[[], object], iters: int, warmup: int = 1) -> np.ndarray:
    if iters < 1:
        raise ValueError("iters must be >= 1")
    for _ in range(warmup):
        fn()
    samples = np.empty(iters)
    for i in range(iters):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    return samples


def summarize(label: str, samples: np.ndarray, macs: int) -> BenchStats:
    p10, med, p90 = np.percentile(samples, [10, 50, 90])
    return BenchStats(label, samples.size, float(med), float(p10), float(p90), macs)


def bench_kernel(kernel: BenchKernel, iters: int, seed: int = 0) -> list[BenchStats]:
    """Time a kernel; IGC kernels time both the monolithic and two-step paths after checking they agree."""
    spec = kernel.spec
    rng = np.random.default_rng(seed)
    x = Tensor4D(rng.standard_normal((kernel.batch, spec.in_channels, kernel.hw, kernel.hw)))
    w = WeightTensor(rng.standard_normal(spec.weight_shape))
    name = f"{spec.kind.value} m={spec.in_channels} n={spec.out_channels} g={spec.groups} k={spec.kernel_h}"
    if spec.kind is KernelKind.INTERLACED_GROUPED:
        if not igc_equivalence_check(x, w, spec):
            raise AssertionError("monolithic and two-step IGC outputs differ")
        return [
            summarize(f"{name} [monolithic]", time_call(lambda: igc_monolithic(x, w, spec), iters), kernel.macs),
            summarize(f"{name} [two-step]", time_call(lambda: igc_two_step(x, w, spec), iters), kernel.macs),
        ]
    return [summarize(name, time_call(lambda: grouped_conv2d(x, w, spec), iters), kernel.macs)]
