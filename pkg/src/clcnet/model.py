"""clcNet construction, cost accounting, FCRF checks and forward inference."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cdg import block_cdg, cdg_of_kernel, crf_sizes, has_fcrf
from .conv import (
    BatchNormParams,
    BlockSpec,
    KernelSpec,
    batchnorm_inference,
    clc_block_forward,
    conv2d,
    fan_in_uniform,
    global_avg_pool,
    linear,
    relu,
)
from .errors import ConfigParseError, LayerShapeError, ShapeError
from .tensor import Tensor4D, WeightTensor

STEM_CHANNELS = 32
FEATURE_CHANNELS = 1024
G2 = 2

# (in, out, stride, g1) for the fixed blocks; the repeated stage rows keep in == out, stride 1
_STAGES: tuple[tuple[tuple[int, int, int, int], tuple[int, int, int, int] | None, str | None], ...] = (
    ((32, 64, 1, 16), None, None),
    ((64, 128, 2, 32), (128, 128, 1, 64), "a"),
    ((128, 256, 2, 64), (256, 256, 1, 128), "b"),
    ((256, 512, 2, 128), (512, 512, 1, 256), "c"),
    ((512, 1024, 2, 256), (1024, 1024, 1, 512), "d"),
)


@dataclass(frozen=True)
class NetworkConfig:
    a: int
    b: int
    c: int
    d: int
    input_resolution: int = 224
    num_classes: int = 1000
    ablate_igc_to_gc: bool = False

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
        r = self.input_resolution
        if isinstance(r, bool) or not isinstance(r, int) or r < 32 or r % 32:
            raise ShapeError(f"input_resolution must be a positive multiple of 32, got {r!r}")
        nc = self.num_classes
        if isinstance(nc, bool) or not isinstance(nc, int) or nc < 1:
            raise ValueError(f"num_classes must be a positive integer, got {nc!r}")
        if not isinstance(self.ablate_igc_to_gc, bool):
            raise ValueError("ablate_igc_to_gc must be a boolean")


CLCNET_A = NetworkConfig(1, 1, 5, 2)
CLCNET_B = NetworkConfig(1, 1, 7, 3)


@dataclass(frozen=True)
class ClcBlock:
    name: str
    M: int
    N: int
    stride: int
    g1: int
    g2: int
    interlaced: bool = True

    @property
    def L(self) -> int:
        return self.M

    @property
    def first(self) -> KernelSpec:
        if self.interlaced:
            return KernelSpec.igc(self.M, self.L, self.g1, 3, self.stride)
        return KernelSpec.grouped(self.M, self.L, self.g1, 3, self.stride)

    @property
    def second(self) -> KernelSpec:
        return KernelSpec.grouped(self.L, self.N, self.g2, 1)


@dataclass(frozen=True)
class NetworkSpec:
    config: NetworkConfig
    stem: KernelSpec
    blocks: tuple[ClcBlock, ...]

    @property
    def resolution(self) -> int:
        return self.config.input_resolution

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    def layers(self) -> list[LayerRecord]:
        recs: list[LayerRecord] = []
        h = w = self.resolution
        h, w = self.stem.output_hw(h, w)
        recs.append(_conv_record("stem", self.stem, h, w))
        recs.append(_bn_record("stem.bn", STEM_CHANNELS, h, w))
        for blk in self.blocks:
            h, w = blk.first.output_hw(h, w)
            recs.append(_conv_record(f"{blk.name}.igc" if blk.interlaced else f"{blk.name}.gc1", blk.first, h, w))
            recs.append(_bn_record(f"{blk.name}.bn1", blk.L, h, w))
            recs.append(_conv_record(f"{blk.name}.gc", blk.second, h, w))
            recs.append(_bn_record(f"{blk.name}.bn2", blk.N, h, w))
        feat = self.blocks[-1].N
        recs.append(LayerRecord("pool", "avgpool", feat, feat, 1, h, 1, 1, 0, 0))
        nc = self.num_classes
        recs.append(LayerRecord("fc", "fc", feat, nc, 1, 1, 1, 1, feat * nc, feat * nc + nc))
        return recs


@dataclass(frozen=True)
class LayerRecord:
    """One row of a cost report; ``N`` is the layer's output channel count (L for an IGC)."""

    name: str
    kind: str
    M: int
    N: int
    g: int
    stride: int
    out_h: int
    out_w: int
    macs: int
    params: int

    def to_dict(self) -> dict:
        return asdict(self)


def _conv_record(name: str, spec: KernelSpec, h: int, w: int) -> LayerRecord:
    per_loc = spec.macs_per_location()
    return LayerRecord(name, spec.kind.value, spec.in_channels, spec.out_channels, spec.groups,
                       spec.stride, h, w, h * w * per_loc, per_loc)


def _bn_record(name: str, channels: int, h: int, w: int) -> LayerRecord:
    return LayerRecord(name, "bn", channels, channels, 1, 1, h, w, 0, 2 * channels)


def build_clcnet(cfg: NetworkConfig) -> NetworkSpec:
    interlaced = not cfg.ablate_igc_to_gc
    blocks: list[ClcBlock] = []
    for stage, ((m, n, s, g1), repeat, count_name) in enumerate(_STAGES):
        blocks.append(ClcBlock(f"s{stage}.b0", m, n, s, g1, G2, interlaced))
        if repeat is not None:
            rm, rn, rs, rg1 = repeat
            for i in range(getattr(cfg, count_name)):
                blocks.append(ClcBlock(f"s{stage}.b{i + 1}", rm, rn, rs, rg1, G2, interlaced))
    stem = KernelSpec.regular(3, STEM_CHANNELS, 3, stride=2)
    return NetworkSpec(cfg, stem, tuple(blocks))


@dataclass(frozen=True)
class CostReport:
    layers: tuple[LayerRecord, ...]
    total_macs: int
    total_params: int
    macs_by_kind: dict = field(compare=False)
    params_by_kind: dict = field(compare=False)

    @property
    def conv_params(self) -> int:
        return sum(r.params for r in self.layers if r.kind not in ("bn", "fc", "avgpool"))

    @property
    def bn_params(self) -> int:
        return self.params_by_kind.get("bn", 0)

    @property
    def fc_params(self) -> int:
        return self.params_by_kind.get("fc", 0)

    def to_dict(self) -> dict:
        return {
            "layers": [r.to_dict() for r in self.layers],
            "totals": {"macs": self.total_macs, "params": self.total_params},
            "macs_by_kind": dict(self.macs_by_kind),
            "params_by_kind": dict(self.params_by_kind),
            "param_subtotals": {"conv": self.conv_params, "bn": self.bn_params, "fc": self.fc_params},
        }

    def to_text(self) -> str:
        header = ("name", "kind", "M", "N", "g", "stride", "out", "MACs", "params")
        rows = [header]
        for r in self.layers:
            rows.append((r.name, r.kind, str(r.M), str(r.N), str(r.g), str(r.stride),
                         f"{r.out_h}x{r.out_w}", f"{r.macs:,}", f"{r.params:,}"))
        rows.append(("total", "", "", "", "", "", "", f"{self.total_macs:,}", f"{self.total_params:,}"))
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        numeric = {2, 3, 4, 5, 7, 8}
        out = []
        for j, row in enumerate(rows):
            cells = [c.rjust(wd) if i in numeric else c.ljust(wd) for i, (c, wd) in enumerate(zip(row, widths))]
            out.append("  ".join(cells).rstrip())
            if j == 0 or j == len(rows) - 2:
                out.append("-" * len(out[0]))
        out.append(f"MACs {self.total_macs / 1e6:.2f}M, params {self.total_params / 1e6:.3f}M "
                   f"(conv {self.conv_params:,}, bn {self.bn_params:,}, fc {self.fc_params:,})")
        return "\n".join(out)


def _report(spec: NetworkSpec) -> CostReport:
    layers = tuple(spec.layers())
    macs_by_kind: dict[str, int] = defaultdict(int)
    params_by_kind: dict[str, int] = defaultdict(int)
    for r in layers:
        macs_by_kind[r.kind] += r.macs
        params_by_kind[r.kind] += r.params
    return CostReport(layers, sum(r.macs for r in layers), sum(r.params for r in layers),
                      dict(macs_by_kind), dict(params_by_kind))


def count_macs(spec: NetworkSpec) -> CostReport:
    """MACs per layer: out_h * out_w * multiplies per location. BN, ReLU and pooling count zero."""
    return _report(spec)


def count_params(spec: NetworkSpec) -> CostReport:
    """Conv weights (no bias), BN scale+shift, FC weights+bias."""
    return _report(spec)


@dataclass(frozen=True)
class BlockVerdict:
    name: str
    fcrf: bool
    crf_min: int
    crf_max: int
    in_channels: int


@dataclass(frozen=True)
class FcrfReport:
    stem_fcrf: bool
    blocks: tuple[BlockVerdict, ...]

    @property
    def fcrf_count(self) -> int:
        return sum(v.fcrf for v in self.blocks)

    @property
    def all_fcrf(self) -> bool:
        return self.stem_fcrf and self.fcrf_count == len(self.blocks)


def verify_network_fcrf(spec: NetworkSpec, ablate: bool | None = None) -> FcrfReport:
    """Per-block FCRF verdicts; ``ablate=True`` evaluates every block with its IGC replaced by a GC."""
    verdicts = []
    for blk in spec.blocks:
        interlaced = blk.interlaced if ablate is None else not ablate
        cdg = block_cdg(blk.M, blk.L, blk.N, blk.g1, blk.g2, interlaced)
        sizes = crf_sizes(cdg)
        verdicts.append(BlockVerdict(blk.name, has_fcrf(cdg), min(sizes), max(sizes), blk.M))
    return FcrfReport(has_fcrf(cdg_of_kernel(spec.stem)), tuple(verdicts))


@dataclass(frozen=True, eq=False)
class WeightBundle:
    stem: WeightTensor
    stem_bn: BatchNormParams
    blocks: tuple[tuple[WeightTensor, WeightTensor, BatchNormParams, BatchNormParams], ...]
    fc_weight: np.ndarray
    fc_bias: np.ndarray


def init_weights(spec: NetworkSpec, seed: int = 0) -> WeightBundle:
    """Fan-in-scaled uniform conv/FC weights and identity batch norm, from one seeded stream."""
    rng = np.random.default_rng(seed)

    def conv_weights(k: KernelSpec) -> WeightTensor:
        return WeightTensor(fan_in_uniform(rng, k.weight_shape, k.in_per_group * k.area))

    stem = conv_weights(spec.stem)
    blocks = []
    for blk in spec.blocks:
        blocks.append((conv_weights(blk.first), conv_weights(blk.second),
                       BatchNormParams.identity(blk.L), BatchNormParams.identity(blk.N)))
    feat = spec.blocks[-1].N
    fc_w = fan_in_uniform(rng, (spec.num_classes, feat), feat)
    fc_b = fan_in_uniform(rng, (spec.num_classes,), feat)
    return WeightBundle(stem, BatchNormParams.identity(STEM_CHANNELS), tuple(blocks), fc_w, fc_b)


def forward(spec: NetworkSpec, weights: WeightBundle, x: Tensor4D,
            trace: list | None = None) -> Tensor4D:
    """Logits of shape (batch, num_classes, 1, 1).

    If ``trace`` is a list, ``(layer_name, shape)`` is appended after the
    stem, every block, the pool and the FC layer.
    """
    r = spec.resolution
    if x.channels != 3 or x.height != r or x.width != r:
        raise LayerShapeError(0, "input", f"expected (b, 3, {r}, {r}), got {x.shape}")
    if len(weights.blocks) != len(spec.blocks):
        raise LayerShapeError(0, "weights", f"{len(weights.blocks)} block weight sets for {len(spec.blocks)} blocks")

    def note(name, t):
        if trace is not None:
            trace.append((name, t.shape))

    try:
        h = relu(batchnorm_inference(conv2d(x, weights.stem, spec.stem), weights.stem_bn))
    except ShapeError as e:
        raise LayerShapeError(0, "stem", str(e)) from e
    note("stem", h)
    for i, (blk, (w1, w2, bn1, bn2)) in enumerate(zip(spec.blocks, weights.blocks), start=1):
        try:
            h = clc_block_forward(h, BlockSpec(blk.first, blk.second, bn1, bn2), (w1, w2))
        except ShapeError as e:
            raise LayerShapeError(i, blk.name, str(e)) from e
        note(blk.name, h)
    h = global_avg_pool(h)
    note("pool", h)
    idx = len(spec.blocks) + 1
    try:
        h = linear(h, weights.fc_weight, weights.fc_bias)
    except ShapeError as e:
        raise LayerShapeError(idx, "fc", str(e)) from e
    note("fc", h)
    return h


_FIELDS = {f.name for f in fields(NetworkConfig)}
_REQUIRED = {"a", "b", "c", "d"}


def serialize(obj: NetworkConfig | NetworkSpec) -> str:
    cfg = obj.config if isinstance(obj, NetworkSpec) else obj
    return json.dumps(asdict(cfg), indent=2) + "\n"


def parse(text: str) -> NetworkConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"malformed JSON: {e.msg}", position=e.pos) from None
    if not isinstance(doc, dict):
        raise ConfigParseError("config must be a JSON object", position=0)
    for key in doc:
        if key not in _FIELDS:
            raise ConfigParseError("unknown field", field=key)
    for key in sorted(_REQUIRED - doc.keys()):
        raise ConfigParseError("missing required field", field=key)
    for key, value in doc.items():
        if key == "ablate_igc_to_gc":
            if not isinstance(value, bool):
                raise ConfigParseError("expected a boolean", field=key)
        elif isinstance(value, bool) or not isinstance(value, int):
            raise ConfigParseError("expected an integer", field=key)
    try:
        return NetworkConfig(**doc)
    except ValueError as e:
        raise ConfigParseError(str(e)) from None


def with_resolution(spec_or_cfg: NetworkConfig | NetworkSpec, resolution: int) -> NetworkSpec:
    cfg = spec_or_cfg.config if isinstance(spec_or_cfg, NetworkSpec) else spec_or_cfg
    return build_clcnet(replace(cfg, input_resolution=resolution))
