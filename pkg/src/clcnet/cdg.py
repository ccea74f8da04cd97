"""Channel dependency graphs (CDGs): which input channels each output channel reads."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .conv import KernelKind, KernelSpec
from .errors import ShapeError
from .tensor import interlace_permutation


@dataclass(frozen=True)
class ChannelDependencyGraph:
    in_channels: int
    out_channels: int
    deps: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        deps = tuple(frozenset(d) for d in self.deps)
        object.__setattr__(self, "deps", deps)
        if len(deps) != self.out_channels:
            raise ShapeError(f"{len(deps)} dependency sets for {self.out_channels} output channels")
        checked: set[int] = set()
        for n, d in enumerate(deps):
            if id(d) in checked:
                continue
            checked.add(id(d))
            if not d:
                raise ShapeError(f"output channel {n} has no dependencies")
            if min(d) < 0 or max(d) >= self.in_channels:
                raise ShapeError(f"output channel {n} depends on a channel outside [0, {self.in_channels})")

    @classmethod
    def identity(cls, channels: int) -> ChannelDependencyGraph:
        return cls(channels, channels, tuple(frozenset((n,)) for n in range(channels)))

    def sorted_deps(self) -> list[list[int]]:
        return [sorted(d) for d in self.deps]

    @property
    def edge_count(self) -> int:
        return sum(len(d) for d in self.deps)

    def __rshift__(self, other: ChannelDependencyGraph) -> ChannelDependencyGraph:
        return compose(self, other)


def cdg_of_kernel(spec: KernelSpec) -> ChannelDependencyGraph:
    m, n = spec.in_channels, spec.out_channels
    if spec.kind is KernelKind.REGULAR:
        everything = frozenset(range(m))
        return ChannelDependencyGraph(m, n, (everything,) * n)
    ipg, opg = spec.in_per_group, spec.out_per_group
    blocks = [frozenset(range(grp * ipg, (grp + 1) * ipg)) for grp in range(spec.groups)]
    grouped = [blocks[k // opg] for k in range(n)]
    if spec.kind is KernelKind.INTERLACED_GROUPED:
        perm = interlace_permutation(n, spec.groups)
        grouped = [grouped[p] for p in perm]
    return ChannelDependencyGraph(m, n, tuple(grouped))


def compose(first: ChannelDependencyGraph, second: ChannelDependencyGraph) -> ChannelDependencyGraph:
    """CDG of ``second`` applied after ``first``."""
    if first.out_channels != second.in_channels:
        raise ShapeError(
            f"cannot stack: first kernel yields {first.out_channels} channels, "
            f"second expects {second.in_channels}"
        )
    # kernel CDGs reuse one set object per group, so most unions repeat
    cache: dict[frozenset[int], frozenset[int]] = {}
    deps = []
    for d in second.deps:
        reach = cache.get(d)
        if reach is None:
            reach = cache[d] = frozenset().union(*(first.deps[m] for m in d))
        deps.append(reach)
    return ChannelDependencyGraph(first.in_channels, second.out_channels, deps)


def compose_all(graphs: Iterable[ChannelDependencyGraph]) -> ChannelDependencyGraph:
    it = iter(graphs)
    result = next(it)
    for g in it:
        result = compose(result, g)
    return result


def crf_sizes(cdg: ChannelDependencyGraph) -> list[int]:
    return [len(d) for d in cdg.deps]


def has_fcrf(cdg: ChannelDependencyGraph) -> bool:
    return all(len(d) == cdg.in_channels for d in cdg.deps)


def block_cdg(m: int, l: int, n: int, g1: int, g2: int, interlaced: bool = True) -> ChannelDependencyGraph:
    """CDG of an IGC(g1) -> GC(g2) block; ``interlaced=False`` swaps the IGC for a plain GC."""
    first = KernelSpec.igc(m, l, g1) if interlaced else KernelSpec.grouped(m, l, g1, k=3)
    return compose(cdg_of_kernel(first), cdg_of_kernel(KernelSpec.grouped(l, n, g2)))


def export_dot(cdg: ChannelDependencyGraph, labels: Sequence[str] | dict | None = None,
               name: str = "cdg") -> str:
    """DOT digraph with edges from each output node to the inputs it depends on.

    ``labels`` may be a pair ``(input_prefix, output_prefix)`` or a mapping
    with ``"in"``/``"out"`` keys; defaults are ``i`` and ``o``.
    """
    in_prefix, out_prefix = "i", "o"
    if isinstance(labels, dict):
        in_prefix, out_prefix = labels.get("in", in_prefix), labels.get("out", out_prefix)
    elif labels:
        in_prefix, out_prefix = labels
    lines = [f"digraph {name} {{", "  rankdir=TB;"]
    lines.append("  { rank=same; " + " ".join(f"{in_prefix}{m};" for m in range(cdg.in_channels)) + " }")
    lines.append("  { rank=same; " + " ".join(f"{out_prefix}{n};" for n in range(cdg.out_channels)) + " }")
    for n, d in enumerate(cdg.deps):
        for m in sorted(d):
            lines.append(f"  {out_prefix}{n} -> {in_prefix}{m};")
    lines.append("}")
    return "\n".join(lines) + "\n"
