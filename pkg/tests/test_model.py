import json
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clcnet.errors import ConfigParseError, LayerShapeError, ShapeError
from clcnet.model import (
    CLCNET_A,
    CLCNET_B,
    NetworkConfig,
    build_clcnet,
    count_macs,
    count_params,
    forward,
    init_weights,
    parse,
    serialize,
    verify_network_fcrf,
)
from clcnet.optimize import CostQuery, fixed_g2_policy
from clcnet.tensor import Tensor4D
from oracles import CLCNET_A_LAYERS


def test_block_counts():
    assert len(build_clcnet(CLCNET_A).blocks) == 14
    assert len(build_clcnet(CLCNET_B).blocks) == 17
    assert len(build_clcnet(NetworkConfig(0, 0, 0, 0)).blocks) == 5


def test_block_count_formula_random():
    rng = random.Random(3)
    for _ in range(20):
        a, b, c, d = (rng.randint(0, 6) for _ in range(4))
        assert len(build_clcnet(NetworkConfig(a, b, c, d)).blocks) == 5 + a + b + c + d


def test_table2_rows():
    spec = build_clcnet(CLCNET_A)
    rows = [(blk.M, blk.N, blk.stride, blk.g1, blk.g2) for blk in spec.blocks]
    assert rows == [
        (32, 64, 1, 16, 2),
        (64, 128, 2, 32, 2),
        (128, 128, 1, 64, 2),
        (128, 256, 2, 64, 2),
        (256, 256, 1, 128, 2),
        (256, 512, 2, 128, 2),
        *[(512, 512, 1, 256, 2)] * 5,
        (512, 1024, 2, 256, 2),
        *[(1024, 1024, 1, 512, 2)] * 2,
    ]
    assert spec.stem.in_channels == 3 and spec.stem.out_channels == 32 and spec.stem.stride == 2


def test_channels_chain_and_rule():
    spec = build_clcnet(NetworkConfig(2, 3, 1, 4))
    prev = spec.stem.out_channels
    for blk in spec.blocks:
        assert blk.M == prev and blk.L == blk.M
        assert blk.g1 * blk.g2 <= blk.L
        prev = blk.N
    assert prev == 1024


def test_group_params_follow_fixed_g2_policy():
    for blk in build_clcnet(CLCNET_B).blocks:
        assert fixed_g2_policy(CostQuery(blk.M, blk.L, blk.N, 9), 2).g1 == blk.g1


def test_stem_and_first_gc_macs():
    layers = {r.name: r for r in count_macs(build_clcnet(CLCNET_A)).layers}
    assert layers["stem"].macs == 10_838_016
    assert layers["stem"].params == 864
    assert layers["s0.b0.gc"].macs == 12_845_056


def test_clcnet_a_matches_hand_oracle():
    rep = count_params(build_clcnet(CLCNET_A))
    assert [(r.name, r.macs, r.params) for r in rep.layers] == CLCNET_A_LAYERS
    assert rep.total_macs == sum(m for _, m, _ in CLCNET_A_LAYERS)
    assert rep.total_params == sum(p for _, _, p in CLCNET_A_LAYERS)


def test_report_totals_are_sums():
    rep = count_macs(build_clcnet(CLCNET_B))
    assert rep.total_macs == sum(rep.macs_by_kind.values())
    assert rep.total_params == sum(rep.params_by_kind.values())
    assert rep.total_params == rep.conv_params + rep.bn_params + rep.fc_params


def test_report_json_records():
    doc = json.loads(json.dumps(count_macs(build_clcnet(CLCNET_A)).to_dict()))
    keys = {"name", "kind", "M", "N", "g", "stride", "out_h", "out_w", "macs", "params"}
    assert all(set(r) == keys for r in doc["layers"])
    assert doc["totals"]["macs"] == sum(r["macs"] for r in doc["layers"])


def test_report_text_has_totals():
    text = count_macs(build_clcnet(CLCNET_A)).to_text()
    assert "342,973,440" in text
    assert text.splitlines()[0].split()[:2] == ["name", "kind"]


@pytest.mark.parametrize("cfg", [CLCNET_A, CLCNET_B, NetworkConfig(0, 0, 0, 0, 64)])
def test_resolution_doubling(cfg):
    small = count_macs(build_clcnet(cfg))
    big = count_macs(build_clcnet(replace(cfg, input_resolution=2 * cfg.input_resolution)))
    for s, b in zip(small.layers, big.layers):
        assert b.params == s.params
        if s.kind not in ("bn", "fc", "avgpool"):
            assert b.macs == 4 * s.macs


def test_ablation_keeps_costs():
    a = count_macs(build_clcnet(CLCNET_A))
    ap = count_macs(build_clcnet(replace(CLCNET_A, ablate_igc_to_gc=True)))
    assert (a.total_macs, a.total_params) == (ap.total_macs, ap.total_params)


def test_fcrf_report():
    spec = build_clcnet(CLCNET_A)
    rep = verify_network_fcrf(spec)
    assert rep.fcrf_count == 14 and rep.all_fcrf
    assert verify_network_fcrf(spec, ablate=True).fcrf_count == 0
    built_ablated = build_clcnet(replace(CLCNET_A, ablate_igc_to_gc=True))
    assert verify_network_fcrf(built_ablated).fcrf_count == 0
    assert rep.stem_fcrf


def test_forward_small_resolution():
    spec = build_clcnet(replace(CLCNET_A, input_resolution=64))
    trace = []
    x = Tensor4D(np.random.default_rng(0).standard_normal((1, 3, 64, 64)))
    out = forward(spec, init_weights(spec, 7), x, trace)
    assert out.shape == (1, 1000, 1, 1)
    shapes = dict(trace)
    assert shapes["stem"] == (1, 32, 32, 32)
    assert shapes["s4.b2"] == (1, 1024, 2, 2)
    assert np.all(np.isfinite(out.data))


def test_forward_deterministic():
    spec = build_clcnet(NetworkConfig(0, 0, 0, 0, 32, 10))
    x = Tensor4D(np.random.default_rng(1).standard_normal((2, 3, 32, 32)))
    a = forward(spec, init_weights(spec, 5), x)
    b = forward(spec, init_weights(spec, 5), x)
    c = forward(spec, init_weights(spec, 6), x)
    assert a == b
    assert a != c
    assert a.shape == (2, 10, 1, 1)


def test_forward_rejects_wrong_resolution():
    spec = build_clcnet(NetworkConfig(0, 0, 0, 0, 64))
    with pytest.raises(LayerShapeError) as info:
        forward(spec, init_weights(spec), Tensor4D(np.zeros((1, 3, 32, 32))))
    assert info.value.layer_index == 0


def test_forward_reports_layer_of_bad_weights():
    spec = build_clcnet(NetworkConfig(0, 0, 0, 0, 32))
    w = init_weights(spec)
    other = init_weights(build_clcnet(NetworkConfig(1, 0, 0, 0, 32)))
    broken = replace(w, blocks=(w.blocks[0], other.blocks[2], *w.blocks[2:]))
    with pytest.raises(LayerShapeError) as info:
        forward(spec, broken, Tensor4D(np.zeros((1, 3, 32, 32))))
    assert info.value.layer_index == 2


@pytest.mark.parametrize("r", [0, 100, 16, 48])
def test_bad_resolution(r):
    with pytest.raises(ShapeError):
        NetworkConfig(1, 1, 1, 1, r)


@pytest.mark.parametrize("cfg", [CLCNET_A, NetworkConfig(0, 0, 0, 0)])
def test_serialize_round_trip(cfg):
    assert parse(serialize(cfg)) == cfg
    assert parse(serialize(build_clcnet(cfg))) == cfg


configs = st.builds(
    NetworkConfig,
    st.integers(0, 20), st.integers(0, 20), st.integers(0, 20), st.integers(0, 20),
    st.integers(1, 16).map(lambda k: 32 * k), st.integers(1, 5000), st.booleans(),
)


@given(configs)
def test_round_trip_property(cfg):
    assert parse(serialize(cfg)) == cfg


def test_parse_defaults():
    assert parse('{"a": 1, "b": 1, "c": 5, "d": 2}') == CLCNET_A


def test_truncated_document():
    text = serialize(CLCNET_A)
    with pytest.raises(ConfigParseError) as info:
        parse(text[: len(text) // 2])
    assert info.value.position is not None


@pytest.mark.parametrize("text,field", [
    ('{"a": 1, "b": 1, "c": 5, "d": 2, "e": 3}', "e"),
    ('{"a": 1, "b": 1, "c": 5}', "d"),
    ('{"a": 1.5, "b": 1, "c": 5, "d": 2}', "a"),
    ('{"a": true, "b": 1, "c": 5, "d": 2}', "a"),
    ('{"a": 1, "b": 1, "c": 5, "d": 2, "ablate_igc_to_gc": 1}', "ablate_igc_to_gc"),
])
def test_schema_errors(text, field):
    with pytest.raises(ConfigParseError) as info:
        parse(text)
    assert info.value.field == field


@pytest.mark.parametrize("text", ["[]", "", '{"a": -1, "b": 0, "c": 0, "d": 0}',
                                  '{"a": 0, "b": 0, "c": 0, "d": 0, "input_resolution": 100}'])
def test_invalid_documents(text):
    with pytest.raises(ConfigParseError):
        parse(text)
