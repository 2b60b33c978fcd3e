import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldrift.config import (
    ConfigError,
    ExperimentConfig,
    FieldSpec,
    SimBlock,
    parse_config,
    parse_document,
    serialize_config,
    serialize_document,
)
from ldrift.verify.experiments import REGISTRY, default_config

SINGLE = """\
version: 1
kind: exit_tail
seed: 7
sim: {dt: 0.001, n_paths: 2000, start_point: [0, 0]}
analysis: {radius: 1.0}
"""


def test_parse_single():
    cfg = parse_config(SINGLE)
    assert cfg.kind == "exit_tail" and cfg.seed == 7
    assert cfg.sim.n_paths == 2000 and cfg.sim.start_point == (0.0, 0.0)
    assert cfg.analysis == {"radius": 1.0}
    assert cfg.drift == FieldSpec("zero")


@pytest.mark.parametrize("kind", sorted(REGISTRY))
def test_default_configs_round_trip(kind):
    cfg = default_config(kind)
    assert parse_config(serialize_config(cfg)) == cfg


def test_fixture_config_round_trip():
    cfg = ExperimentConfig(
        kind="doubling",
        seed=3,
        drift=FieldSpec("radial_ld_member", {"c": 0.5, "beta": 2.0}),
        diffusion=FieldSpec("rotated_diagonal", {"delta": 0.4, "omega": 1.5}),
        sim=SimBlock(dt=5e-4, horizon=4.0, n_paths=123, start_point=(0.0, 0.1, 0.0), truncation_level=30.0),
        analysis={"n_placements": 4, "radius_range": [0.1, 0.2]},
        negative_control=True,
        save_green=True,
        output_dir="out",
    )
    assert parse_config(serialize_config(cfg)) == cfg


@given(
    st.sampled_from(sorted(REGISTRY)),
    st.integers(0, 2**63),
    st.floats(1e-5, 0.1),
    st.integers(1, 10**6),
    st.lists(st.floats(-1, 1), min_size=2, max_size=3),
)
def test_round_trip_property(kind, seed, dt, n, start):
    cfg = ExperimentConfig(kind=kind, seed=seed, sim=SimBlock(dt=dt, horizon=1.0, n_paths=n, start_point=tuple(start)))
    assert parse_config(serialize_config(cfg)) == cfg


def test_suite_round_trip_and_order():
    cfgs = [default_config("tube"), default_config("exit_floor", seed=5)]
    cfgs = [dataclasses.replace(c, output_dir="res") for c in cfgs]
    back = parse_document(serialize_document(cfgs, output_dir="res"))
    assert back == cfgs


@pytest.mark.parametrize(
    "text,field,line",
    [
        (SINGLE + "colour: red\n", "colour", 6),
        (SINGLE.replace("seed: 7", "sed: 7"), "sed", 3),
        (SINGLE.replace("n_paths: 2000", "npaths: 2000"), "sim.npaths", 4),
        (SINGLE.replace("radius: 1.0", "radios: 1.0"), "analysis.radios", 5),
        (SINGLE.replace("kind: exit_tail", "kind: exit_tale"), "kind", 2),
        (SINGLE.replace("version: 1", "version: 2"), "version", 1),
        (SINGLE.replace("dt: 0.001", "dt: -1"), "sim.dt", 4),
        (SINGLE.replace("seed: 7", "seed: -3"), "seed", 3),
    ],
)
def test_errors_name_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert info.value.line == line
    assert field in str(info.value) and f"line {line}" in str(info.value)


def test_suite_errors():
    with pytest.raises(ConfigError) as info:
        parse_document("version: 1\nexperiments:\n  - kind: tube\n  - kind: tube\n    bogus: 1\n")
    assert info.value.field == "experiments[1].bogus" and info.value.line == 5
    with pytest.raises(ConfigError):
        parse_document("version: 1\nexperiments: []\n")
    with pytest.raises(ConfigError):
        parse_config("version: 1\nexperiments:\n  - kind: tube\n  - kind: tube\n")


def test_bad_field_parameters():
    with pytest.raises(ConfigError) as info:
        parse_config(SINGLE + "drift: {kind: radial_ld_member, params: {beta: 0.1}}\n")
    assert info.value.field == "drift"
    with pytest.raises(ConfigError):
        parse_config("version: 1\n")
    with pytest.raises(ConfigError):
        parse_config("version: 1\nkind: [unclosed\n")
    with pytest.raises(ConfigError):
        parse_config("- 1\n- 2\n")


def test_build_fields_and_sim_config():
    cfg = parse_config(SINGLE + "drift: {kind: constant, params: {vector: [1, 0]}}\n")
    drift, diffusion = cfg.build_fields()
    assert drift.dim == 2 and diffusion.dim == 2
    sim = cfg.sim_config(n_paths=5)
    assert sim.n_paths == 5 and sim.master_seed == 7 and sim.dt == 0.001
