import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from kinschauder.config import (SCHEMA, ConfigError, RunConfig, load_config, parse_config,
                                serialize_config)


def test_empty_text_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert (cfg.d, cfg.gamma, cfg.density) == (3, -1.0, "maxwellian")
    assert cfg.rho0 == 6.0 and cfg.n_coarse == 7 and cfg.pair_budget == 1_000_000


def test_gamma_out_of_range_names_key():
    with pytest.raises(ConfigError) as err:
        parse_config("[run]\ngamma = 0.5\n")
    assert err.value.key == "run.gamma"


@pytest.mark.parametrize("text, key", [
    ("[run]\nd = 4\n", "run.d"),
    ("[run]\nalpha = 1.0\n", "run.alpha"),
    ("[density]\nname = plasma\n", "density.name"),
    ("[density]\nname = grid\n", "density.grid_file"),
    ("[density]\nenvelope = 1.0\n", "density.envelope"),
    ("[quadrature]\nn_radial = 1\n", "quadrature.n_radial"),
    ("[gamma]\npoint = 1, 0\n", "gamma.point"),
    ("[schauder]\nfamily = cubic\n", "schauder.family"),
    ("[bootstrap]\nstage = 2\n", "bootstrap.stage"),
    ("[output]\nformats = xml\n", "output.formats"),
    ("[run]\nbogus = 1\n", "run.bogus"),
    ("[nowhere]\nx = 1\n", "nowhere"),
    ("[run]\nd = three\n", "run.d"),
])
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as err:
        parse_config("d = 3\n")
    assert err.value.line == 1
    with pytest.raises(ConfigError) as err:
        parse_config("[run]\nd = 1\nd = 2\n")
    assert err.value.line == 3


def test_values_are_converted():
    cfg = parse_config("[run]\nd = 1\nbeta = 0.25\n[gamma]\npoint = 0.5, 0.1, -0.2\n"
                       "[output]\nstrict = yes\nformats = csv\n")
    assert cfg.d == 1 and cfg.beta == 0.25
    assert cfg.point == (0.5, 0.1, -0.2)
    assert cfg.strict is True and cfg.formats == ("csv",)


def test_round_trip_defaults():
    cfg = RunConfig()
    assert parse_config(serialize_config(cfg)) == cfg


@given(d=st.integers(1, 3), g=st.floats(0.01, 1.0), alpha=st.floats(0.05, 0.95),
       seed=st.integers(0, 2 ** 31), mu=st.floats(0.1, 10.0),
       speeds=st.lists(st.floats(0.5, 20.0), min_size=2, max_size=6))
@settings(max_examples=60, deadline=None)
def test_round_trip(d, g, alpha, seed, mu, speeds):
    cfg = dataclasses.replace(RunConfig(), d=d, gamma=-g * d, alpha=alpha, seed=seed, mu=mu,
                              speeds=tuple(speeds))
    assert parse_config(serialize_config(cfg)) == cfg


def test_every_schema_key_is_serialized():
    text = serialize_config(RunConfig())
    for sec, key in SCHEMA:
        assert f"{key} = " in text


def test_load_config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[run]\nseed = 7\n")
    assert load_config(p).seed == 7
