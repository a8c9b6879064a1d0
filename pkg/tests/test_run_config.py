"""
Tests du format de configuration "clé = valeur"
"""
import pytest

from app.exceptions import ConfigParseError
from app.schemas import RunConfig
from app.services.run_config import config_from_mapping, format_config, parse_config, split_lines


def test_parse_simulation_config():
    config = parse_config("twice_S = 80\nell = 16\nbeta = 8\nn = 64\nseed = 1\n")
    assert config.command == "simulate"
    assert (config.twice_S, config.ell, config.beta, config.n, config.seed) == (80, 16, 8, 64, 1)
    assert config.model_spin().S == 40


def test_parse_typed_values():
    config = parse_config(
        "command = contours\n"
        "pairs = 0:1, -1:2\n"
        "surround_sites = 0,1\n"
        "omega_alpha = yes\n"
        "S_grid = 8:9:0.5\n"
        "beta_q = none\n"
        "formats = csv\n"
    )
    assert config.command == "contours"
    assert config.pairs == [(0, 1), (-1, 2)]
    assert config.surround_sites == [0, 1]
    assert config.omega_alpha is True
    assert config.S_grid == [8.0, 8.5, 9.0]
    assert config.beta_q is None
    assert config.formats == ["csv"]


def test_zero_beta_is_rejected():
    with pytest.raises(ConfigParseError) as exc:
        parse_config("beta = 0\n")
    assert len(exc.value.errors) == 1
    assert "beta" in exc.value.errors[0]


def test_all_errors_are_collected():
    with pytest.raises(ConfigParseError) as exc:
        parse_config("beta = 0\nell = x\nfoo = 1\nsans egal\n")
    assert len(exc.value.errors) == 4


def test_duplicate_key():
    raw, errors = split_lines("n = 4\nn = 8\n")
    assert raw == {"n": "4"}
    assert len(errors) == 1
    assert "répétée" in errors[0]


def test_schema_errors_are_reported():
    with pytest.raises(ConfigParseError) as exc:
        parse_config("formats = xml\np_insert = 1.5\n")
    assert len(exc.value.errors) >= 2


def test_comments_and_provenance_lines():
    raw, errors = split_lines("# commentaire\n#config twice_S = 3\nell = 2  # demi-longueur\n")
    assert errors == []
    assert raw == {"twice_S": "3", "ell": "2"}


def test_round_trip():
    config = RunConfig(
        command="simulate", twice_S=3, ell=2, pairs=[(0, 1)], surround_sites=[0],
        S_grid=[8.0, 8.5], beta_q=2.5, full=True, formats=["json"], output_dir="sorties",
    )
    assert parse_config(format_config(config)) == config


def test_config_from_mapping_accepts_typed_values():
    config = config_from_mapping({"twice_S": 2, "n": "8", "command": "ed"})
    assert config.twice_S == 2
    assert config.n == 8
    with pytest.raises(ConfigParseError):
        config_from_mapping({"n_chains": 0})
