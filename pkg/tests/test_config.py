import configparser

import pytest

from independence_patterns.config import Config
from independence_patterns.errors import InputError


def write_ini(path, sections):
    parser = configparser.ConfigParser()
    parser.read_dict(sections)
    with open(path, "w") as f:
        parser.write(f)


class TestDefaults:
    def test_values(self, config):
        assert config.getint("Sampler", "Chains") == 4
        assert config.getint("Sampler", "Steps") == 100000
        assert config.getfloat("Sampler", "MaxTemperature") == 32.0
        assert config.get("Sampler", "ShcMode") == "as-paper"
        assert config.getboolean("Models", "KnownMean") is False
        assert config.getint("Simulation", "Replicates") == 50
        assert config.get("Output", "Format") == "csv"

    def test_zero_workers_means_all_cores(self, config):
        assert config.getint("System", "Workers") == 0
        assert config.workers() >= 1

    def test_keys_are_case_insensitive(self, config):
        assert config.get("Sampler", "shcmode") == config.get("Sampler", "ShcMode")


class TestOverlays:
    def test_ini_file(self, tmp_path, monkeypatch):
        monkeypatch.delenv("INDEP_SEED", raising=False)
        path = tmp_path / "config.ini"
        write_ini(path, {"Sampler": {"Chains": "8", "Seed": "5"}, "Output": {"Format": "json"}})
        config = Config(str(path))
        assert config.getint("Sampler", "Chains") == 8
        assert config.getint("Sampler", "Seed") == 5
        assert config.get("Output", "Format") == "json"
        assert config.getint("Sampler", "Steps") == 100000

    def test_environment_wins_over_file(self, tmp_path, monkeypatch):
        path = tmp_path / "config.ini"
        write_ini(path, {"Sampler": {"Seed": "5"}})
        monkeypatch.setenv("INDEP_SEED", "99")
        monkeypatch.setenv("INDEP_OUT_DIR", str(tmp_path / "out"))
        config = Config(str(path))
        assert config.getint("Sampler", "Seed") == 99
        assert config.get("Output", "OutDir") == str(tmp_path / "out")

    def test_save_round_trip(self, config):
        config.set("Sampler", "Chains", 6)
        config.save()
        assert Config(config.config_file).getint("Sampler", "Chains") == 6


class TestValidation:
    @pytest.mark.parametrize("section, key, value", [
        ("System", "Workers", "-1"),
        ("Exact", "MaxDimension", "13"),
        ("Sampler", "Chains", "0"),
        ("Sampler", "InitialDraws", "2"),
        ("Sampler", "Steps", "1"),
        ("Sampler", "MaxTemperature", "1"),
        ("Sampler", "Alpha2", "0.6"),
        ("Sampler", "BurnInFraction", "0"),
        ("Sampler", "ShcMode", "greedy"),
        ("Models", "DirichletRule", "cells"),
        ("Output", "Format", "xml"),
    ])
    def test_out_of_range(self, tmp_path, monkeypatch, section, key, value):
        for var in ("INDEP_SEED", "INDEP_WORKERS", "INDEP_OUT_DIR", "INDEP_LOG_FILE"):
            monkeypatch.delenv(var, raising=False)
        path = tmp_path / "config.ini"
        write_ini(path, {section: {key: value}})
        with pytest.raises(InputError):
            Config(str(path))

    @pytest.mark.parametrize("mode", ["as-paper", "metropolized", "softmax"])
    def test_shc_modes_accepted(self, tmp_path, monkeypatch, mode):
        monkeypatch.delenv("INDEP_SEED", raising=False)
        path = tmp_path / "config.ini"
        write_ini(path, {"Sampler": {"ShcMode": mode}})
        assert Config(str(path)).get("Sampler", "ShcMode") == mode

    def test_getters(self, config):
        with pytest.raises(KeyError):
            config.get("Sampler", "Missing")
        with pytest.raises(KeyError):
            config.get("Nowhere", "Chains")
        config.set("Sampler", "Chains", "four")
        with pytest.raises(ValueError):
            config.getint("Sampler", "Chains")
        config.set("Models", "KnownMean", "maybe")
        with pytest.raises(ValueError):
            config.getboolean("Models", "KnownMean")
