import json

import pytest

from config import INT_SETTINGS, ConfigManager
from models.errors import CapExceededError
from utils.analytics import RunAnalytics
from utils.helpers import format_float, format_label, make_sampler, parse_angle
from utils.limits import carrier_limit, check_carrier


class TestConfigManager:
    def test_defaults(self, monkeypatch):
        for name in INT_SETTINGS:
            monkeypatch.delenv(f"COARSEMED_{name}", raising=False)
        monkeypatch.delenv("COARSEMED_DEFAULT_SEED", raising=False)
        config = ConfigManager().get_config()
        assert config["TABLE_CAP"] == 4096
        assert config["MATERIALIZE_CAP"] == 128
        assert config["LIPSCHITZ_EXHAUSTIVE_CAP"] == 32
        assert config["TOLERANCE"] == 1e-9
        assert config["DEFAULT_SEED"] is None

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("COARSEMED_EXHAUSTIVE_CAP", "10")
        monkeypatch.setenv("COARSEMED_DEFAULT_SEED", "42")
        monkeypatch.setenv("COARSEMED_LOG_LEVEL", "debug")
        monkeypatch.setenv("COARSEMED_LOG_TO_FILE", "no")
        config = ConfigManager().get_config()
        assert config["EXHAUSTIVE_CAP"] == 10
        assert config["DEFAULT_SEED"] == 42
        assert config["LOG_LEVEL"] == "DEBUG"
        assert config["LOG_TO_FILE"] is False

    @pytest.mark.parametrize("name,value", [
        ("COARSEMED_TABLE_CAP", "many"),
        ("COARSEMED_TABLE_CAP", "0"),
        ("COARSEMED_TOLERANCE", "-1e-9"),
        ("COARSEMED_LOG_LEVEL", "LOUD"),
        ("COARSEMED_DEFAULT_SEED", "x"),
    ])
    def test_rejects(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValueError):
            ConfigManager()

    def test_failed_reload_keeps_the_old_values(self, monkeypatch):
        manager = ConfigManager()
        before = dict(manager.get_config())
        monkeypatch.setenv("COARSEMED_TABLE_CAP", "-3")
        assert manager.reload() is False
        assert manager.get_config() == before


class TestLimits:
    def test_unknown_command_has_no_cap(self):
        assert carrier_limit("gap") is None
        check_carrier("gap", 10 ** 6)

    def test_exhaustive_cap(self, caps):
        caps(EXHAUSTIVE_CAP=5)
        check_carrier("invariance", 5, "exhaustive")
        with pytest.raises(CapExceededError):
            check_carrier("invariance", 6, "exhaustive")

    def test_sampling_commands_skip_the_cap(self, caps):
        caps(EXHAUSTIVE_CAP=5)
        check_carrier("invariance", 600, "sampled")
        check_carrier("hypmedian", 600, "auto")

    def test_other_commands_are_always_capped(self, caps):
        caps(MATERIALIZE_CAP=5)
        for mode in ("auto", "sampled", "exhaustive"):
            with pytest.raises(CapExceededError):
                check_carrier("cat0", 6, mode)


class TestHelpers:
    @pytest.mark.parametrize("text,value", [
        ("pi/4", 0.7853981633974483),
        ("3pi/2", 4.71238898038469),
        ("2*pi", 6.283185307179586),
        ("-pi", -3.141592653589793),
        ("0.5", 0.5),
    ])
    def test_parse_angle(self, text, value):
        assert parse_angle(text) == pytest.approx(value)

    @pytest.mark.parametrize("text", ["", "quarter", None])
    def test_parse_angle_rejects(self, text):
        with pytest.raises(ValueError):
            parse_angle(text)

    def test_labels(self):
        assert format_label(((0, 1), "a")) == "((0,1),a)"
        assert format_label(0.5) == "0.500000000"
        assert format_float(2) == "2.000000000"

    def test_sampler_streams(self):
        first = make_sampler(7, 1).integers(0, 1000, size=8)
        assert list(first) == list(make_sampler(7, 1).integers(0, 1000, size=8))
        assert list(first) != list(make_sampler(7, 2).integers(0, 1000, size=8))


class TestRunAnalytics:
    def test_stages_and_counts(self):
        analytics = RunAnalytics()
        analytics.record_command("walls")
        with analytics.stage("walls"):
            pass
        analytics.record_checked("axioms", 27)
        analytics.record_checked("axioms", 3)
        analytics.record_error("InputError", {"message": "bad"})
        stats = json.loads(analytics.export_to_json())
        assert stats["command"] == "walls"
        assert stats["stages"]["walls"]["count"] == 1
        assert stats["items_checked"] == {"axioms": 30}
        assert stats["error_counts"] == {"InputError": 1}

    def test_reset(self):
        analytics = RunAnalytics()
        analytics.record_artifact()
        analytics.reset()
        assert analytics.get_statistics()["artifacts_written"] == 0
