# -*- coding: utf-8 -*-

import pytest

from dapgkit.dapg import DapgConfig
from dapgkit.data_abstractions import format_value, section_lines, build_section, TrajectoryManifest
from dapgkit.envs import EnvSpec, Distractor, ObservationMode
from dapgkit.exceptions import ConfigError, SerializationError
from dapgkit.npg import NpgConfig


class TestFormatValue(object):
    def test_scalars(self):
        assert format_value(True) == "true"
        assert format_value(100) == "100"
        assert format_value(0.05) == "0.05"
        assert format_value(1e-10) == "1e-10"
        assert format_value("point_reacher") == '"point_reacher"'

    def test_enum(self):
        assert format_value(ObservationMode.Pixels) == "pixels"

    def test_sequences(self):
        assert format_value((256, 256)) == "256, 256"
        assert format_value((Distractor.BrightnessShift, )) == "brightness_shift"
        assert format_value(tuple()) == "()"

    def test_escaping(self):
        assert format_value('a"b') == '"a\\"b"'

    def test_unsupported(self):
        with pytest.raises(TypeError):
            format_value(object())


class TestSectionLines(object):
    def test_npg(self):
        assert section_lines("npg", NpgConfig()) == [
            "npg.step_size_delta = 0.05",
            "npg.cg_iterations = 100",
            "npg.cg_residual_tol = 1e-10",
            "npg.fisher_damping = 0.0001",
        ]

    def test_nested(self):
        lines = section_lines("env", EnvSpec())
        assert "env.distractors.modes = ()" in lines
        assert lines[-1] == "env.seed = 0"


class TestBuildSection(object):
    def test_defaults_and_consumption(self):
        entries = {"npg.step_size_delta": (0.1, 3), "dapg.lam0": (0.5, 4)}
        cfg = build_section(NpgConfig, "npg", entries)
        assert cfg.step_size_delta == 0.1
        assert cfg.cg_iterations == 100
        assert entries == {"dapg.lam0": (0.5, 4)}

    def test_nested(self):
        entries = {"env.distractors.modes": ("clutter_blob", 2), "env.horizon": (50, 3)}
        spec = build_section(EnvSpec, "env", entries)
        assert spec.horizon == 50
        assert spec.distractors.modes == (Distractor.ClutterBlob, )
        assert entries == dict()

    def test_converter_error_names_field(self):
        with pytest.raises(ConfigError) as e:
            build_section(DapgConfig, "dapg", {"dapg.iterations": ("many", 7)})
        assert e.value.field == "dapg.iterations"
        assert "line 7" in str(e.value)

    def test_validator_error_names_field(self):
        with pytest.raises(ConfigError) as e:
            build_section(NpgConfig, "npg", {"npg.step_size_delta": (-1.0, 2)})
        assert e.value.field == "npg.step_size_delta"

    def test_unknown_environment(self):
        with pytest.raises(ConfigError) as e:
            build_section(EnvSpec, "env", {"env.id": ("half_cheetah", 1)})
        assert e.value.field == "env.id"


class TestTrajectoryManifest(object):
    def test_json_round_trip(self, tmpdir):
        manifest = TrajectoryManifest(["trajectory_0000.csv"], 6, 2, "scripted_expert:point_reacher", [[0.0] * 6])
        path = str(tmpdir.join("manifest.json"))
        manifest.to_json(path)
        loaded = TrajectoryManifest.from_json(path)
        assert loaded.files == ("trajectory_0000.csv", )
        assert (loaded.observation_dim, loaded.action_dim) == (6, 2)
        assert loaded.source_tag == "scripted_expert:point_reacher"

    def test_terminal_count(self):
        with pytest.raises(SerializationError):
            TrajectoryManifest(["a.csv", "b.csv"], 1, 1, "", [[0.0]])

    def test_version_mismatch(self, tmpdir):
        path = tmpdir.join("manifest.json")
        path.write('{"version": "0.1.0", "files": [], "observation_dim": 1, "action_dim": 1}')
        with pytest.raises(SerializationError):
            TrajectoryManifest.from_json(str(path))
