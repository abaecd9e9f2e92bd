"""
Tests for configuration parsing, canonical serialization and hashing.
"""

import json

import numpy as np
import pytest

from app.exceptions import ConfigurationError
from app.services.config_parser import (
    ConfigParser,
    config_hash,
    load_config,
    parse_config,
    serialize_config,
)

MINIMAL_TOML = """
[grid]
lengths = [1.0]
cells = [64]

[physics]
final_time = 0.5
"""


class TestConfigParser:
    """Test TOML and JSON configuration input."""

    def setup_method(self):
        """Set up test fixtures."""
        self.parser = ConfigParser()

    def test_defaults(self):
        """Test omitted sections take their defaults."""
        config = self.parser.parse(MINIMAL_TOML)
        assert config.grid.boundary == "neumann"
        assert config.physics.epsilon == 0.0
        assert config.numerics.cfl == 0.9
        assert config.numerics.xi_bins == 64
        assert config.numerics.elliptic_tol == 1e-12
        assert config.numerics.backend == "finite-volume"
        assert config.numerics.flux == "godunov"
        assert config.numerics.face_state == "mean"
        assert config.experiment.box_cells == [40, 20, 10]
        assert config.experiment.box_steps == [8, 4, 2]
        assert config.experiment.regime_final_time is None
        assert config.snapshot_interval == pytest.approx(0.05)

    def test_json_input(self):
        """Test JSON text is recognised by its leading brace."""
        text = json.dumps({"grid": {"lengths": [2.0], "cells": [16]}, "physics": {"final_time": 1}})
        config = self.parser.parse("  " + text)
        assert config.grid.lengths == [2.0]
        assert config.physics.final_time == 1.0

    def test_negative_epsilon(self):
        """Test out-of-range values name their dotted key."""
        text = MINIMAL_TOML.replace("final_time = 0.5", "final_time = 0.5\nepsilon = -1.0")
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(text)
        assert exc.value.key == "physics.epsilon"
        assert str(exc.value).startswith("physics.epsilon")

    def test_unknown_key(self):
        """Test unknown keys are rejected by name."""
        text = MINIMAL_TOML + "\n[numerics]\ncfl_number = 0.5\n"
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(text)
        assert exc.value.key == "numerics.cfl_number"
        assert "unknown key" in str(exc.value)

    def test_cfl_above_ceiling(self):
        """Test CFL numbers above 0.95 are rejected."""
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(MINIMAL_TOML + "\n[numerics]\ncfl = 0.99\n")
        assert exc.value.key == "numerics.cfl"

    def test_too_few_xi_bins(self):
        """Test runs need at least 16 xi bins."""
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(MINIMAL_TOML + "\n[numerics]\nxi_bins = 8\n")
        assert exc.value.key == "numerics.xi_bins"

    def test_missing_section(self):
        """Test the physics section is required."""
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse("[grid]\nlengths = [1.0]\ncells = [8]\n")
        assert exc.value.key == "physics"

    def test_mismatched_dimension(self):
        """Test lengths and cells must agree in dimension."""
        text = MINIMAL_TOML.replace("cells = [64]", "cells = [64, 64]")
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(text)
        assert exc.value.key.startswith("grid")

    def test_bad_ladder(self):
        """Test the viscosity ladder must decrease."""
        text = MINIMAL_TOML + "\n[experiment]\nepsilon_ladder = [0.01, 0.02]\n"
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(text)
        assert exc.value.key == "experiment.epsilon_ladder"

    def test_unknown_study(self):
        """Test study names are validated."""
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse(MINIMAL_TOML + '\n[experiment]\nname = "sweep"\n')
        assert exc.value.key == "experiment.name"

    def test_syntax_error(self):
        """Test unparsable text is reported against the whole config."""
        with pytest.raises(ConfigurationError) as exc:
            self.parser.parse("[grid\nlengths = ")
        assert exc.value.key == "config"
        with pytest.raises(ConfigurationError):
            self.parser.parse('{"grid": ')

    def test_missing_file(self, tmp_path):
        """Test unreadable files raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.toml")

    def test_load_from_file(self, tmp_path):
        """Test loading a TOML file from disk."""
        path = tmp_path / "run.toml"
        path.write_text(MINIMAL_TOML, encoding="utf-8")
        assert load_config(path) == parse_config(MINIMAL_TOML)


class TestCanonicalForm:
    """Test serialization and hashing."""

    def test_random_round_trips(self):
        """Test parse(serialize(c)) == c for randomized configurations."""
        rng = np.random.default_rng(17)
        for _ in range(25):
            data = {
                "grid": {
                    "lengths": [float(rng.uniform(0.5, 3.0))],
                    "cells": [int(rng.integers(4, 200))],
                    "boundary": str(rng.choice(["neumann", "periodic"])),
                },
                "physics": {
                    "epsilon": float(rng.uniform(0.0, 0.1)),
                    "final_time": float(rng.uniform(0.1, 10.0)),
                    "initial": {
                        "preset": "cosine-perturbation",
                        "params": {"mean": float(rng.uniform(0.2, 0.8)), "mode": 2},
                    },
                },
                "numerics": {
                    "cfl": float(rng.uniform(0.1, 0.95)),
                    "xi_bins": int(rng.integers(16, 128)),
                    "kruzkov_levels": sorted(rng.uniform(size=3).tolist()),
                },
                "output": {"snapshot_interval": float(rng.uniform(0.01, 1.0))},
            }
            config = parse_config(json.dumps(data))
            assert parse_config(serialize_config(config)) == config

    def test_serialization_is_canonical(self):
        """Test key order in the input does not change the serialized form."""
        a = parse_config(
            '{"physics": {"final_time": 1.0}, "grid": {"cells": [8], "lengths": [1.0]}}'
        )
        b = parse_config(
            '{"grid": {"lengths": [1.0], "cells": [8]}, "physics": {"final_time": 1.0}}'
        )
        assert serialize_config(a) == serialize_config(b)
        assert config_hash(a) == config_hash(b)

    def test_hash_changes_with_content(self):
        """Test different configurations hash differently."""
        a = parse_config(MINIMAL_TOML)
        b = a.with_changes(epsilon=0.01)
        assert config_hash(a) != config_hash(b)
        assert len(config_hash(a)) == 64
