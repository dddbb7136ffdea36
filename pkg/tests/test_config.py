import pytest

from blurflow.config import ConfigError, apply_overrides, load_config, parse_config_text
from blurflow.pipeline import PipelineConfig


def test_parse_skips_comments_and_blank_lines():
    text = "# header\n\nsolver.gamma = 0.05  # trailing\n kernel.kernel_size=21\n"
    assert parse_config_text(text) == {"solver.gamma": "0.05", "kernel.kernel_size": "21"}


def test_parse_error_names_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("solver.gamma = 1\nnot a pair\n")


def test_overrides_are_typed():
    cfg = apply_overrides(PipelineConfig(), {
        "solver.gamma": "0.05", "kernel.kernel_size": "21", "pyramid.factor": "0.8",
        "pipeline.mode": "nonDF", "ransac.seed": "7",
    })
    assert cfg.solver.gamma == 0.05
    assert cfg.kernel.kernel_size == 21 and isinstance(cfg.kernel.kernel_size, int)
    assert cfg.pyramid_factor == 0.8
    assert cfg.mode == "nonDF"
    assert cfg.ransac.seed == 7


def test_untouched_fields_keep_defaults():
    base = PipelineConfig()
    cfg = apply_overrides(base, {"solver.gamma": "0.5"})
    assert cfg.kernel == base.kernel
    assert cfg.solver.alpha == base.solver.alpha


@pytest.mark.parametrize("entries", [
    {"solver.nope": "1"},
    {"nosection.gamma": "1"},
    {"solver": "1"},
    {"kernel.kernel_size": "abc"},
    {"pipeline.mode": "fast"},
    {"pyramid.factor": "1.5"},
])
def test_bad_entries_raise(entries):
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), entries)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("solver.lorentz_eps = 0.2\n")
    assert load_config(p).solver.lorentz_eps == 0.2
