import pytest
from hypothesis import given
from hypothesis import strategies as st

from diamark.config import (PipelineConfig, config_to_text, load_config, parse_config)
from diamark.kvtext import ConfigError, parse_kv
from importlib import resources


def test_defaults_roundtrip():
    cfg = PipelineConfig()
    assert parse_config(config_to_text(cfg)) == cfg


def test_shipped_default_file_matches_code():
    text = resources.files("diamark").joinpath("data/default.cfg").read_text()
    assert parse_config(text) == PipelineConfig()


def test_empty_config_gives_defaults():
    assert parse_config("") == PipelineConfig()


@pytest.mark.parametrize("text", [
    "screening.nonexistent = 1",
    "nosection.key = 1",
    "verify.dist_thresh = abc",
    "verify.dist_thresh = -1",
    "subpixel.template_size = 20",
    "gamma.alpha = 0",
    "structural.scales = 4",
    "verify.marker_halfwidth = 12",
    "a = 1",
    "screening.grid_cell = 32\nscreening.grid_cell = 16",
    "just words",
])
def test_rejects_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_marker_geometry_sets_pixel_sizes():
    cfg = parse_config("marker.half_size = 0.5\nmarker.line_width = 0.15\nmarker.gsd = 0.05")
    assert cfg.verify.marker_halfwidth == pytest.approx(10.0)
    assert cfg.subpixel.line_width == pytest.approx(3.0)
    assert cfg.verify.radius == pytest.approx(15.0)


def test_comments_and_blank_lines(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\n\nverify.dist_thresh = 4  # trailing\n")
    assert load_config(p).verify.dist_thresh == 4.0


def test_optional_values():
    assert parse_config("screening.entropy_target = 1.5").screening.entropy_target == 1.5
    assert parse_config("screening.entropy_target = none").screening.entropy_target is None


@given(st.floats(0.5, 30), st.integers(1, 8), st.floats(0.05, 0.95))
def test_roundtrip_property(dist, iters, keep):
    cfg = parse_config(f"verify.dist_thresh = {dist!r}\nscreening.shift_iters = {iters}\n"
                       f"screening.structural_keep_fraction = {keep!r}")
    assert parse_config(config_to_text(cfg)) == cfg


def test_parse_kv_order_and_strictness():
    assert list(parse_kv("b.x = 1\na.y = 2")) == ["b.x", "a.y"]
    with pytest.raises(ConfigError):
        parse_kv("a.b =")
