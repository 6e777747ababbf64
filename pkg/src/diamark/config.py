"""Pipeline configuration: every stage's tunables in one strict text file.

Keys are ``section.key = value``. Unknown sections or keys are rejected,
and each section is validated by constructing its parameter dataclass.
Marker geometry is given in physical units plus a ground-sample scale and
converted to the pixel quantities used by verification and templates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

from .kvtext import ConfigError, fmt, parse_kv, read_kv, to_bool, to_float, to_floats, to_int, to_ints
from .preprocess import GammaParams, GdwgifParams, PreprocessParams, StructuralParams
from .screening import ScreeningParams
from .subpixel.locate import SubpixelParams
from .verify import VerifyParams


@dataclass(frozen=True)
class MarkerGeometry:
    """Physical marker size; ``gsd`` is physical units per pixel."""

    half_size: float = 10.0
    line_width: float = 3.0
    gsd: float = 1.0

    def __post_init__(self):
        if self.half_size <= 0 or self.line_width <= 0 or self.gsd <= 0:
            raise ValueError("marker half_size, line_width and gsd must be > 0")

    @property
    def halfwidth_px(self) -> float:
        return self.half_size / self.gsd

    @property
    def line_width_px(self) -> float:
        return self.line_width / self.gsd


@dataclass(frozen=True)
class RunParams:
    dedup_radius: float = 3.0
    threads: int = 0  # 0 = auto; DIAMARK_THREADS overrides

    def __post_init__(self):
        if self.dedup_radius < 0:
            raise ValueError("dedup_radius must be >= 0")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")


@dataclass(frozen=True)
class BenchParams:
    seed: int = 7
    repetitions: int = 10
    image_sizes: tuple[int, ...] = (128, 256, 512)
    template_sizes: tuple[int, ...] = (11, 21, 31)
    scenes: int = 20
    scene_size: int = 256
    scene_markers: int = 4

    def __post_init__(self):
        object.__setattr__(self, "image_sizes", tuple(int(v) for v in self.image_sizes))
        object.__setattr__(self, "template_sizes", tuple(int(v) for v in self.template_sizes))
        if self.repetitions < 1 or self.scenes < 2:
            raise ValueError("repetitions >= 1 and scenes >= 2 required")
        if any(t % 2 == 0 or t < 3 for t in self.template_sizes):
            raise ValueError("template sizes must be odd and >= 3")
        if any(s < max(self.template_sizes) for s in self.image_sizes):
            raise ValueError("every image size must hold the largest template")
        if self.scene_size < 96 or self.scene_markers < 1:
            raise ValueError("scene_size >= 96 and scene_markers >= 1 required")


@dataclass(frozen=True)
class PipelineConfig:
    gdwgif: GdwgifParams = field(default_factory=GdwgifParams)
    gamma: GammaParams = field(default_factory=GammaParams)
    structural: StructuralParams = field(default_factory=StructuralParams)
    screening: ScreeningParams = field(default_factory=ScreeningParams)
    verify: VerifyParams = field(default_factory=VerifyParams)
    subpixel: SubpixelParams = field(default_factory=SubpixelParams)
    marker: MarkerGeometry = field(default_factory=MarkerGeometry)
    run: RunParams = field(default_factory=RunParams)
    bench: BenchParams = field(default_factory=BenchParams)

    def __post_init__(self):
        # pixel geometry always follows the physical marker description
        object.__setattr__(self, "verify", replace(self.verify, marker_halfwidth=self.marker.halfwidth_px))
        object.__setattr__(self, "subpixel", replace(self.subpixel, line_width=self.marker.line_width_px))

    @property
    def preprocess(self) -> PreprocessParams:
        return PreprocessParams(self.gdwgif, self.gamma, self.structural)


SECTIONS = tuple(f.name for f in dataclasses.fields(PipelineConfig))
# pixel quantities set from the marker section, never directly
DERIVED_KEYS = {"verify.marker_halfwidth": "marker.half_size / marker.gsd",
                "subpixel.line_width": "marker.line_width / marker.gsd"}


def _convert(key: str, value: str, type_str: str):
    t = type_str.replace(" ", "")
    if t == "float|None":
        return None if value.lower() == "none" else to_float(key, value)
    if t == "float":
        return to_float(key, value)
    if t == "int":
        return to_int(key, value)
    if t == "bool":
        return to_bool(key, value)
    if t == "str":
        return value
    if t == "tuple[int,...]":
        return to_ints(key, value)
    if t == "tuple[float,...]":
        return to_floats(key, value)
    raise ConfigError(f"{key}: unsupported field type {type_str}")


def _section_fields(section: str) -> tuple[dict[str, dataclasses.Field], type]:
    cls = {f.name: f for f in dataclasses.fields(PipelineConfig)}[section].default_factory
    return {f.name: f for f in dataclasses.fields(cls)}, cls


def config_from_mapping(kv: dict[str, str], source: str = "<config>") -> PipelineConfig:
    grouped: dict[str, dict] = {}
    for key, value in kv.items():
        if key in DERIVED_KEYS:
            raise ConfigError(f"{source}: {key} is derived from {DERIVED_KEYS[key]}; set the marker section")
        parts = key.split(".")
        if len(parts) != 2 or parts[0] not in SECTIONS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        fields, _ = _section_fields(parts[0])
        if parts[1] not in fields:
            raise ConfigError(f"{source}: unknown key {key!r}")
        grouped.setdefault(parts[0], {})[parts[1]] = _convert(key, value, str(fields[parts[1]].type))
    built = {}
    for section, values in grouped.items():
        _, cls = _section_fields(section)
        try:
            built[section] = cls(**values)
        except ValueError as exc:
            raise ConfigError(f"{source}: [{section}] {exc}") from None
    try:
        return PipelineConfig(**built)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    return config_from_mapping(parse_kv(text, source), source)


def load_config(path) -> PipelineConfig:
    return config_from_mapping(read_kv(path), str(path))


def config_to_text(cfg: PipelineConfig) -> str:
    """Render every settable key; ``parse_config`` of the result returns ``cfg``."""
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        lines.append(f"# {section}")
        for f in dataclasses.fields(obj):
            key = f"{section}.{f.name}"
            if key in DERIVED_KEYS:
                continue
            v = getattr(obj, f.name)
            lines.append(f"{key} = {'none' if v is None else fmt(v)}")
        lines.append("")
    return "\n".join(lines)
