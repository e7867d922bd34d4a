"""Experiment configuration: flat INI-style sections with a canonical
serialization used for hashing."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..geometry import EUCLIDEAN_PLANE, HYPERBOLIC_BALL, ModelGeometry
from ..schottky import SchottkyGroup
from .groupfile import read_group_file

KNOWN_SECTIONS = (
    "geometry",
    "group",
    "dynamics",
    "measures",
    "semiclassics",
    "output",
)


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)
    source_path: str = None

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file {path!r} not found or empty")
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        cfg = cls(sections=sections, source_path=str(path))
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, sections):
        cfg = cls(sections={k: {kk: str(vv) for kk, vv in v.items()} for k, v in sections.items()})
        cfg.validate()
        return cfg

    def validate(self):
        for name in self.sections:
            if name not in KNOWN_SECTIONS:
                raise ConfigurationError(f"unknown config section [{name}]")
        kind = self.get("geometry", "kind", "hyperbolic_ball")
        if kind not in (HYPERBOLIC_BALL, EUCLIDEAN_PLANE):
            raise ConfigurationError(f"unknown geometry kind {kind!r}")
        fmts = self.get("output", "formats", "both")
        if fmts not in ("csv", "json", "both"):
            raise ConfigurationError(f"unknown output format {fmts!r}")
        preset = self.get("group", "preset", "cyclic")
        if preset not in ("cyclic", "symmetric-pair", "trivial", "file"):
            raise ConfigurationError(f"unknown group preset {preset!r}")
        if preset == "file" and not self.get("group", "file", ""):
            raise ConfigurationError("group preset 'file' needs group.file = PATH")

    # -- typed access ---------------------------------------------------------

    def get(self, section, key, default=None):
        try:
            return self.sections[section][key]
        except KeyError:
            if default is None:
                raise ConfigurationError(f"missing config key [{section}] {key}")
            return default

    def get_float(self, section, key, default=None):
        return float(self.get(section, key, None if default is None else str(default)))

    def get_int(self, section, key, default=None):
        return int(self.get(section, key, None if default is None else str(default)))

    def get_floats(self, section, key, default=None):
        raw = self.get(section, key, default)
        return [float(tok) for tok in raw.replace(",", " ").split()]

    def t_grid(self, default="0:8:1"):
        raw = self.get("dynamics", "t_grid", default)
        if ":" in raw:
            start, stop, step = (float(tok) for tok in raw.split(":"))
            return np.arange(start, stop + 1e-9, step)
        return np.array(self.get_floats("dynamics", "t_grid", raw))

    # -- constructed objects --------------------------------------------------

    def geometry(self):
        kind = self.get("geometry", "kind", "hyperbolic_ball")
        n = self.get_int("geometry", "n", 1)
        if kind == EUCLIDEAN_PLANE:
            return ModelGeometry.euclidean_plane(n=n, radius=self.get_float("geometry", "radius", 1.0))
        return ModelGeometry.hyperbolic_ball(n=n, epsilon0=self.get_float("geometry", "epsilon0", 1.0))

    def group(self):
        preset = self.get("group", "preset", "cyclic")
        if preset == "trivial":
            return SchottkyGroup.trivial()
        if preset == "cyclic":
            return SchottkyGroup.cyclic(length=self.get_float("group", "length", 2.0))
        if preset == "symmetric-pair":
            return SchottkyGroup.symmetric_pair(length=self.get_float("group", "length", 3.0))
        return read_group_file(self.get("group", "file"))

    # -- hashing ---------------------------------------------------------------

    def canonical_text(self):
        out = io.StringIO()
        for section in sorted(self.sections):
            out.write(f"[{section}]\n")
            for key in sorted(self.sections[section]):
                value = self.sections[section][key].strip()
                out.write(f"{key} = {value}\n")
        return out.getvalue()

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()
