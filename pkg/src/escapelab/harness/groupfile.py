"""Group description files: n, generator matrices (row-major, exact
decimals), disk centers/radii, and the pairing map."""

from __future__ import annotations

import configparser

import numpy as np

from ..errors import GroupDataError
from ..geometry import Isometry
from ..schottky import SchottkyDisk, SchottkyGroup


def read_group_file(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise GroupDataError(f"group file {path!r} not found or empty")
    if "group" not in parser:
        raise GroupDataError("group file needs a [group] section")
    n = parser.getint("group", "n", fallback=1)
    n_gen = parser.getint("group", "generators")
    generators, pairing = [], []
    disks = {}
    for section in parser.sections():
        if section.startswith("disk."):
            idx = int(section.split(".", 1)[1])
            cx, cy = (float(t) for t in parser.get(section, "center").split())
            radius = float(parser.get(section, "radius"))
            disks[idx] = _disk_from_circle(complex(cx, cy), radius)
    for k in range(1, n_gen + 1):
        section = f"generator.{k}"
        if section not in parser:
            raise GroupDataError(f"missing [{section}]")
        vals = [float(t) for t in parser.get(section, "matrix").split()]
        if len(vals) != 4:
            raise GroupDataError(f"[{section}] matrix must have 4 entries (row-major)")
        generators.append(Isometry.from_matrix(np.array(vals).reshape(2, 2)))
        pairing.append(
            (
                parser.getint(section, "source_disk") - 1,
                parser.getint(section, "target_disk") - 1,
            )
        )
    ordered = [disks[i] for i in sorted(disks)]
    if sorted(disks) != list(range(1, 2 * n_gen + 1)):
        raise GroupDataError("disk sections must be numbered 1..2g")
    return SchottkyGroup(generators, ordered, pairing, n=n)


def write_group_file(grp: SchottkyGroup, path):
    parser = configparser.ConfigParser()
    parser["group"] = {"n": str(grp.n), "generators": str(grp.rank)}
    for k, gen in enumerate(grp.generators):
        src, tgt = grp.pairing[k]
        parser[f"generator.{k + 1}"] = {
            "matrix": " ".join(repr(float(v)) for v in gen.matrix.ravel()),
            "source_disk": str(src + 1),
            "target_disk": str(tgt + 1),
        }
    for j, d in enumerate(grp.disks):
        parser[f"disk.{j + 1}"] = {
            "center": f"{float(d.center.real)!r} {float(d.center.imag)!r}",
            "radius": repr(float(d.radius)),
        }
    with open(path, "w") as fh:
        parser.write(fh)


def _disk_from_circle(center, radius):
    """Rebuild arc data from a circle orthogonal to the unit circle."""
    ortho = abs(abs(center) ** 2 - (1.0 + radius**2))
    if ortho > 1e-8 * max(1.0, abs(center) ** 2):
        raise GroupDataError(
            f"disk (center {center}, radius {radius}) is not orthogonal to the "
            "unit circle"
        )
    arc_center = float(np.angle(center)) % (2.0 * np.pi)
    halfwidth = float(np.arccos(np.clip(1.0 / abs(center), -1.0, 1.0)))
    return SchottkyDisk(center, radius, arc_center, halfwidth)
