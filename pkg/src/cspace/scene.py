"""Scene files: obstacle balls, object balls, optional probes and expectations.

Schema::

    {"dimension": 2,
     "obstacles": [{"c": [x, y], "r": 1.0}, ...],
     "object": [{"c": [x, y], "r": 0.5}, ...],
     "reference_point": [x, y],            # optional
     "probes": {"inside": [x, y, theta]},  # optional named configurations
     "expected": {...},                    # optional, free form
     "meta": {...}}                        # optional, free form

``center``/``radius`` are accepted as aliases of ``c``/``r``. Probe
configurations are ``[x, y, theta]`` in 2D and ``[x, y, z, qw, qx, qy, qz]``
in 3D.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import BallUnion, Configuration, RigidObjectModel


@dataclass(frozen=True, eq=False)
class Scene:
    obstacles: BallUnion
    object: RigidObjectModel
    name: str = ""
    probes: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.obstacles.dimension

    def probe(self, name: str) -> Configuration:
        return self.probes[name]


def _balls(items, where: str, dim: int) -> BallUnion:
    if not isinstance(items, list) or not items:
        raise ParseError(f"{where}: expected a nonempty list of balls")
    centers, radii = [], []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise ParseError(f"{where}[{k}]: expected an object with 'c' and 'r'")
        c = item.get("c", item.get("center"))
        r = item.get("r", item.get("radius"))
        if c is None:
            raise ParseError(f"{where}[{k}].c: missing ball center")
        if r is None:
            raise ParseError(f"{where}[{k}].r: missing ball radius")
        try:
            c = [float(v) for v in c]
            r = float(r)
        except (TypeError, ValueError):
            raise ParseError(f"{where}[{k}]: center and radius must be numbers") from None
        if len(c) != dim:
            raise ParseError(f"{where}[{k}].c: expected {dim} coordinates, got {len(c)}")
        if not (np.isfinite(r) and r > 0) or not np.all(np.isfinite(c)):
            raise ParseError(f"{where}[{k}].r: radius must be a positive finite number, got {r}")
        centers.append(c)
        radii.append(r)
    return BallUnion(np.array(centers), np.array(radii))


def parse_configuration(values, dim: int, where: str = "configuration") -> Configuration:
    """``[x, y, theta]`` (2D) or ``[x, y, z, qw, qx, qy, qz]`` (3D)."""
    try:
        v = [float(x) for x in values]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: expected a list of numbers") from None
    want = 3 if dim == 2 else 7
    if len(v) != want:
        raise ParseError(f"{where}: expected {want} numbers for a {dim}D configuration, got {len(v)}")
    try:
        if dim == 2:
            return Configuration(v[:2], v[2])
        return Configuration(v[:3], np.array(v[3:]))
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def scene_from_dict(data: dict, name: str = "") -> Scene:
    if not isinstance(data, dict):
        raise ParseError("scene: expected a JSON object at top level")
    dim = data.get("dimension")
    if dim not in (2, 3):
        raise ParseError(f"dimension: must be 2 or 3, got {dim!r}")
    obstacles = _balls(data.get("obstacles"), "obstacles", dim)
    shape = _balls(data.get("object"), "object", dim)
    ref = data.get("reference_point")
    if ref is not None:
        if len(ref) != dim:
            raise ParseError(f"reference_point: expected {dim} coordinates")
        ref = np.asarray(ref, dtype=float)
    obj = RigidObjectModel(shape, ref)
    probes = {str(k): parse_configuration(v, dim, f"probes.{k}") for k, v in (data.get("probes") or {}).items()}
    return Scene(obstacles, obj, name or str(data.get("name", "")), probes,
                 dict(data.get("expected") or {}), dict(data.get("meta") or {}))


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"scene: cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scene: {path} is not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return scene_from_dict(data, path.stem)


def scene_to_dict(scene: Scene) -> dict:
    def balls(u: BallUnion):
        return [{"c": c.tolist(), "r": float(r)} for c, r in zip(u.centers, u.radii)]

    out = {"dimension": scene.dimension, "obstacles": balls(scene.obstacles),
           "object": balls(scene.object.shape),
           "reference_point": scene.object.reference_point.tolist()}
    if scene.probes:
        out["probes"] = {k: configuration_to_list(c) for k, c in scene.probes.items()}
    if scene.expected:
        out["expected"] = scene.expected
    if scene.meta:
        out["meta"] = scene.meta
    return out


def configuration_to_list(c: Configuration) -> list[float]:
    if c.dimension == 2:
        return [*c.position.tolist(), float(c.orientation)]
    return [*c.position.tolist(), *np.asarray(c.orientation).tolist()]


def bundled_scenes() -> list[str]:
    root = resources.files("cspace") / "scenes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> Scene:
    root = resources.files("cspace") / "scenes"
    target = root / f"{name}.json"
    if not target.is_file():
        raise ParseError(f"scene: no bundled scene named {name!r}; choose from {bundled_scenes()}")
    return scene_from_dict(json.loads(target.read_text()), name)
