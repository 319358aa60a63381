from __future__ import annotations

import json

import numpy as np
import pytest

from cspace.errors import ParseError
from cspace.scene import (bundled_scenes, configuration_to_list, load_bundled, load_scene, parse_configuration,
                          scene_from_dict, scene_to_dict)

MINIMAL = {"dimension": 2, "obstacles": [{"c": [0, 0], "r": 1.0}], "object": [{"c": [0, 0], "r": 0.5}]}


def with_change(**kw):
    data = json.loads(json.dumps(MINIMAL))
    data.update(kw)
    return data


def test_bundled_scenes_load():
    names = bundled_scenes()
    for want in ("box_bottleneck", "closed_box", "approx_coarse", "approx_medium", "approx_fine", "bugtrap",
                 "ring_link", "narrow_part", "surround"):
        assert want in names
    for name in names:
        scene = load_bundled(name)
        assert scene.name == name and scene.dimension in (2, 3)
        assert scene.probes and scene.expected


def test_round_trip(tmp_path):
    scene = load_bundled("ring_link")
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scene_to_dict(scene)))
    back = load_scene(path)
    assert np.array_equal(back.obstacles.centers, scene.obstacles.centers)
    assert np.array_equal(back.object.shape.radii, scene.object.shape.radii)
    assert np.allclose(back.object.reference_point, scene.object.reference_point)
    assert back.probes.keys() == scene.probes.keys()
    assert back.expected == scene.expected


def test_aliases():
    scene = scene_from_dict(with_change(obstacles=[{"center": [1, 2], "radius": 0.5}]))
    assert scene.obstacles.centers.tolist() == [[1.0, 2.0]]


@pytest.mark.parametrize("data, field", [
    (with_change(dimension=4), "dimension"),
    (with_change(obstacles=[]), "obstacles"),
    (with_change(obstacles=[{"c": [0, 0]}]), "obstacles[0].r"),
    (with_change(obstacles=[{"r": 1.0}]), "obstacles[0].c"),
    (with_change(object=[{"c": [0, 0, 0], "r": 1.0}]), "object[0].c"),
    (with_change(object=[{"c": [0, 0], "r": -1.0}]), "object[0].r"),
    (with_change(object=[{"c": [0, 0], "r": "big"}]), "object[0]"),
    (with_change(reference_point=[0, 0, 0]), "reference_point"),
    (with_change(probes={"p": [0, 0]}), "probes.p"),
    ([1, 2], "scene"),
])
def test_errors_name_the_field(data, field):
    with pytest.raises(ParseError, match=field.replace("[", r"\[").replace("]", r"\]")):
        scene_from_dict(data)


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        load_scene(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError, match="not valid JSON"):
        load_scene(bad)
    with pytest.raises(ParseError, match="no bundled scene"):
        load_bundled("nope")


def test_configurations():
    c = parse_configuration([1, 2, 0.5], 2)
    assert configuration_to_list(c) == [1.0, 2.0, 0.5]
    c = parse_configuration([1, 2, 3, 0, 0, 0, 1], 3)
    assert configuration_to_list(c) == [1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 1.0]
    with pytest.raises(ParseError, match="unit length"):
        parse_configuration([1, 2, 3, 0, 0, 0, 2], 3)
    with pytest.raises(ParseError, match="expected 7 numbers"):
        parse_configuration([1, 2, 3, 1, 0, 0], 3)
    with pytest.raises(ParseError, match="where"):
        parse_configuration([0, 0, 0, 0, 0, 0, 0], 3, "where")
    with pytest.raises(ParseError):
        parse_configuration(["a", 0, 0], 2)
