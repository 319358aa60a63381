"""Regenerate the bundled scene files in src/cspace/scenes/."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "cspace" / "scenes"


def ball(c, r):
    return {"c": [round(float(v), 6) for v in c], "r": round(float(r), 6)}


def segment(a, b, spacing):
    a, b = np.asarray(a, float), np.asarray(b, float)
    k = max(1, math.ceil(np.linalg.norm(b - a) / spacing))
    return [a + (b - a) * t for t in np.linspace(0, 1, k + 1)]


def square(center, side, spacing):
    cx, cy = center
    h = side / 2
    corners = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    pts = []
    for k in range(4):
        pts += segment(corners[k], corners[(k + 1) % 4], spacing)[:-1]
    return pts


def dumbbell_2d(half, r):
    return [ball((-half, 0), r), ball((half, 0), r)]


def dedupe(points, tol=1e-6):
    out = []
    for p in points:
        if all(np.linalg.norm(np.asarray(p) - q) > tol for q in out):
            out.append(np.asarray(p))
    return out


def write(name, data):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n")


# ------------------------------------------------------------------ 2D scenes

def box_bottleneck():
    """Closed box split by an inner wall with a gap narrower than the object."""
    spacing, r = 0.5, 1.0
    pts = square((0, 0), 20, spacing)
    gap = 0.8 + 2 * r  # center distance across the gap
    pts += segment((0, -10), (0, -gap / 2), spacing) + segment((0, gap / 2), (0, 10), spacing)
    pts = dedupe(pts)
    return {
        "dimension": 2,
        "obstacles": [ball(p, r) for p in pts],
        "object": dumbbell_2d(0.6, 1.0),
        "probes": {"left": [-5, 0, 0.0], "right": [5, 0, 1.0], "outside": [-17, 3, 0.5],
                   "far": [15, -16, 2.0]},
        "expected": {"bounded_classes": 2, "groups": [["left"], ["right"], ["outside", "far"]]},
        "meta": {"description": "box 20x20 split by a wall with a 0.8 wide gap; object waist is 1.6 wide"},
    }


def closed_box():
    spacing, r = 0.5, 1.0
    pts = dedupe(square((0, 0), 12, spacing))
    return {
        "dimension": 2,
        "obstacles": [ball(p, r) for p in pts],
        "object": dumbbell_2d(0.6, 1.0),
        "probes": {"inside": [0, 0, 0.3], "outside": [14, 0, 0.0]},
        "expected": {"bounded_classes": 1, "groups": [["inside"], ["outside"]]},
        "meta": {"description": "sealed square box with a dumbbell inside"},
    }


# box side lengths (ball-center lines) for the resolution study
APPROX_SIDES = {"A1": 10.0, "A2": 10.0, "B": 6.8, "C": 4.6}
APPROX_CENTERS = {"A1": (-7.0, 7.0), "A2": (7.0, 7.0), "B": (-7.0, -7.0), "C": (7.0, -7.0)}
APPROX_RADII = {"coarse": 3.0, "medium": 2.0, "fine": 0.8}
APPROX_EXPECTED = {"coarse": 2, "medium": 3, "fine": 4}


def approx_study(level):
    """Four sealed rooms drawn with balls of one radius; big balls close the small rooms."""
    r = APPROX_RADII[level]
    pts = []
    for key, side in APPROX_SIDES.items():
        pts += square(APPROX_CENTERS[key], side, 0.6)
    probes = {f"room_{k}": [*APPROX_CENTERS[k], 0.0] for k in APPROX_SIDES}
    probes["outside"] = [0.0, 0.0, 0.0]
    return {
        "dimension": 2,
        "obstacles": [ball(p, r) for p in dedupe(pts)],
        "object": dumbbell_2d(0.5, 0.6),
        "probes": probes,
        "expected": {"bounded_classes": APPROX_EXPECTED[level]},
        "meta": {"description": f"resolution study, obstacle ball radius {r}",
                 "ball_radius": r, "level": level},
    }


def bugtrap():
    """Round chamber whose only exit is a corridor slightly wider than the object."""
    r = 1.0
    width = 2.0  # free width of the corridor between wall surfaces
    pts = []
    chamber = 8.0
    half = width / 2 + r
    # chamber wall: circle with an opening where the corridor leaves to +x
    opening = math.asin(half / chamber)
    k = math.ceil(2 * math.pi * chamber / 0.5)
    for t in np.linspace(0, 2 * math.pi, k, endpoint=False):
        if abs((t + math.pi) % (2 * math.pi) - math.pi) > opening:
            pts.append((chamber * math.cos(t), chamber * math.sin(t)))
    x0 = chamber * math.cos(opening)
    pts += segment((x0, half), (x0 + 8, half), 0.5) + segment((x0, -half), (x0 + 8, -half), 0.5)
    obj_r = 0.9
    return {
        "dimension": 2,
        "obstacles": [ball(p, r) for p in dedupe(pts)],
        "object": [ball((-0.6, 0), obj_r), ball((0.6, 0), obj_r)],
        "probes": {"inside": [0, 0, 0.0], "outside": [x0 + 16, 0, 0.0]},
        "expected": {"passage_width": width, "delta": 0.2 * width, "classes_at_zero": 1},
        "meta": {"description": "chamber with a corridor of free width 2.0; object width 1.8"},
    }


# ------------------------------------------------------------------ 3D scenes

def ring(center, radius, count, r, plane):
    t = np.linspace(0, 2 * math.pi, count, endpoint=False)
    u, v = {"xy": ((1, 0, 0), (0, 1, 0)), "xz": ((1, 0, 0), (0, 0, 1)),
            "yz": ((0, 1, 0), (0, 0, 1))}[plane]
    c = np.asarray(center, float)
    return [ball(c + radius * (math.cos(a) * np.asarray(u) + math.sin(a) * np.asarray(v)), r) for a in t]


def ring_link():
    """Object ring threaded through a two-layer obstacle ring."""
    return {
        "dimension": 3,
        "obstacles": ring((3, -0.5, 0), 3.0, 10, 1.0, "xz") + ring((3, 0.5, 0), 3.0, 10, 1.0, "xz"),
        "object": ring((0, 0, 0), 3.0, 10, 1.3, "xy"),
        "reference_point": [0, 0, 0],
        "probes": {"linked": [0, 0, 0, 1, 0, 0, 0], "outside": [0, 0, 15, 1, 0, 0, 0]},
        "expected": {"caged": {"linked": True, "outside": False}},
        "meta": {"description": "two linked rings"},
    }


def narrow_part():
    """Two heads joined by a thin neck; a thick obstacle ring grips the neck."""
    obj = [ball((-3.2, 0, 0), 1.8), ball((3.2, 0, 0), 1.8)]
    obj += [ball((x, 0, 0), 0.6) for x in (-2.0, -1.0, 0.0, 1.0, 2.0)]
    # two layers: a single planar ring gives collision walls too thin to survive a grid step
    return {
        "dimension": 3,
        "obstacles": ring((-0.5, 0, 0), 1.9, 12, 0.9, "yz") + ring((0.5, 0, 0), 1.9, 12, 0.9, "yz"),
        "object": obj,
        "reference_point": [0, 0, 0],
        "probes": {"gripped": [0, 0, 0, 1, 0, 0, 0], "outside": [0, 0, 15, 1, 0, 0, 0]},
        "expected": {"caged": {"gripped": True, "outside": False}},
        "meta": {"description": "dumbbell whose neck passes through a ring with a hole smaller than the heads"},
    }


def icosphere(level):
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.asarray(v) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4), (11, 10, 2),
             (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5),
             (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts)


def surround():
    """Object enclosed by a shell of balls whose gaps are smaller than the object."""
    shell = icosphere(1) * 6.0
    obj = [ball((x, 0, 0), 1.0) for x in (-1.2, 0.0, 1.2)]
    # r=1.9 closes every shell edge (longest 3.71) and leaves holes of radius <= 0.24
    return {
        "dimension": 3,
        "obstacles": [ball(p, 1.9) for p in shell],
        "object": obj,
        "reference_point": [0, 0, 0],
        "probes": {"inside": [0, 0, 0, 1, 0, 0, 0], "outside": [0, 0, 15, 1, 0, 0, 0]},
        "expected": {"caged": {"inside": True, "outside": False}},
        "meta": {"description": "42-ball spherical shell around a three-ball rod"},
    }


def main():
    write("box_bottleneck", box_bottleneck())
    write("closed_box", closed_box())
    for level in APPROX_RADII:
        write(f"approx_{level}", approx_study(level))
    write("bugtrap", bugtrap())
    write("ring_link", ring_link())
    write("narrow_part", narrow_part())
    write("surround", surround())


if __name__ == "__main__":
    main()
