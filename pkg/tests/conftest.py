import json

import numpy as np
import pytest

from seamtrace_core import ShiftRegisterRng, SynthSpec
from seamtrace_core.seamcut import SeamPath


def write_pgm(path, values):
    values = np.asarray(values, dtype=np.uint8)
    h, w = values.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + values.tobytes())
    return path


def write_annotation(path, **fields):
    path.write_text(json.dumps(fields))
    return path


def seam_from_points(points, segment_id=0):
    pts = np.asarray(points, dtype=np.float64)
    d = np.gradient(pts, axis=0)
    tangents = d / np.linalg.norm(d, axis=1, keepdims=True)
    return SeamPath(np.zeros(len(pts), dtype=np.intp), 0.0, pts, tangents, segment_id)


def read_ppm_pixels(path):
    from seamtrace_core.imggrid import _read_header

    data = path.read_bytes()
    magic, w, h, maxval, offset = _read_header(data)
    assert magic == "P6" and maxval == 255
    return np.frombuffer(data, dtype=np.uint8, offset=offset).reshape(h, w, 3)


@pytest.fixture
def rng():
    return ShiftRegisterRng(20240611)


@pytest.fixture
def clean_spec():
    return SynthSpec(parabola={"vertex": (120.25, 170.35)}, softness=1.0, noise=0.0)


@pytest.fixture
def line_annotation(tmp_path):
    xs = np.arange(20.0, 61.0)
    contour = [(float(x), 30.0) for x in xs]
    landmarks = [(float(x), 30.0) for x in np.linspace(20.0, 60.0, 5)]
    return write_annotation(tmp_path / "line.json", landmarks=landmarks, contour=contour,
                            left_eye=[20.0, 10.0], right_eye=[60.0, 10.0])
