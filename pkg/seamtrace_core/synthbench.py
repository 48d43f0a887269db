"""Synthetic contour images with analytic ground truth, and exhaustive seam oracles.

Randomness comes from ShiftRegisterRng only: 256 xorshift64* lanes
(x ^= x >> 12; x ^= x << 25; x ^= x >> 27; out = x * 0x2545F4914F6CDD1D),
each lane seeded through splitmix64 (increment 0x9E3779B97F4A7C15, mixing
multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Draws are taken
step-major, lane-minor; uniforms are (out >> 11) * 2**-53 and normals use
Box-Muller. A corpus is therefore fully determined by its spec and seed.
"""
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import SeamError, SynthError
from .imggrid import ImageGrid, SquarePatch, save_pgm
from .initcurve import Annotation, Curve, bbox_from_points, fit_initial_curve, square_side, write_landmarks
from .metrics import nearest_distances
from .seamcut import DELTA_RANK, _weights, fit_window, parabola_distance, seam_to_global
from .utils import dumps_stable, parallel_map

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
SPLITMIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
SPLITMIX_M2 = np.uint64(0x94D049BB133111EB)
XORSHIFT_MULT = np.uint64(0x2545F4914F6CDD1D)
ORACLE_MAX_ROWS = 12
TRUTH_SPACING = 0.25

INIT_STREAM = 0x1417
SHAPE_STREAM = 0x5A


def splitmix64(values):
    z = np.asarray(values, dtype=np.uint64) + SPLITMIX_GAMMA
    z = (z ^ (z >> np.uint64(30))) * SPLITMIX_M1
    z = (z ^ (z >> np.uint64(27))) * SPLITMIX_M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed, stream):
    return int(splitmix64(np.array([(int(seed) + int(stream)) & MASK64], dtype=np.uint64))[0])


class ShiftRegisterRng:
    def __init__(self, seed, lanes=256):
        if not 0 <= int(seed) <= MASK64:
            raise SynthError(f"seed must be a 64-bit unsigned integer, got {seed}")
        offsets = np.arange(lanes, dtype=np.uint64) * SPLITMIX_GAMMA
        state = splitmix64(np.full(lanes, int(seed), dtype=np.uint64) + offsets)
        self._state = np.where(state == 0, SPLITMIX_GAMMA, state)

    def _step(self):
        x = self._state
        x = x ^ (x >> np.uint64(12))
        x = x ^ (x << np.uint64(25))
        x = x ^ (x >> np.uint64(27))
        self._state = x
        return x * XORSHIFT_MULT

    def next_u64(self, n):
        lanes = len(self._state)
        steps = -(-int(n) // lanes)
        if steps == 0:
            return np.empty(0, dtype=np.uint64)
        return np.concatenate([self._step() for _ in range(steps)])[:n]

    def uniform(self, n):
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, n):
        u1 = 1.0 - self.uniform(n)
        u2 = self.uniform(n)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


Point = Tuple[float, float]


class ParabolaShape(BaseModel):
    """vertex + t*u + curvature*t^2*n with u = (cos r, sin r), n = (sin r, -cos r)."""
    model_config = ConfigDict(extra="forbid")
    vertex: Point = (120.0, 170.0)
    curvature: float = 0.008
    half_span: float = Field(75.0, gt=0)
    rotation: float = 0.0


class EllipseShape(BaseModel):
    model_config = ConfigDict(extra="forbid")
    center: Point = (120.0, 110.0)
    radii: Tuple[float, float] = (75.0, 60.0)
    start_angle: float = 0.35
    end_angle: float = math.pi - 0.35
    rotation: float = 0.0


class Distractor(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["stripe", "blob"]
    position: Point
    intensity: float
    width: float = Field(4.0, gt=0)
    angle: float = 0.0
    length: Optional[float] = Field(None, gt=0)


class Occluder(BaseModel):
    model_config = ConfigDict(extra="forbid")
    start: float = Field(ge=0.0, le=1.0)
    end: float = Field(ge=0.0, le=1.0)
    thickness: float = Field(8.0, gt=0)
    intensity: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.end <= self.start:
            raise ValueError("occluder end must exceed start")
        return self


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    width: int = Field(240, ge=16)
    height: int = Field(240, ge=16)
    family: Literal["parabola", "ellipse-arc", "spline-from-control-points"] = "parabola"
    parabola: ParabolaShape = ParabolaShape()
    ellipse: EllipseShape = EllipseShape()
    control_points: List[Point] = [(50.0, 120.0), (85.0, 165.0), (120.0, 178.0), (155.0, 165.0), (190.0, 120.0)]
    background: float = Field(0.2, ge=0.0, le=1.0)
    contrast: float = Field(0.6, ge=0.0, le=1.0)
    softness: float = Field(1.0, ge=0.0)
    noise: float = Field(0.0, ge=0.0)
    distractors: List[Distractor] = []
    occluder: Optional[Occluder] = None
    landmark_count: int = Field(17, ge=2)
    landmark_jitter: float = Field(0.0, ge=0.0)
    eye_distance: float = Field(100.0, gt=0)
    size_factor: float = Field(0.2, gt=0.0, le=1.0)
    shape_jitter: float = Field(0.0, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0, le=MASK64)

    @model_validator(mode="after")
    def _range(self):
        if self.background + self.contrast > 1.0:
            raise ValueError("background + contrast must not exceed 1")
        if self.family == "spline-from-control-points" and len(self.control_points) < 2:
            raise ValueError("spline family needs at least 2 control points")
        return self


def _shape_polyline(spec):
    if spec.family == "parabola":
        p = spec.parabola
        t = np.linspace(-p.half_span, p.half_span, 8192)
        u = np.array([math.cos(p.rotation), math.sin(p.rotation)])
        n = np.array([math.sin(p.rotation), -math.cos(p.rotation)])
        fine = np.asarray(p.vertex) + t[:, None] * u + (p.curvature * t * t)[:, None] * n
    elif spec.family == "ellipse-arc":
        e = spec.ellipse
        phi = np.linspace(e.start_angle, e.end_angle, 8192)
        local = np.stack([e.radii[0] * np.cos(phi), e.radii[1] * np.sin(phi)], axis=1)
        c, s = math.cos(e.rotation), math.sin(e.rotation)
        fine = np.asarray(e.center) + local @ np.array([[c, s], [-s, c]])
    else:
        fine = fit_initial_curve(spec.control_points).points
    curve = Curve(fine)
    return Curve(curve.resample(max(2, math.ceil(curve.length / TRUTH_SPACING) + 1)))


def contour_geometry(spec):
    """Dense truth curve, its 10%-grown bbox and the square side; checks the border margin."""
    truth = _shape_polyline(spec)
    bbox = bbox_from_points(truth.points)
    side = square_side(spec.size_factor, bbox)
    pts = truth.points
    if (pts[:, 0].min() < side or pts[:, 0].max() > spec.width - 1 - side
            or pts[:, 1].min() < side or pts[:, 1].max() > spec.height - 1 - side):
        raise SynthError("contour leaves the safe margin")
    if truth.length <= 2 * side:
        raise SynthError(f"contour of length {truth.length:.1f} too short for squares of side {side}")
    return truth, bbox, side


def _render(spec, truth):
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w]
    pix = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    dist, idx = cKDTree(truth.points).query(pix)
    tangents = truth.tangents()[idx]
    rel = pix - truth.points[idx]
    inside = (tangents[:, 0] * rel[:, 1] - tangents[:, 1] * rel[:, 0]) < 0
    img = (spec.background + spec.contrast * inside).reshape(h, w)
    if spec.softness > 0:
        img = ndimage.gaussian_filter(img, spec.softness, mode="nearest")

    for dis in spec.distractors:
        d = pix - np.asarray(dis.position)
        if dis.kind == "stripe":
            u = np.array([math.cos(dis.angle), math.sin(dis.angle)])
            across = np.abs(d[:, 0] * u[1] - d[:, 1] * u[0])
            mask = across <= dis.width / 2.0
            if dis.length is not None:
                mask &= np.abs(d @ u) <= dis.length / 2.0
            img = img + (dis.intensity * mask).reshape(h, w)
        else:
            r2 = np.square(d).sum(axis=1)
            img = img + (dis.intensity * np.exp(-r2 / (2.0 * dis.width ** 2))).reshape(h, w)

    if spec.occluder is not None:
        occ = spec.occluder
        frac = truth.arclength[idx] / truth.length
        mask = (frac >= occ.start) & (frac <= occ.end) & (dist <= occ.thickness)
        img = np.where(mask.reshape(h, w), occ.intensity, img)

    if spec.noise > 0:
        img = img + spec.noise * ShiftRegisterRng(spec.seed).normal(h * w).reshape(h, w)
    # quantize so the grid equals its saved 8-bit PGM
    return ImageGrid(np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0)


def gen_synthetic(spec):
    """(ImageGrid, Annotation) for one spec."""
    truth, bbox, side = contour_geometry(spec)
    img = _render(spec, truth)
    landmarks = truth.at(np.linspace(side, truth.length - side, spec.landmark_count))
    lo, hi = truth.points.min(axis=0), truth.points.max(axis=0)
    cx, top = 0.5 * (lo[0] + hi[0]), lo[1]
    half = spec.eye_distance / 2.0
    dense = truth.resample(math.ceil(truth.length) + 1)
    ann = Annotation(
        landmarks=[tuple(p) for p in landmarks.tolist()],
        contour=[tuple(p) for p in dense.tolist()],
        left_eye=(float(cx - half), float(top)),
        right_eye=(float(cx + half), float(top)),
        bbox=bbox,
    )
    return img, ann


def init_landmarks(spec, ann):
    """Annotation landmarks perturbed by landmark_jitter (an imperfect aligner)."""
    pts = np.asarray(ann.landmarks, dtype=np.float64)
    if spec.landmark_jitter > 0:
        rng = ShiftRegisterRng(derive_seed(spec.seed, INIT_STREAM))
        pts = pts + spec.landmark_jitter * rng.normal(pts.size).reshape(pts.shape)
    return [tuple(p) for p in pts.tolist()]


def _jittered(spec, rng):
    j = spec.shape_jitter
    u = rng.uniform(4) * 2.0 - 1.0
    if spec.family == "parabola":
        p = spec.parabola
        shape = p.model_copy(update={
            "vertex": (p.vertex[0] + 10.0 * j * u[0], p.vertex[1] + 10.0 * j * u[1]),
            "curvature": p.curvature * (1.0 + j * u[2]),
            "rotation": p.rotation + 0.3 * j * u[3]})
        return spec.model_copy(update={"parabola": shape})
    if spec.family == "ellipse-arc":
        e = spec.ellipse
        shape = e.model_copy(update={
            "center": (e.center[0] + 10.0 * j * u[0], e.center[1] + 10.0 * j * u[1]),
            "radii": (e.radii[0] * (1.0 + j * u[2]), e.radii[1] * (1.0 + j * u[2])),
            "rotation": e.rotation + 0.3 * j * u[3]})
        return spec.model_copy(update={"ellipse": shape})
    cps = np.asarray(spec.control_points) + 5.0 * j * rng.normal(2 * len(spec.control_points)).reshape(-1, 2)
    return spec.model_copy(update={"control_points": [tuple(p) for p in cps.tolist()]})


def corpus_spec(spec, k):
    """Spec of corpus image k: derived seed, shape jitter retried until the margin holds."""
    seed = derive_seed(spec.seed, k)
    item = spec.model_copy(update={"seed": seed})
    if spec.shape_jitter <= 0:
        return item
    rng = ShiftRegisterRng(derive_seed(seed, SHAPE_STREAM))
    for _ in range(16):
        candidate = _jittered(item, rng)
        try:
            contour_geometry(candidate)
        except SynthError:
            continue
        return candidate
    raise SynthError(f"image {k}: no jittered shape within the safe margin after 16 draws")


def _generate(spec):
    img, ann = gen_synthetic(spec)
    return img, ann, init_landmarks(spec, ann)


def gen_corpus(spec, count, out_dir, jobs=1):
    """Write NNN.pgm, NNN.json, NNN.init.txt and manifest.json; returns the manifest."""
    if count < 0:
        raise SynthError(f"count must be >= 0, got {count}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = [corpus_spec(spec, k) for k in range(count)]
    results = parallel_map(_generate, specs, jobs)
    images = []
    for k, (item, (img, ann, init)) in enumerate(zip(specs, results)):
        name = f"{k:03d}"
        save_pgm(img, out / f"{name}.pgm")
        (out / f"{name}.json").write_text(dumps_stable(ann.to_json()))
        write_landmarks(init, out / f"{name}.init.txt")
        images.append({"name": name, "seed": item.seed, "spec": item.model_dump(mode="json")})
    manifest = {
        "generator": "seamtrace.synthbench",
        "prng": "xorshift64* lanes seeded by splitmix64",
        "count": count,
        "base": spec.model_dump(mode="json"),
        "images": images,
    }
    (out / "manifest.json").write_text(dumps_stable(manifest))
    logger.info("wrote %d synthetic images to %s", count, out)
    return manifest


def random_patch(rng, rows, cols=None):
    """Patch of uniform random gradients scaled to max 1."""
    cols = rows if cols is None else cols
    g = rng.uniform(rows * cols).reshape(rows, cols)
    peak = g.max()
    return SquarePatch.from_grads(g / peak if peak > 0 else g)


@lru_cache(maxsize=8)
def _all_paths(rows, cols):
    paths = np.arange(cols, dtype=np.int16)[:, None]
    for _ in range(1, rows):
        ext = []
        for delta in (-1, 0, 1):
            nxt = paths[:, -1] + delta
            ok = (nxt >= 0) & (nxt < cols)
            ext.append(np.column_stack([paths[ok], nxt[ok]]))
        paths = np.concatenate(ext)
    paths.setflags(write=False)
    return paths


def _pick(paths, scores):
    """Best path under the seam tie-break: smallest end column, then predecessor
    offsets 0 < -1 < +1 compared from the last row upwards."""
    top = np.flatnonzero(scores == scores.max())
    cand = paths[top].astype(np.int64)
    ranks = np.vectorize(DELTA_RANK.get)(cand[:, :-1] - cand[:, 1:]) if cand.shape[1] > 1 else np.zeros((len(cand), 0))
    keys = [ranks[:, i] for i in range(ranks.shape[1])] + [cand[:, -1]]
    return top[np.lexsort(keys)[0]]


def _oracle_rows(patch):
    rows, cols = patch.grads.shape
    if rows > ORACLE_MAX_ROWS:
        raise SeamError(f"patch with {rows} rows too large for exhaustive enumeration (max {ORACLE_MAX_ROWS})")
    return rows, cols


def brute_force_seam(patch):
    rows, cols = _oracle_rows(patch)
    g = patch.grads
    paths = _all_paths(rows, cols)
    scores = g[0, paths[:, 0]]
    for i in range(1, rows):
        scores = scores + g[i, paths[:, i]]
    best = _pick(paths, scores)
    return seam_to_global(patch, paths[best], float(scores[best]))


def brute_force_guided_objective(patch, alpha=0.7, window=20, d_norm=3.0, weighting="eq4", mode="vertical"):
    """Exhaustive maximum of the guided objective with every parabola fitted
    to the path's own previous `window` points."""
    rows, cols = _oracle_rows(patch)
    wg, we = _weights(alpha, weighting)
    g = patch.grads
    paths = _all_paths(rows, cols)
    prior = we != 0.0 and rows > window + 1
    scores = wg * g[0, paths[:, 0]]
    for i in range(1, rows):
        if prior and i > window:
            coeffs = fit_window(np.arange(i - window, i), paths[:, i - window:i])
            d = parabola_distance(i, paths[:, i].astype(np.float64), coeffs, mode)
            scores = scores + we * (1.0 - (d / d_norm) ** 2)
        scores = scores + wg * g[i, paths[:, i]]
    best = _pick(paths, scores)
    seam = seam_to_global(patch, paths[best], float(scores[best]))
    return seam, float(scores[best])


def seam_truth_deviation(seam, truth):
    """Mean distance of a seam's global points to the truth polyline."""
    return float(nearest_distances(seam.global_points, truth).mean())
