"""Initial curve -> per-square guided seams -> global walk, for one image or a corpus."""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ERROR_FOR_STAGE, MetricsError, SeamtraceError
from .imggrid import extract_patch, gradient_magnitude, load_image
from .initcurve import fit_initial_curve, parse_annotation, read_landmarks, sample_squares
from .integrate import build_cloud, integrate_walk
from .metrics import evaluate, resolve_normalizer
from .seamcut import guided_seam
from .utils import parallel_map

logger = logging.getLogger(__name__)


@contextmanager
def stage(name):
    """Tag anything escaping the block with the stage it failed in."""
    try:
        yield
    except SeamtraceError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        raise ERROR_FOR_STAGE.get(name, SeamtraceError)(str(e), stage=name) from e


@dataclass
class ExtractionResult:
    contour: object  # Curve
    seams: list
    squares: list
    cloud: object
    runtime_ms: float


def _square_seam(img, grads, config, spec):
    patch = extract_patch(img, grads, spec.center, spec.patch_angle, spec.side)
    seam = guided_seam(patch, config.alpha, config.window, config.d_norm,
                       config.alpha_weighting, config.distance_mode)
    return seam.with_segment(spec.order_index)


def extract_contour(img, ann, config, init_landmarks=None, jobs=1):
    start = time.perf_counter()
    with stage("image"):
        grads = gradient_magnitude(img)
    with stage("initcurve"):
        landmarks = init_landmarks if init_landmarks is not None else ann.landmarks
        curve = fit_initial_curve(landmarks)
        squares = sample_squares(curve, config.square_count, config.square_size_factor, ann.bbox)
    logger.debug("initial curve length %.1f px, %d squares of side %d",
                 curve.length, len(squares), squares[0].side)
    with stage("seamcut"):
        seams = parallel_map(partial(_square_seam, img, grads, config), squares, jobs, prefer="threads")
    with stage("integrate"):
        cloud = build_cloud(seams, config.h)
        contour = integrate_walk(cloud, config.K, config.score_variant)
    runtime_ms = (time.perf_counter() - start) * 1000.0
    logger.debug("contour with %d points from %d seams", len(contour), len(seams))
    return ExtractionResult(contour, seams, squares, cloud, runtime_ms)


@dataclass(frozen=True)
class CorpusItem:
    name: str
    image_path: Path
    annotation_path: Path
    init_path: Optional[Path] = None


def init_path_for(annotation_path):
    """Sibling NNN.init.txt of an NNN.json annotation, if present."""
    p = Path(annotation_path)
    candidate = p.with_name(p.stem + ".init.txt")
    return candidate if candidate.exists() else None


def load_corpus(directory) -> List[CorpusItem]:
    root = Path(directory)
    if not root.is_dir():
        raise MetricsError(f"{root}: not a corpus directory")
    items = []
    for image_path in sorted(root.glob("*.pgm")):
        ann = image_path.with_suffix(".json")
        if not ann.exists():
            logger.warning("skipping %s: no annotation", image_path.name)
            continue
        items.append(CorpusItem(image_path.stem, image_path, ann, init_path_for(ann)))
    if not items:
        raise MetricsError(f"{root}: empty corpus")
    return items


def run_item(item, config, normalizer=None):
    """Extract and score one corpus image; returns (name, MetricsReport)."""
    img = load_image(item.image_path)
    ann = parse_annotation(item.annotation_path)
    init = read_landmarks(item.init_path) if item.init_path else None
    result = extract_contour(img, ann, config, init)
    with stage("metrics"):
        norm = resolve_normalizer(ann, normalizer if normalizer is not None else config.normalizer)
        report = evaluate(result.contour, ann, norm, result.runtime_ms)
    return item.name, report
