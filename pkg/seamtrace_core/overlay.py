import logging

import numpy as np
from skimage.draw import line

from .imggrid import save_ppm

logger = logging.getLogger(__name__)

CONTOUR_COLORS = [
    (255, 0, 0),
    (0, 255, 0),
    (0, 128, 255),
    (255, 220, 0),
    (255, 0, 255),
    (0, 255, 255),
]
SEAM_COLOR = (255, 140, 0)


def _raster(points):
    """Pixel (row, col) arrays covering the polyline, consecutive vertices joined by Bresenham lines."""
    pts = np.rint(np.asarray(points, dtype=np.float64).reshape(-1, 2)).astype(np.int64)
    if len(pts) == 1:
        return pts[:, 1], pts[:, 0]
    rows, cols = [], []
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        rr, cc = line(int(y0), int(x0), int(y1), int(x1))
        rows.append(rr)
        cols.append(cc)
    return np.concatenate(rows), np.concatenate(cols)


def _draw(rgb, points, color):
    if len(points) == 0:
        return
    rr, cc = _raster(points)
    h, w = rgb.shape[:2]
    inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    if not np.all(inside):
        logger.warning("clipped %d pixels outside the %dx%d image", int(np.count_nonzero(~inside)), w, h)
    rgb[rr[inside], cc[inside]] = color


def render_overlay(img, contours, seams=None):
    """RGB uint8 copy of the image with seams and then contours drawn 1 px wide."""
    gray = np.rint(img.intensities * 255.0).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    for seam in seams or []:
        _draw(rgb, seam, SEAM_COLOR)
    for n, contour in enumerate(contours):
        _draw(rgb, contour, CONTOUR_COLORS[n % len(CONTOUR_COLORS)])
    return rgb


def write_overlay(img, contours, path, seams=None, comment=None):
    rgb = render_overlay(img, contours, seams)
    save_ppm(rgb, path, comment)
    return rgb
