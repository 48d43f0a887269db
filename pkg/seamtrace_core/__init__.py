from .errors import (SeamtraceError, ConfigError, ImageFormatError, AnnotationError, CurveError,
                     SeamError, IntegrationError, MetricsError, SynthError)
from .config import Config, load_config, resolve_config
from .imggrid import (ImageGrid, GradField, SquarePatch, load_image, save_pgm, save_ppm, gradient_magnitude,
                      sample_bilinear, extract_patch, patch_to_global, global_to_patch)
from .initcurve import (Annotation, Curve, SquareSpec, parse_annotation, read_landmarks, write_landmarks,
                        fit_initial_curve, sample_squares, bbox_from_points)
from .seamcut import (Parabola, SeamPath, fit_parabola, parabola_error, gradient_seam, guided_seam, seam_to_global,
                      seam_score)
from .integrate import (SeamCloud, weighted_covariance, directionality, build_cloud, knn, walk_order,
                        integrate_walk)
from .metrics import (MetricsReport, FitStudy, dme, sme, ced, curve_to_landmarks, landmarks_to_curve,
                      evaluate, interocular, parabola_fit_study)
from .synthbench import (ShiftRegisterRng, SynthSpec, gen_synthetic, gen_corpus, brute_force_seam,
                         brute_force_guided_objective, random_patch, seam_truth_deviation)
from .pipeline import ExtractionResult, extract_contour
from .overlay import render_overlay, write_overlay

__all__ = ["SeamtraceError", "ConfigError", "ImageFormatError", "AnnotationError", "CurveError",
           "SeamError", "IntegrationError", "MetricsError", "SynthError",
           "Config", "load_config", "resolve_config",
           "ImageGrid", "GradField", "SquarePatch", "load_image", "save_pgm", "save_ppm", "gradient_magnitude",
           "sample_bilinear", "extract_patch", "patch_to_global", "global_to_patch",
           "Annotation", "Curve", "SquareSpec", "parse_annotation", "read_landmarks", "write_landmarks",
           "fit_initial_curve", "sample_squares", "bbox_from_points",
           "Parabola", "SeamPath", "fit_parabola", "parabola_error", "gradient_seam", "guided_seam", "seam_to_global",
           "seam_score",
           "SeamCloud", "weighted_covariance", "directionality", "build_cloud", "knn", "walk_order",
           "integrate_walk",
           "MetricsReport", "FitStudy", "dme", "sme", "ced", "curve_to_landmarks", "landmarks_to_curve",
           "evaluate", "interocular", "parabola_fit_study",
           "ShiftRegisterRng", "SynthSpec", "gen_synthetic", "gen_corpus", "brute_force_seam",
           "brute_force_guided_objective", "random_patch", "seam_truth_deviation",
           "ExtractionResult", "extract_contour", "render_overlay", "write_overlay"]
