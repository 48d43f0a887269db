"""Exception hierarchy. Each error names the pipeline stage it belongs to and
the process exit code the CLI reports for it."""


class SeamtraceError(ValueError):
    stage = "seamtrace"
    exit_code = 1

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ConfigError(SeamtraceError):
    stage = "config"
    exit_code = 2


class ImageFormatError(SeamtraceError):
    stage = "image"
    exit_code = 3


class AnnotationError(SeamtraceError):
    stage = "annotation"
    exit_code = 4


class CurveError(SeamtraceError):
    stage = "initcurve"
    exit_code = 5


class SeamError(SeamtraceError):
    stage = "seamcut"
    exit_code = 6


class IntegrationError(SeamtraceError):
    stage = "integrate"
    exit_code = 7


class MetricsError(SeamtraceError):
    stage = "metrics"
    exit_code = 8


class SynthError(SeamtraceError):
    stage = "synth"
    exit_code = 9


ERROR_FOR_STAGE = {cls.stage: cls for cls in (
    ConfigError, ImageFormatError, AnnotationError, CurveError,
    SeamError, IntegrationError, MetricsError, SynthError)}
