"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can emit a
JSON error object on stderr.
"""


class DosIqaError(Exception):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


class EmptyRatings(DosIqaError, ValueError):
    code = "empty_ratings"


class InvalidLevel(DosIqaError, ValueError):
    code = "invalid_level"


class OutOfRange(DosIqaError, ValueError):
    code = "out_of_range"


class DegenerateFit(DosIqaError, ValueError):
    code = "degenerate_fit"


class InvalidSigma(DosIqaError, ValueError):
    code = "invalid_sigma"


class InvalidDistribution(DosIqaError, ValueError):
    code = "invalid_distribution"


class ScaleMismatch(DosIqaError, ValueError):
    code = "scale_mismatch"


class ShapeError(DosIqaError, ValueError):
    code = "shape_error"


class NumericError(DosIqaError, ArithmeticError):
    code = "numeric_error"


class ConfigError(DosIqaError, ValueError):
    code = "config_error"


class UndefinedCorrelation(DosIqaError, ValueError):
    code = "undefined_correlation"


class ParseError(DosIqaError, ValueError):
    code = "parse_error"


class ValidationError(DosIqaError, ValueError):
    code = "validation_error"


class ImageIOError(DosIqaError, OSError):
    code = "io_error"


class DecodeError(DosIqaError, ValueError):
    code = "decode_error"


class CheckpointError(DosIqaError, ValueError):
    code = "checkpoint_error"


class NoResults(DosIqaError, FileNotFoundError):
    code = "no_results"
