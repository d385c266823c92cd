"""Exception hierarchy shared across the pipeline."""


class XrayKitError(Exception):
    """Base class for all errors raised by this package."""


class MalformedImage(XrayKitError):
    """Image bytes could not be decoded."""


class UnsupportedFormat(XrayKitError):
    """Image container or pixel layout is not supported."""


class ShapeMismatch(XrayKitError):
    """Array shapes are incompatible for the requested operation."""


class MissingWeights(XrayKitError):
    """Weight vector is absent or does not cover all parameter slots."""


class UnsupportedLayer(XrayKitError):
    """Layer kind has no registered forward or adjoint."""


class VersionMismatch(XrayKitError):
    """Bundle format version is not supported."""


class CorruptManifest(XrayKitError):
    """Bundle manifest failed to parse or validate."""


class WeightCountMismatch(XrayKitError):
    """Stored weight blob does not match the declared parameter sizes."""


class InvalidConfig(XrayKitError):
    """Model or training configuration is invalid."""


class Divergence(XrayKitError):
    """Training produced a non-finite loss or non-finite weights."""


class EmptyScores(XrayKitError):
    """Score list is empty where at least one value is required."""


class DegenerateLabels(XrayKitError):
    """Binary labels contain only one class."""


class InvalidOperatingPoint(XrayKitError):
    """Operating point lies outside (0, 1) after clamping."""


class BadClassIndex(XrayKitError):
    """Class index is out of range for the model."""


class IncompatibleHead(XrayKitError):
    """Model head is not global-average-pool followed by a single dense layer."""


class BundleLoadFailure(XrayKitError):
    """Bundle could not be loaded or failed startup self-verification."""
