"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A requested allocation exceeds the configured memory cap."""


class CalibrationError(ValueError):
    """A Med_p value is missing or was requested below calibration quality."""


class IngestionError(ValueError):
    """A dataset file is malformed (non-numeric, ragged, or non-finite)."""


class StructureFormatError(RuntimeError):
    """A structure file is not in the expected on-disk format."""


class ChecksumError(StructureFormatError):
    """A structure file is truncated or its checksum does not match."""


class VersionError(StructureFormatError):
    """A structure file was written with an unsupported format version."""
