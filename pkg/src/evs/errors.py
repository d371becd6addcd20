"""Exception hierarchy shared by all modules."""


class EvsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EvsError, ValueError):
    """Input violates a documented invariant (CLI exit code 2)."""


class DimensionMismatch(ValidationError):
    pass


class DegeneratePose(ValidationError):
    pass


class BehindCamera(ValidationError):
    pass


class BadTimestep(ValidationError):
    pass


class BadCount(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed input file; the message names the file and offending field."""

    def __init__(self, path, field, reason):
        self.path = str(path)
        self.field = field
        self.reason = reason
        super().__init__(f"{self.path}: {field}: {reason}")


class AssetError(EvsError, OSError):
    """Missing or unreadable file (CLI exit code 3)."""


class MissingAsset(AssetError):
    def __init__(self, paths):
        self.paths = [str(p) for p in paths]
        super().__init__("missing assets: " + ", ".join(self.paths))


class MissingCoarse(AssetError):
    def __init__(self, view_id):
        self.view_id = view_id
        super().__init__(f"no coarse rendering for augmented view {view_id!r}")
