"""Exception types shared across the package."""


class PagesegError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(PagesegError):
    """An array argument has incompatible dimensions or channel count."""


class EmptyMask(PagesegError):
    """A binary mask required to contain foreground pixels is empty."""


class EmptyDataset(PagesegError):
    """An operation requiring at least one record received none."""


class ParseError(PagesegError):
    """A structured text file failed to parse.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif path is not None:
            where += " "
        super().__init__(where + message)


class MissingImage(PagesegError):
    """A referenced image file could not be opened."""


class MissingPrediction(PagesegError):
    """Evaluation received ground truth without a matching prediction."""

    def __init__(self, image_ids):
        self.image_ids = sorted(image_ids)
        super().__init__(
            "missing predictions for %d image(s): %s"
            % (len(self.image_ids), ", ".join(self.image_ids))
        )


class ModelFileError(PagesegError):
    """A model file is truncated, corrupt, or has an unknown format."""
