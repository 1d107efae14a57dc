"""Exception hierarchy shared by all splatlab modules."""


class SplatlabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SplatlabError):
    """Input violates a documented invariant (range, shape, alignment, finiteness)."""


class SchemaError(SplatlabError):
    """A file does not follow its documented on-disk format."""


class ImageFormatError(SplatlabError):
    """An image file has an unsupported layout, bit depth, or is undecodable."""
