"""Exception hierarchy shared by the codecs, container and CLI."""


class CodecError(ValueError):
    """Base class for malformed or unsupported compressed data."""


class TruncatedPacketError(CodecError):
    """The bitstream ended before the decoder had read everything it needs."""


class UnknownCodecError(CodecError):
    pass


class HeaderError(CodecError):
    """Header fields are corrupt or inconsistent with the payload."""


class UnsupportedMagnitudeError(CodecError):
    """A value is too large for the fixed-width fields of the format."""


class ConfigError(ValueError):
    """Invalid scenario, profile or controller configuration."""
