"""Telemetry compression, energy budgeting and power-control simulation for blade-mounted sensor nodes."""

from .core import CodecId, CompressedPacket, SampleBlock, SensorSuite, compute_raw_bandwidth, default_suite
from .codecs import decode_packet, encode_block, parse_packet

__version__ = "0.1.0"

__all__ = [
    "CodecId",
    "CompressedPacket",
    "SampleBlock",
    "SensorSuite",
    "compute_raw_bandwidth",
    "decode_packet",
    "default_suite",
    "encode_block",
    "parse_packet",
]
