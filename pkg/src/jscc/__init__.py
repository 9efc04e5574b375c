"""Minimal-delay joint source-channel coding by recursive quantization over AWGN."""

__version__ = "0.1.0"
