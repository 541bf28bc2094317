"""Offline extractor that turns video frames into seedgate fixture sets.

The bridge owns everything model-specific: image decoding, preprocessing,
tokenization, and autodiff through attention layers. Its only contract with
the engine is the byte-exact fixture/manifest format documented in the
engine's docs/formats.md.
"""

__version__ = "0.1.0"
