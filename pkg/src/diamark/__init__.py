"""Detection and subpixel localization of diagonal cross markers."""

__version__ = "0.1.0"
