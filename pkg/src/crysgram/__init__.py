"""crysgram: coordinate-free crystal tokenization, transformer regression,
and grid-based porosity analysis."""

__version__ = "0.1.0"
