"""Cell probe lower bound laboratory: executable encoders, decoders and protocols."""

from __future__ import annotations

__version__ = "0.1.0"
