"""Fully dynamic bin packing with bounded migration."""

from .core import Event, Item, Packing, Params, validate_packing

__version__ = "0.1.0"

__all__ = ["Event", "Item", "Packing", "Params", "validate_packing", "__version__"]
