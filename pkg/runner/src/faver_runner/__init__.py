"""Out-of-process host for generated reference models."""

from .host import LoadError, load_model, serve

__all__ = ["LoadError", "load_model", "serve"]
