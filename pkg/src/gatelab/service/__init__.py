"""HTTP surface over the experiment drivers (FastAPI)."""

from .app import app, create_app

__all__ = ["app", "create_app"]
