"""HTTP/WebSocket service wrapping the control stack.

create_app builds a FastAPI application exposing the model and scenario
documents over REST, batch simulation and self-check endpoints, and a
binary WebSocket adapter bridged onto the framed TCP session.
"""

from .app import ServiceConfig, create_app

__all__ = ["ServiceConfig", "create_app"]
