"""Live session service: event-sourced engine plus its network front end."""

from .engine import ServiceError, SessionConfig, SessionEngine
from .server import create_app

__all__ = ["ServiceError", "SessionConfig", "SessionEngine", "create_app"]
