"""Reference tagger service speaking the qae /v1/tag wire protocol."""

from .backends import Backend, BackendConfig, EchoBackend, RuleBackend, build_backend
from .app import create_app

__all__ = ["Backend", "BackendConfig", "EchoBackend", "RuleBackend", "build_backend", "create_app"]
