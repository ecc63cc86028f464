"""Reference backend for the amodal-completion provider protocol."""

from .app import ServerThread, build_app, serve, stub_server_thread
from .config import BackendConfig

__version__ = "0.1.0"

__all__ = ["BackendConfig", "ServerThread", "build_app", "serve", "stub_server_thread"]
