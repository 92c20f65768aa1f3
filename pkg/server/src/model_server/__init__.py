from .app import create_app
from .backend import TransformerBackend
from .config import BUILTIN_MODEL_ID, ServerConfig

__all__ = ["BUILTIN_MODEL_ID", "ServerConfig", "TransformerBackend",
           "create_app"]
__version__ = "0.1.0"
