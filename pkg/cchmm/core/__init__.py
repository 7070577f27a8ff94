from cchmm.core.config import get_settings
from cchmm.core.errors import CchmmError

__all__ = ["CchmmError", "get_settings"]
