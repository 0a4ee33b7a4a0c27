"""Python access to the intentloop decoder, generator and statistics."""

from ._intentloop import *  # noqa: F401,F403
from ._intentloop import IntentLoopError, __doc__  # noqa: F401

__version__ = "0.3.0"
