"""Zero-shot exercise retrieval with hypothetical exercises."""

from ._hyex import *  # noqa: F401,F403
from ._hyex import HyexError, Side  # noqa: F401

__version__ = "0.1.0"
