"""Non-unitary quantum walk sensing toolkit."""

from _qwsense import *  # noqa: F401,F403
from _qwsense import __version__  # noqa: F401
