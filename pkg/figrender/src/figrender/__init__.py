"""Figure rendering for lmgquench CSV output."""

from .render import FigureSpec, render
from .tables import EmptyDataError, MissingColumnError

__version__ = "0.1.0"
