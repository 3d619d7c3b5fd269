"""Laboratory for reverse online guessing attacks on PAKE protocols."""

__version__ = "0.1.0"
