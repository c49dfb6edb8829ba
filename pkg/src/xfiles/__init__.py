"""Performance forensics toolkit for X11 thin-client installations."""

__version__ = "0.1.0"
