"""Hardy space infinite elements for plane-strain elastic waveguides."""

__version__ = "0.1.0"
