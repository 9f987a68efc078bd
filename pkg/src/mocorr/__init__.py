"""Motion correction toolkit: synthetic capture, fitting, motion prior, refinement."""

__version__ = "0.1.0"
