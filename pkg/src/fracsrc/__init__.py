"""Forward and inverse source problems for time-fractional diffusion."""

__version__ = "0.1.0"
