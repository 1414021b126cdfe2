"""Split Gaussian fields and Gaussian entire function toolkit."""

__version__ = "0.1.0"
