"""Random-matrix laboratory for softmax attention at initialisation."""

__version__ = "0.1.0"
