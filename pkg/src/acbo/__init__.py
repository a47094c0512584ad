"""Actor-critic optimization of black-box simulation models."""
__version__ = "0.1.0"
