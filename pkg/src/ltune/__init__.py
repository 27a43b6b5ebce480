"""Database knob tuning by Bayesian optimization in a learned latent space."""

__version__ = "0.1.0"
