"""Benign vs. non-benign overfitting of linear classifiers on Gaussian mixtures."""

__version__ = "0.1.0"
