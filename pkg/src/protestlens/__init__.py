"""Protest detection toolkit: corpus construction, windowed-attention text and
image classifiers built on a small numpy autodiff engine, training and inference."""

__version__ = "0.1.0"
