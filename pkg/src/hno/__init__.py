"""Hilbert and Fourier neural operators in plain numpy/scipy.

Submodules
----------
numerics
    DFT conventions, mode truncation/padding and per-mode channel mixing.
analytic
    Discrete Hilbert transform, analytic signal, envelope and phase.
operator
    FNO/HNO layers, the lift/layers/project model and checkpoint files.
training
    Relative-L2 loss, hand-written reverse pass, gradient check, Adam and the
    training loop.
datagen
    Gaussian random fields and the Burgers, Darcy and Lorenz-63 generators.
cli
    The ``hno`` command-line tool.
"""
from . import analytic, datagen, numerics, operator, training

__version__ = "0.1.0"

__all__ = ["analytic", "datagen", "numerics", "operator", "training", "__version__"]
