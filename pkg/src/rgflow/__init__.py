"""Heat-kernel renormalization of Feynman graph weights: homotopy RG flow,
counterterms and one-loop beta functions for scalar theories and the
two-dimensional sigma model."""

__version__ = "0.1.0"
