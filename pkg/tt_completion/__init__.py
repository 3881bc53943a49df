"""Low-rank tensor train completion: convex TT-ADMM and randomized TT-RALS."""

__version__ = "0.1.0"
