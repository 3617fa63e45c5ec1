"""Local Fourier analysis for overlapping block smoothers on triangular grids."""

__version__ = "0.1.0"
