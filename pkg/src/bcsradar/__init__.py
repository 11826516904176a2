"""Block compressive sensing toolkit for distributed MIMO radar simulation.

Subpackages cover the full pipeline: scenario definition (`scene`), basis
construction (`dictionary`), measurement matrices and their optimal design
(`measurement`), block-sparse recovery (`recovery`), transmit energy
allocation (`power`), dense LP/QP/eigen kernels (`numerics`), and the
Monte-Carlo experiment harness (`experiments`).
"""

__version__ = "0.1.0"
