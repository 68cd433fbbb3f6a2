"""Heterogeneous coded matrix multiplication (HCMM) toolkit.

Load allocation for straggler-prone heterogeneous clusters, random linear
and LT coding of matrix rows, Monte Carlo completion-time simulation,
budget-constrained machine selection and a local master/worker emulator.
"""

__version__ = "0.1.0"
