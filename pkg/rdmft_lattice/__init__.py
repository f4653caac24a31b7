"""
Exact interaction functionals of momentum occupation numbers for small
translation-invariant lattice models.
"""

__version__ = "0.1.0"
