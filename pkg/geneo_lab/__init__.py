"""
GENEO Lab Package
Tools for building group-equivariant operators as typed string diagrams, measuring
observer-relative surrogate distances and complexities between them, and training
interpretable surrogate models of a black-box image classifier.
"""

__version__ = '0.1.0'
