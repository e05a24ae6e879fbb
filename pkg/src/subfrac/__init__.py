"""Fractional Orlicz-Sobolev functionals on Carnot groups."""

__version__ = "0.1.0"
