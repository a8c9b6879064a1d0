"""
Routes de l'API
"""
from . import bounds, contours, diagonalization, enumeration, simulations

__all__ = ['bounds', 'contours', 'diagonalization', 'enumeration', 'simulations']
