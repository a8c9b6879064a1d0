# app/__init__.py
"""
Loop Dimerization Lab - Simulation et vérification de la représentation en boucles
"""
