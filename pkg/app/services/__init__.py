# app/services/__init__.py
"""
Services métier - modèle de chaîne, boucles, oracles exacts, échantillonnage, bornes
"""
