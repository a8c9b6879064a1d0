# app/utils/__init__.py
"""
Utilitaires - Logger et helpers
"""
