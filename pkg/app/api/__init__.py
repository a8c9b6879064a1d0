# app/api/__init__.py
"""
Module API - Routes et endpoints
"""
