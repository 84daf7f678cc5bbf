"""Offline structural pitfall scanning."""
