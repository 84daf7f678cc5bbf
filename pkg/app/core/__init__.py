"""Core utilities for configuration, logging and errors."""
