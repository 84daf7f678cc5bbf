"""Run summaries and rendered report tables."""
