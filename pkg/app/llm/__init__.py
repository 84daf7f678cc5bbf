"""Chat-completions gateway."""
