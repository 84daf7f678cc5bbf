"""Domain models: ontologies, evaluation cases and shared value types."""
