"""Mock OpenAI-compatible chat-completions backend."""
