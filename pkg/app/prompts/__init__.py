"""Prompt rendering for the two generation techniques."""
