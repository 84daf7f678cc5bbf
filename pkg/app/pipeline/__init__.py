"""Generation runs: orchestration and run-directory persistence."""
