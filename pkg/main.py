"""Compatibility wrapper so ``python main.py ...`` runs the ontodraft CLI."""

import sys

from app.cli import main  # noqa: F401

__all__ = ["main"]

if __name__ == "__main__":
    sys.exit(main())
