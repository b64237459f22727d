"""Command-line interface for the homogenized eigenvalue laboratory."""
