"""Init file for minwave package."""
