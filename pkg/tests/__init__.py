"""Init file for minwave tests."""
