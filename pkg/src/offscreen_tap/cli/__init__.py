"""offscreen_tap.cli - Command-line interface."""
