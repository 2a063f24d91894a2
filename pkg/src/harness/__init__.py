"""Command-line layer: run configurations, commands and the btc-lab entry point."""
