"""Entry point for running the command-line interface as a module."""

from .cli import cli

if __name__ == "__main__":
    cli()
