#!/usr/bin/env python
"""wattlens command-line entry point."""
import sys
from pathlib import Path


BASE_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(BASE_DIR / 'src'))
sys.path.insert(0, str(BASE_DIR))


def main():
    try:
        from cli.runner import run_cli
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the wattlens CLI. Are the requirements installed "
            "and available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == '__main__':
    main()
