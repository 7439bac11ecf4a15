#!/usr/bin/env python
"""
Main entry point for the selfpose3d command-line interface.
"""

import sys

from interfaces.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
