"""
HessCraft v1.0
Sparse Hessians of scalar functions by edge pushing

Entry point for the command-line tool
"""

__version__ = "1.0.0"

import sys
from pathlib import Path

# Add current directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))


def main(argv=None):
    """Run the CLI and return its exit code."""
    from cli import main as cli_main

    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
