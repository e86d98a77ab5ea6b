"""
Run script for matchci
"""

import os
import sys

# Make the package importable when run from a checkout
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from matchci.main import main

if __name__ == "__main__":
    sys.exit(main())
