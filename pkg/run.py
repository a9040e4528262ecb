#!/usr/bin/env python3
"""
Runner script for the spin-qubit anisotropy simulator
"""

import os
import sys

# Add the repository root to the path so `src` imports resolve
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.main import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⏹️  Execution interrupted by user")
        sys.exit(130)
