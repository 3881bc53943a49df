#!/usr/bin/env python3
"""
Launcher for the tensor train completion experiments
"""
import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from tt_completion.cli import main

if __name__ == "__main__":
    sys.exit(main())
