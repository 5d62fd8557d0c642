#!/usr/bin/env python3
"""
hardcore.py: Gibbs measures of four-state hard-core models on Cayley trees
- uniqueness certificates by interval narrowing
- translation-invariant and period-2 boundary laws (diamond)
- stick / gun / key boundary laws
- exact small-tree compatibility checks
"""

from __future__ import annotations

import sys

from src import cli

if __name__ == "__main__":
    sys.exit(cli.main())
