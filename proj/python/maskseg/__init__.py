"""Masked-loss U-Net segmentation on incomplete labels."""

import sys

from ._core import *  # noqa: F401,F403
from ._core import cli as _cli

__all__ = [name for name in dir() if not name.startswith("_")]


def main() -> int:
    return _cli(sys.argv[1:])
