import sys

from runner.cli import run

sys.exit(run())
