"""Toy weight-decay sweep: five lambdas, two log-log panels.

    python scripts/repro_fig5.py                 # K = 1e6, about 3 minutes on one core
    python scripts/repro_fig5.py --steps 1e9     # the full horizon, overnight
"""

import sys

from adamw_shampoo.cli import cli_main

if __name__ == "__main__":
    sys.exit(cli_main(["repro-fig5", *sys.argv[1:]]))
