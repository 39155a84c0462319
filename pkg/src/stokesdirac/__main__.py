import sys

from .driver import cli_main

sys.exit(cli_main())
