import sys

from .harness_toolkit.hx_cli import main

sys.exit(main())
