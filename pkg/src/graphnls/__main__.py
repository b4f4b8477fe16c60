import sys

from graphnls.cli import main

sys.exit(main())
