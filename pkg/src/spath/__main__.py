import sys

from spath.cli import main

sys.exit(main())
