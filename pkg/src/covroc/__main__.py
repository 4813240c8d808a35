import sys

from covroc.cli import main

sys.exit(main())
