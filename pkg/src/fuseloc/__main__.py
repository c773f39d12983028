import sys

from fuseloc.cli import main

sys.exit(main())
