import sys

from cimimo.cli import main

sys.exit(main())
