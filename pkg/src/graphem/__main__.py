import sys

from graphem.cli import main

sys.exit(main())
