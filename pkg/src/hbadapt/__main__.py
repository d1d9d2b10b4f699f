import sys

from hbadapt.cli import main

sys.exit(main())
