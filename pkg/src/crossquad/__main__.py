import sys

from crossquad.cli import main

sys.exit(main())
