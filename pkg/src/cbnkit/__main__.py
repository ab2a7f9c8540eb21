import sys

from cbnkit.cli import main

sys.exit(main())
