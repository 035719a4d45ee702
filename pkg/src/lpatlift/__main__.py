import sys

from lpatlift.cli import main

sys.exit(main())
