import sys

from torusdyn.cli import main

sys.exit(main())
