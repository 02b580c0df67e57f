import sys

from fracsolve.cli import main

sys.exit(main())
