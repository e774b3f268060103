import sys

from augsel.cli import main

sys.exit(main())
