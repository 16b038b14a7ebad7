import sys

from imbcredit.cli import main

sys.exit(main())
