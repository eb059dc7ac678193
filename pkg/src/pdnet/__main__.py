import sys

from pdnet.cli import main

sys.exit(main())
