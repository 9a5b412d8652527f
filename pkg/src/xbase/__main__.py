import sys

from xbase.cli import main

sys.exit(main())
