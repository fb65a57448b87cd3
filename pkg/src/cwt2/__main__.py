import sys

from cwt2.cli import main

sys.exit(main())
