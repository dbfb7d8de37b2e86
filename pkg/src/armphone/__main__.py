import sys

from armphone.cli import main

sys.exit(main())
