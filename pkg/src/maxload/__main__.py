import sys

from maxload.cli import main

sys.exit(main())
