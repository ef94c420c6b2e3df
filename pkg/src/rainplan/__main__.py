import sys

from rainplan.harness.cli import main

sys.exit(main())
