import sys

from pl_runtime.cli.main import main

sys.exit(main())
