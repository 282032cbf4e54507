from bn2o.cli import main
import sys

sys.exit(main())
