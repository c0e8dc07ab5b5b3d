import sys

from memstab.cli import main

sys.exit(main())
