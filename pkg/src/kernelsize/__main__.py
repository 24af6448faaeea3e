import sys

from kernelsize.cli import main

sys.exit(main())
