import sys

from chromalight.cli import main

sys.exit(main())
