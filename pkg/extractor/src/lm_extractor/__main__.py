import sys

from lm_extractor.cli import main

sys.exit(main())
