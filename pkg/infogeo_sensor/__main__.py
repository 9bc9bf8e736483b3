"""Allow running as: python -m infogeo_sensor"""

import sys

from .cli import main

sys.exit(main())
