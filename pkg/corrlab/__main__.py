"""python -m corrlab"""

import sys

from .app.main import main

sys.exit(main())
