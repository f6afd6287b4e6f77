import sys

from headwayrl.main import main

sys.exit(main())
