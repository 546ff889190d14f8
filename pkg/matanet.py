#!/usr/bin/env python3
"""Launch the MATANet command line (``python matanet.py --help``)."""
import sys

import workstreams

if __name__ == "__main__":
    workstreams.register()
    from agent_06_orchestration.src.cli import main

    sys.exit(main())
