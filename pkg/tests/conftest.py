"""Test configuration — make hyphenated workstream directories importable."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# pytest loads conftest.py before collecting test modules, so this runs
# early enough for `from agent_01_taxonomy...` imports to work.
import workstreams  # noqa: E402

workstreams.register()
