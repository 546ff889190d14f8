"""Register the hyphenated workstream directories as importable packages.

``agent-01-taxonomy`` becomes ``agent_01_taxonomy`` and so on.  The
top-level aliases are bare namespace packages; their subpackages
(``algorithms``, ``src``) are found through the normal import machinery,
so cross-workstream imports such as
``from agent_01_taxonomy.algorithms.tree import build_tree`` work from any
entry point that calls :func:`register` first.
"""

from __future__ import annotations

import importlib.machinery
import importlib.util
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent

WORKSTREAMS: dict[str, Path] = {
    "agent_01_taxonomy": ROOT / "agent-01-taxonomy",
    "agent_02_data_pipeline": ROOT / "agent-02-data-pipeline",
    "agent_03_model": ROOT / "agent-03-model",
    "agent_04_synthetic_data": ROOT / "agent-04-synthetic-data",
    "agent_05_training": ROOT / "agent-05-training",
    "agent_06_orchestration": ROOT / "agent-06-orchestration",
}


def register() -> None:
    for alias, pkg_path in WORKSTREAMS.items():
        if alias in sys.modules:
            continue
        spec = importlib.machinery.ModuleSpec(alias, None, is_package=True)
        spec.submodule_search_locations = [str(pkg_path)]
        sys.modules[alias] = importlib.util.module_from_spec(spec)
