"""Solve every stage of the reference scenario on the desk grids.

The 6-D horizontal game dominates (about 40 min on an 8-core desktop).
Stages whose stored config and inputs are unchanged are reused.

    python3 demos/build_artifacts.py [out_dir]
"""

import logging
import sys
import time
from pathlib import Path

from reachtrack import geometry as geo
from reachtrack.pipeline import build_artifacts

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / ".cache" / "artifacts"
t0 = time.perf_counter()
art = build_artifacts(geo.reference_scenario(), out)
print(f"artifacts in {out} after {time.perf_counter() - t0:.0f} s")
for name, meta in art.meta.items():
    print(f"  {name:10s} converged={meta.get('converged')} horizon={meta.get('horizon'):.2f} "
          f"wall={meta.get('wall_seconds')} s")
