"""Six scatterers, one persistent: MMV against single-view and migration imaging.

Five of the six scatterers are visible only on a sixth of the aperture,
with their windows interleaved; the sixth is isotropic.  Migration over
the full aperture favours the isotropic scatterer and smears the rest.  A
single sub-aperture sees only the scatterers visible in it, and its ℓ1
fit places spurious pixels.  The joint ℓ1,2 reconstruction over all views
recovers the support exactly.

Run from the repository root::

    python3 gallery/imaging_comparison.py
"""

from pathlib import Path

import numpy as np

from mmvsar.config import load_config
from mmvsar.experiments import run_experiment

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "imaging_comparison.json"


def bars(values, width=40):
    v = np.asarray(values, float)
    v = v / v.max()
    return ["#" * int(round(width * x)) for x in v]


out = run_experiment(load_config(CONFIG))
s = out.summary
print("true support (resolution units):", s["support_units"])

for name in ("mmv_row_norms", "smv_modulus", "migration"):
    cols, rows = out.tables[name]
    pos = [r[1] for r in rows]
    val = [r[2] for r in rows]
    truth = [r[3] for r in rows]
    print(f"\n{name}")
    for p, b, t in zip(pos, bars(val), truth):
        print(f"{p:+6.1f} {'*' if t > 0 else ' '} {b}")

for label in ("mmv", "smv"):
    m = s[label]["metrics"]
    m = m if isinstance(m, dict) else m.to_dict()
    print(f"{label}: exact={m['exact_match']} spurious={m['spurious']} missed={m['missed']}")
print("migration argmax is the isotropic scatterer:", s["migration"]["argmax_is_isotropic"])
