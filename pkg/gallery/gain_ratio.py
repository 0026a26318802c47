"""How much do multiple views help the interaction coefficient?

For a support S on the imaging grid, the single-view coefficient I1 sums
the worst-case cross-correlations of G, while the multiple-view one INv
lets the rows of X decorrelate them.  With orthogonal rows the ratio
I1 / INv grows with |S| but stays below sqrt(|S|).

    python3 gallery/gain_ratio.py
"""

import numpy as np

from mmvsar.geometry import gotcha_geometry, imaging_grid, make_orthogonal_rows, segment_aperture
from mmvsar.resolution import interaction_multi, interaction_single
from mmvsar.sensing import build_sensing_matrix

geom = gotcha_geometry(element_spacing=5.0)
grid = imaging_grid(geom, 40.0, 0.25)
sub = segment_aperture(geom, 75.0, 50.0, n_views=1)[0]
G = build_sensing_matrix(geom, grid, sub).entries
rng = np.random.default_rng(0)

print(" |S|  median I1/INv  max ratio/sqrt|S|")
for size in (4, 9, 16, 36):
    ratios = []
    for trial in range(50):
        S = rng.choice(grid.n_points, size, replace=False)
        X = make_orthogonal_rows(S, 50, seed=trial, n_rows=grid.n_points).values
        i1 = interaction_single(G, S).value
        inv = interaction_multi(G, X, S, mode="closed_form").value
        ratios.append(i1 / inv)
    ratios = np.array(ratios)
    print(f"{size:4d}  {np.median(ratios):13.3f}  {ratios.max() / np.sqrt(size):17.3f}")
