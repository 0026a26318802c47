"""Recovering a scattering tensor from a single far-field direction.

A far-field observation only sees the part of the tensor transverse to
the line of sight: the six-entry data row has rank three.  The
least-Frobenius-norm tensor reproducing the data is exactly that
transverse part, P rho P, with P the projector orthogonal to the
viewing direction.

    python3 gallery/polarimetric_recovery.py
"""

import numpy as np

from mmvsar.polarimetric import (gamma_matrix, projection_eigenbasis, recover_tensor_minnorm,
                                 tensor_to_row)

rng = np.random.default_rng(1)
A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
rho = A + A.T

n = rng.standard_normal(3)
n[2] = abs(n[2])
n /= np.linalg.norm(n)
beta = np.sqrt(1.0 - n[0] ** 2 - n[1] ** 2)
gamma = gamma_matrix(n[0], n[1], beta)

x = tensor_to_row(rho) @ gamma.entries
est = recover_tensor_minnorm(x, gamma, projection_eigenbasis(n))

P = np.eye(3) - np.outer(n, n)
print("rank of Gamma:", np.linalg.matrix_rank(gamma.entries))
print("data reproduced:", np.allclose(tensor_to_row(est.matrix) @ gamma.entries, x))
print("recovered tensor equals P rho P:", np.allclose(est.matrix, P @ rho @ P))
print("component along the view:", abs(n @ est.matrix @ n))
