"""Independent reference computations used by several test modules."""
import itertools
import math

import numpy as np

from pauli_crystals.orbitals import ho_orbital_eval, ylm_eval


def orbital_scalar(basis, index, point):
    if basis.geometry.is_sphere:
        x, y, z = point
        return ylm_eval(index[0], index[1], math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x))
    return ho_orbital_eval(basis.geometry, index, point)


def permutation_determinant(basis, points):
    """det[psi_k(x_j)] as the signed sum over all n! permutations."""
    n = basis.n
    table = [[orbital_scalar(basis, idx, p) for p in points] for idx in basis.indices]
    total = 0.0
    for perm in itertools.permutations(range(n)):
        # parity by counting inversions
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = -1.0 if inv % 2 else 1.0
        for k in range(n):
            term = term * table[k][perm[k]]
        total += term
    return total


def permutation_log_prob(basis, points):
    det = permutation_determinant(basis, points)
    return 2.0 * math.log(abs(det)) if det != 0 else -math.inf


def closed_form_1d_pair(x1, x2):
    """log|Psi|^2 for two 1D fermions (a = 1) in orbitals 0 and 1, no 1/2! factor."""
    # psi0 psi1' - psi1 psi0' = sqrt(2)/sqrt(pi) (x2 - x1) exp(-(x1^2 + x2^2)/2)
    amp = math.sqrt(2.0 / math.pi) * (x2 - x1) * math.exp(-0.5 * (x1**2 + x2**2))
    return 2.0 * math.log(abs(amp))
