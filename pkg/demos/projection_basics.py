"""
Projecting predictions onto linear balances
===========================================

A reactor ``B + E -> EB`` has three inlet variables ``(T, F_B, F_E)`` and three
outlet flows ``(F_EB, F_B_out, F_E_out)``.  Two atom balances tie them together
and can be written as ``A x + B y = b``.  Here we build the closed-form
projection, push an arbitrary guess through it, and compare the result
with a direct solve of the equality-constrained least-squares problem.
"""

import numpy as np

from kkt_hpinn import ConstraintSpec, apply_projection, build_projection, violation

# rows: F_B - F_E - (F_B_out - F_E_out) = 0  and  F_B - F_EB - F_B_out = 0
spec = ConstraintSpec(A=[[0, 1, -1], [0, 1, 0]], B=[[0, -1, 1], [-1, -1, 0]], b=[0, 0])
proj = build_projection(spec)

print("A* =\n", proj.a_star)
print("B* =\n", proj.b_star.round(6))
print("b* =", proj.bias_star)

###############################################################################
# B* is the orthogonal projector onto the null space of B, so it is
# symmetric, idempotent and annihilated by B.

print("|B B*|      =", np.abs(spec.B @ proj.b_star).max())
print("|B* B* - B*| =", np.abs(proj.b_star @ proj.b_star - proj.b_star).max())

###############################################################################
# A deliberately bad guess: the network thinks nothing reacted and the feeds
# leave untouched, but with a 10 % error on the benzene outlet.

x = np.array([620.0, 2.0, 1.5])
guess = np.array([0.0, 2.2, 1.5])
fixed = apply_projection(proj, x, guess)
print("guess     ", guess, "violation", violation(spec, x[None], guess[None])[0])
print("projected ", fixed, "violation", violation(spec, x[None], fixed[None])[0])

###############################################################################
# The same point from the KKT system of ``min |y - guess|^2 s.t. Ax + By = b``.

m, nl = spec.B.shape
K = np.block([[np.eye(nl), spec.B.T], [spec.B, np.zeros((m, m))]])
rhs = np.concatenate([guess, spec.b - spec.A @ x])
direct = np.linalg.solve(K, rhs)[:nl]
print("KKT solve ", direct, "max difference", np.abs(direct - fixed).max())

###############################################################################
# Projecting an already feasible point does nothing.

print("idempotent:", np.allclose(apply_projection(proj, x, fixed), fixed, atol=1e-14))
