# # Free energy and its derivatives
#
# F^g is the generating series of closed maps of genus g. Differentiating in
# a coupling marks a vertex, so derivatives of F^g recover shifted counts.

import math
from fractions import Fraction

from mapgenus import Potential, closed_series, count_closed, free_energy

V = Potential(1, ((1, 1, 1, 1),))
F = free_energy(V, 2, 4)
for g, f in enumerate(F):
    print(f"F^{g} =", f)
    print("   equals the closed-map series:", f == closed_series(V, 4, g))

# The first coefficients are minus the number of closed maps made from one
# quartic vertex.
print(F[0][(1,)], F[1][(1,)], "vs", count_closed((1,), 0, V), count_closed((1,), 1, V))

# The order-k coefficient of d/dt F^0 is (-1)^(k+1) C^(k+1) / k!, where
# C^(k+1) counts closed planar maps with k + 1 labeled quartic vertices.
dF = F[0].derivative((1,))
print([dF[(k,)] for k in range(3)])
print([(-1) ** (k + 1) * Fraction(count_closed((k + 1,), 0, V), math.factorial(k)) for k in range(3)])

# Two colors with an interaction X1X2X1X2.
W = Potential(2, ((1, 2, 1, 2),))
print(free_energy(W, 1, 3))
