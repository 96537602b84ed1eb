# # Solving the loop equations
#
# SDSolver builds every moment coefficient from the loop equations alone, as
# exact truncated power series in the couplings. It never enumerates a map;
# here we set it against the enumerator anyway.

from fractions import Fraction

from mapgenus import Potential, SDSolver, limit_equation_residual, rooted_series
from mapgenus.sdsolver import evaluate_series, min_genus

V = Potential(1, ((1, 1, 1, 1),))
solver = SDSolver(V, 4, max_degree=6)

mu2 = solver.mu((1, 1))
print("mu(X^2) =", mu2)
print("agrees with enumeration:", mu2 == rooted_series((1, 1), V, 4, 0))

for g in (1, 2):
    print(f"I_{g}(X^4) =", solver.term(g, (1, 1, 1, 1)))

# Correlators of l traces vanish below genus min_genus(l).
print([min_genus(l) for l in range(1, 6)])
print("I_0(X^2 (x) X^2) =", solver.I(0, (1, 1), (1, 1)))
print("I_1(X^2 (x) X^2) =", solver.I(1, (1, 1), (1, 1)))

# The residual of the loop equation vanishes exactly.
print(limit_equation_residual(solver, (1, 1), ((1, 1),), 1))

# ## Numbers
#
# At t = 1/20 the series is evaluated after a conformal change of variable
# that moves the nearest singularity, at t = -1/48, to the unit circle.
big = SDSolver(V, 20, max_degree=4)
t = (Fraction(1, 20),)
for w in [(1, 1), (1, 1, 1, 1)]:
    value, tail = evaluate_series(big.mu(w), t)
    print(w, round(value, 10), "tail estimate", tail)
