# # Counting maps by gluing stars
#
# A star is a vertex with colored half-edges in cyclic order. Pairing
# half-edges of the same color glues the stars into a surface; its genus
# comes from Euler's formula V - E + F = 2 - 2g.

from mapgenus import Potential, Star, count_closed, count_rooted, enumerate_gluings, gue_moment_exact
from mapgenus.mapenum import gue_joint_moment

# One quartic star: two planar gluings and one on the torus.
quartic_star = [Star((1, 1, 1, 1), 0)]
print(enumerate_gluings(quartic_star).rows())

# Two stars X1X2X1X2. Among the connected gluings of labeled stars, six
# land on the torus.
abab = [Star((1, 2, 1, 2), 0), Star((1, 2, 1, 2), 1)]
table = enumerate_gluings(abab, filter=lambda g, ncomp: ncomp == 1)
print("connected gluings by genus:", table.rows())

# The same six show up in a Gaussian moment: E[(1/N tr ABAB)^2] has the
# N^-4 coefficient 6 + 1, the extra one from two separate tori.
print("E[(1/N tr ABAB)^2] in powers of 1/N^2:", gue_joint_moment([(1, 2, 1, 2)] * 2))

# ## Gaussian moments
#
# E[1/N tr X^{2p}] = sum_g eps_g(p) N^{-2g}; the genus-0 term is the Catalan
# number.
for p in range(1, 6):
    print(p, gue_moment_exact((1,) * (2 * p)))

# ## Rooted and closed counts for a potential
V = Potential(1, ((1, 1, 1, 1),))
print("rooted X^2 with one quartic vertex, genus 0:", count_rooted((1, 1), (1,), 0, V))
print("closed maps from one quartic vertex, genus 0 and 1:", count_closed((1,), 0, V), count_closed((1,), 1, V))
