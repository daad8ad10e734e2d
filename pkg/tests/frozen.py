"""Regression constants measured once and frozen.

Each value is a measured quantity rounded in the safe direction; the
comment gives the measurement it came from.
"""

# exterior-energy floors, min over t in [0, 5] (51 times) and the five
# FREE_FAMILY members at h = 1e-2: measured 0.71474 (d = 4),
# 0.72841 (d = 8), 0.71364 (2d repulsive)
FLOOR_D4 = 0.714
FLOOR_D8 = 0.728
FLOOR_REPULSIVE_2D = 0.713

# norm comparison h_norm^2 <= C * energy for degree-0 bumps with E <= 7.6:
# largest measured ratio 1.426 (r_gauss at E = 7.6, h = 2e-3, r_max = 12)
NORM_COMPARISON_C = 1.5

# H_1 comparison ||psi - pi||^2_{H(r >= r0)} <= C E_{r0}^inf when
# E_{r0}^inf < 0.4; sin^2 x >= x^2 / 2 on the trapped range gives C <= 2
H1_COMPARISON_C = 2.0

# |E(psi) - E(phi) - E(Q) - E(eps)| at the last extraction time of the
# nu = 1 run (h = 2.5e-4): measured 0.0289
PYTHAGOREAN_DEFECT = 0.05

# glued search: smallest bisected amplitudes for delta in {0.25, 0.5, 1}
# all sit in [1.08, 1.10] for s = 0.2
GLUED_AMPLITUDE_RANGE = (1.0, 1.2)
