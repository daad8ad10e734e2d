"""
The ground state and its energy
===============================

Q(r) = 2 arctan r is the harmonic map of degree one.  Its energy is 4, and
half of it sits inside the unit ball.  The same profile can be recovered
from the first-order Bogomolny equation r Q' = sin Q, which is how profiles
for other targets are built.
"""

import numpy as np

from wavemap_lab.fields import RadialGrid, TargetGeometry, bogomolny_split, classify_degree, energy
from wavemap_lab.static import energy_of_ground_state, ground_state

# a fine uniform grid; the harmonic tail beyond r_max is added analytically
grid = RadialGrid.uniform(200.0, h=5e-4)
Q = ground_state().state(grid)
print("degree of Q:", classify_degree(Q))
print("E(Q) on the grid:          ", energy(Q).total)
print("E(Q) with the tail:        ", energy(Q, tail=True).total)
print("E_0^1(Q):                  ", energy(Q, 0.0, 1.0).total)

# energy = kinetic + Bogomolny defect + topological charge
kin, defect, topo = bogomolny_split(Q, tail=True)
print(f"kinetic {kin:.1e}, defect {defect:.1e}, charge {topo:.6f}")

# the ODE route reproduces the closed form, here for ell = 2
r = np.geomspace(1e-3, 1e3, 7)
print("ell = 2, ODE minus 2 arctan(r^2):", ground_state(2, method="ode")(r) - 2 * np.arctan(r**2))

# other targets: the Yang-Mills reduction has ground-state energy 8/3 for ell = 2
print("Yang-Mills ground-state energy:", energy_of_ground_state(2, TargetGeometry.yang_mills()))
