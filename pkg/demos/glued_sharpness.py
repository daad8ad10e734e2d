"""
Blow-up just above the threshold
================================

The threshold 2 E(Q) is sharp.  A degree-one blow-up datum inside r < 2 is
glued to a reversed ground state pi - Q(lambda r) outside, with lambda
chosen so the two pieces match at r = 2.  The result has degree zero,
energy a little above 8, and still concentrates before any signal from the
gluing region reaches the origin.
"""

from wavemap_lab.cli import SHARPNESS_SOLVER
from wavemap_lab.evolve import SolverConfig, evolve
from wavemap_lab.fields import classify_degree, energy
from wavemap_lab.scenarios import build_glued_threshold_data, ratio_windows

config = SolverConfig(**SHARPNESS_SOLVER)
data, params = build_glued_threshold_data(0.5, config.make_grid(), return_params=True)
print(f"kick amplitude {params.amplitude:.4f}, lambda_glue {params.lambda_glue:.6f}, "
      f"matching residual {params.matching_residual:.1e}")
print("degree:", classify_degree(data), " energy:", round(energy(data, tail=True).total, 4))

trace = evolve(data, config)
print(f"{trace.stop_reason} at t = {trace.t_end:.4f}, lambda = {trace.series['lambda'][-1]:.2e}")
t, ratio = ratio_windows(trace, 10)
for ti, q in zip(t, ratio):
    print(f"  t = {ti:.4f}   lambda/(T-t) = {q:.4f}")
