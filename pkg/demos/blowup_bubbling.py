"""
A blow-up run and its bubble
============================

Data shaped like a ground state that shrinks at the rate
lambda(t) = (1 - t)^2 concentrate in finite time.  The run stops once the
bubble is no longer resolved.  Along a sequence of selected times the
rescaled solution approaches +Q, the scale becomes small compared with the
distance to the blow-up time, and the remainder left after subtracting the
bubble and the radiation decreases.
"""

from wavemap_lab import diagnostics, modulation
from wavemap_lab.evolve import SolverConfig, evolve
from wavemap_lab.scenarios import build_rate_ansatz

config = SolverConfig(dr=2.5e-4, t_final=2.0, r_max=12.0, snapshot_stride=100,
                      spacing="geometric", support_tol=1e-6)
trace = evolve(build_rate_ansatz(1.0, config.make_grid()), config)
T = trace.t_plus()
print(f"stopped at t = {trace.t_end:.4f} ({trace.stop_reason}); fitted blow-up time T = {T:.4f}")

# radiation: cap the solution inside the backward cone and evolve the rest
t_ref = modulation.radiation_reference_time(trace, T)
radiation, cap_energy = modulation.radiation_trace(trace, t_ref)
print(f"radiation from t = {t_ref}, cap energy {cap_energy:.3f}")

times = diagnostics.select_times(trace, T, t_min=t_ref)
records = modulation.bubbling_extract(trace, times=times, T=T, radiation=radiation)
print("    t       lambda    lambda/(T-t)  dist to +Q  ||eps||")
for rec in records:
    print(f"{rec.t:.4f}  {rec.lam:.3e}  {rec.ratio:.4f}        {rec.distance:.4f}      {rec.remainder_norm:.3f}")
print("scale ratios decreasing:", modulation.ratios_decreasing(records))
