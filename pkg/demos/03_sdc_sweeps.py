"""
Spectral deferred correction on a circle
=========================================

SDC runs PC(2) on the right Radau points of each step and then corrects the
result with sweeps driven by the collocation residual.  Each sweep should buy
roughly one order until the collocation error is reached.
"""
from csie2d import CurveSpec, TimeScheme, discretize, error_report, march, provider

grid = discretize(CurveSpec.circle(0.5), 64)
T, k = 1.0, 3

print("  N   Nk    " + "   ".join(f"SDC{j}     " for j in range(3)))
for N in (16, 32, 64):
    errs = []
    for sweeps in range(3):
        state = march(grid, TimeScheme("SDC", N, T, k, sweeps), provider())
        errs.append(error_report(state, T).error)
    print(f"{N:3d}  {N * k:3d}   " + "   ".join(f"{e:.3e}" for e in errs))
