"""
Time convergence of FI and PC(2) on an ellipse
===============================================

The exact field is a train of heat-vortex pulses from ten sources outside
the domain plus three oscillating potential flows.  We march the boundary
integral equation with the fully implicit scheme and with the
predictor-corrector scheme, halve the step a few times and watch the error
at interior sample points drop by about four per halving.
"""
import time

from csie2d import CurveSpec, TimeScheme, discretize, error_report, march, provider

grid = discretize(CurveSpec.ellipse(0.8, 0.4), 96)
T = 1.0

# PC(2) needs a few dozen steps per unit time before its error settles into
# the asymptotic regime (the pulses switch every 0.1 time units)
for text, ladder in (("fi", (20, 40, 80)), ("pc:k=2", (80, 160, 320))):
    print(f"\nscheme {text}")
    prev = None
    for N in ladder:
        t0 = time.perf_counter()
        state = march(grid, TimeScheme.parse(text, N=N, T=T), provider())
        err = error_report(state, T).error
        ratio = f"{prev / err:5.2f}" if prev else "    -"
        print(f"  N = {N:3d}   error {err:.3e}   ratio {ratio}   "
              f"GMRES its {state.report.mean_iterations():5.1f}   {time.perf_counter() - t0:.1f}s")
        prev = err

# FI solves one coupled system per step (iterations grow with the number of
# nodes); PC splits it into two second-kind solves that need few iterations.
