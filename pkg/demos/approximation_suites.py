"""The approximation facts behind adaptive piecewise bases, checked numerically.

1. Step and piecewise-linear approximants of f(t) = sin(3t) + t^2 improve as
   the number of knots n grows, and the piecewise-linear one is rebuilt
   exactly from shifted ReLUs.
2. The mean-field shortcut E[f(x)] ~ f(E[x]) misses a curvature term: for
   f = x^2 and x ~ N(mu, s^2) the gap is exactly s^2.
"""

import numpy as np

from infkan import proptests as P

t = np.linspace(-1, 1, 2001)
f = P.reference_function
print("  n   step error   linear error   relu rebuild vs linear")
for n in P.DEFAULT_NS:
    step = P.sup_error(f, P.step_approximant, n, t)
    lin = P.sup_error(f, P.linear_approximant, n, t)
    rebuild = np.max(np.abs(P.relu_reconstruction(f, n, t) - P.linear_approximant(f, n, t)))
    print(f"{n:3d}   {step:.3e}    {lin:.3e}      {rebuild:.1e}")

rep = P.run_convergence_suite()
print(f"\nconvergence suite over {len(rep.children)} checks: passed={rep.passed}, "
      f"worst {rep.worst:.1e}")

first = P.run_firstorder_suite()
print("\nfirst-order gap E[f(x)] - f(mu), mu = 0.5")
for r in first.rows:
    print(f"  f={r['f']:6s} s={r['s']:.3f}  gap {r['gap']:+.4f} +- {r['stderr']:.4f}")
print(f"passed={first.passed}")
