"""The smooth window that turns a continuous lambda_bar into a basis count,
and the orthogonality of the two series bases.

Prints the weights on the symmetric grid for a few lambda_bar, the window mass
(which the variational objective relies on being increasing), and the largest
off-diagonal entry of the quadrature Gram matrices.
"""

from infkan import basis as B
from infkan.autodiff import Tensor
from infkan.window import (WindowParams, effective_order, positions, weight_function,
                           window_mass, window_values)

for lam in (0.5, 1.3, 2.0, 3.7):
    p = WindowParams(Tensor(lam), beta=2.0, gamma=1.0, side="symmetric")
    K = effective_order(p)
    w = window_values(p).data
    cells = "  ".join(f"{x:+.0f}:{v:.3f}" for x, v in zip(positions(K, p.side), w))
    print(f"lambda_bar {lam:3.1f}  K={K:2d}  mass {window_mass(p):6.3f}  {cells}")

print("\nshoulder: w(|x| = lambda_bar) for gamma = 1")
for lam in (1.0, 2.5, 7.0):
    print(f"  lambda_bar {lam}: {weight_function(lam, lam, beta=3.0):.6f}")

print("\nGram matrix off-diagonals")
for fam, n in ((B.BasisFamily("chebyshev"), 8), (B.BasisFamily("fourier"), 9)):
    print(f"  {fam}: n={n}  {B.check_orthogonality(fam, n):.1e}")
