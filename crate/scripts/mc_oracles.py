"""Monte Carlo reference values (numpy, fixed seed) frozen into the Rust tests."""
import numpy as np

rng = np.random.default_rng(20240607)
N = 10_000_000


def mixture_mc(mx, sx, my, sy, k):
    x = rng.normal(mx, sx, N)
    y = rng.normal(my, sy, N)
    v = np.exp(x) * y + k
    v = v[v > 0]
    return v.mean(), v.std(ddof=1) / np.sqrt(v.size), v.size / N


for args in [(0, 0.2, 1, 0.5, -0.8), (0.1, 0.3, 2, 1, -1)]:
    print("mixture", args, *mixture_mc(*args))

z = rng.normal(0.5, 1.0, N)
from scipy.special import log_ndtr
psi = z + np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - log_ndtr(z))
print("E psi N(0.5,1)", psi.mean(), psi.std(ddof=1) / np.sqrt(N))

z = rng.normal(1.0, 1.0, N)
z = z[z > 0]
print("trunc(1,1)", z.mean(), z.std(ddof=1) / np.sqrt(z.size))
