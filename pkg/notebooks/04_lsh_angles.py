"""What random-hyperplane codes preserve.

For hyperplanes through the data mean, two points disagree on a bit with
probability angle / pi, so the fraction of differing bits estimates the
angle between the centred vectors. This is the baseline that learned codes
are compared against.
"""
import numpy as np

from shl.evalkit import lsh_encode, lsh_train

rng = np.random.default_rng(0)
d, n_bits = 20, 256
model = lsh_train(d, n_bits, seed=1)

x = rng.normal(size=d)
x /= np.linalg.norm(x)
z = rng.normal(size=d)
z -= (z @ x) * x
z /= np.linalg.norm(z)

print("angle/pi   fraction of differing bits")
for frac in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
    angle = frac * np.pi
    other = np.cos(angle) * x + np.sin(angle) * z
    diff = np.mean(lsh_encode(model, x) != lsh_encode(model, other))
    print(f"{frac:8.2f}   {diff:.3f}")
