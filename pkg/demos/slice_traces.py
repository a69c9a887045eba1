"""Recover the traces of all slices after a change of basis without forming the new tensor.

Run: python demos/slice_traces.py
"""

import numpy as np

from tensorjenn.fptensor import change_of_basis, random_symmetric, tensor_norm
from tensorjenn.numerics import FpContext
from tensorjenn.tscb import tscb, tscb_op_count

rng = np.random.default_rng(0)
n = 6
T = random_symmetric(n, rng)
V = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))

# The direct route builds (V (x) V (x) V).T, an O(n^4) computation, then reads off traces.
direct = np.einsum("iik->k", change_of_basis(T, V).data)
fast = tscb(T, V)
print("traces via the full change of basis:", np.round(direct[:3], 6), "...")
print("traces via the O(n^3) routine:      ", np.round(fast[:3], 6), "...")
print(f"largest difference: {np.max(np.abs(direct - fast)):.2e}\n")

print("The same computation with fewer mantissa bits:")
bound_scale = 14 * n ** 1.5 * np.linalg.norm(V) ** 3 * tensor_norm(T)
for p in (16, 24, 32, 40):
    err = np.max(np.abs(tscb(T, V, FpContext.emulated(p)) - direct))
    print(f"  p={p:2d}  error {err:.2e}   guaranteed bound {bound_scale * 2.0 ** -p:.2e}")

print("\nArithmetic operations grow like n^3:")
for m in (8, 16, 32, 64):
    print(f"  n={m:3d}  {tscb_op_count(m):>9d} ops")
