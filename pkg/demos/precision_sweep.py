"""How the forward error of the decomposition shrinks as mantissa bits are added.

Run: python demos/precision_sweep.py
"""

import numpy as np

from tensorjenn import FpContext, decompose_fp, generate_instance, match_factors
from tensorjenn.errors import PrecisionTooLow
from tensorjenn.jennrich import min_precision_bits

inst = generate_instance(8, 20.0, np.random.default_rng(3))
B, eps = inst.kappa, 1e-3
print(f"n=8, B={B:.2f}, eps={eps}: the precision gate asks for at least "
      f"{min_precision_bits(8, B, eps)} bits\n")
print(" bits  success  matched error")
for p in (10, 16, 20, 24, 32, 40, 48, 53):
    ctx = FpContext.exact() if p == 53 else FpContext.emulated(p)
    try:
        res = decompose_fp(inst.T, B, eps, ctx, rng=7)
    except PrecisionTooLow as exc:
        print(f" {p:4d}  refused  ({exc})")
        continue
    err = match_factors(res.vectors, inst.U_true).max_error
    print(f" {p:4d}  {str(res.success):7s}  {err:.2e}")
