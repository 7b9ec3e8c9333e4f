"""Run the finite-difference oracle suite over every layer type.

Each component builds a tiny float64 instance of one layer (convolution,
attention block, residual block, ...) and compares autodiff gradients
against central finite differences; the last check runs the full fused
model in float32 against a float64 twin.

Run:  python3 demos/gradient_oracle.py
"""

import time

from reviewfuse.gradsuite import run_gradcheck

t0 = time.time()
results = run_gradcheck(seed=0)
for r in results:
    mark = "ok" if r.passed else "FAIL"
    print(f"{r.name:20s} max relative error {r.error:.3e} "
          f"(threshold {r.threshold:g})  {mark}")
print(f"\n{sum(r.passed for r in results)}/{len(results)} checks passed "
      f"in {time.time() - t0:.1f}s")
