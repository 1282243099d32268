"""Selective-kernel attention block: structure, gates, and conv speed.

Runs the block on random input, recomputes the attention gates from the
public building blocks, and benchmarks the im2col convolution against
the looped reference (informative timing, machine dependent).
"""

import time

import numpy as np
from scipy.special import expit

from adk.lsk import (
    ConvSpec,
    channel_pool,
    conv2d_direct,
    conv2d_fast,
    ghost_conv,
    lsk_forward,
    random_lsk_params,
    zero_lsk_params,
)

rng = np.random.default_rng(3)
c = 16
x = rng.normal(size=(1, c, 20, 20))
params = random_lsk_params(c, seed=0, scale=0.1)

out = lsk_forward(x, params)
print(f"input {x.shape} -> output {out.shape} (shape preserved)")

# the gates are sigmoid outputs, so they live strictly inside (0, 1)
shallow = conv2d_fast(x, params.branch1)
deep = conv2d_fast(shallow, params.branch2)
merged = np.concatenate(
    [ghost_conv(shallow, params.ghost1), ghost_conv(deep, params.ghost2)], axis=1
)
mean_map, max_map = channel_pool(merged)
gates = expit(conv2d_fast(np.concatenate([mean_map, max_map], axis=1), params.attention))
print(f"attention gates: min {gates.min():.4f}, max {gates.max():.4f}, shape {gates.shape}")

# an all-zero block is exactly silent, not approximately
assert np.array_equal(lsk_forward(x, zero_lsk_params(c)), np.zeros_like(x))
print("zero parameters -> exactly zero output")

# benchmark: same convolution through both code paths
spec = ConvSpec(
    in_channels=16,
    out_channels=16,
    kernel_size=5,
    padding=2,
    weights=rng.normal(size=(16, 16, 5, 5)),
)
xb = rng.normal(size=(1, 16, 64, 64))

t0 = time.perf_counter()
ref = conv2d_direct(xb, spec)
t_direct = time.perf_counter() - t0

t0 = time.perf_counter()
fast = conv2d_fast(xb, spec)
t_fast = time.perf_counter() - t0

rel = np.abs(fast - ref) / np.maximum(np.abs(ref), 1.0)
print(f"direct {t_direct * 1e3:7.1f} ms   im2col {t_fast * 1e3:7.1f} ms   "
      f"speedup {t_direct / t_fast:5.1f}x   max rel err {rel.max():.2e}")
