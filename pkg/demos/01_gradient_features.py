# %% [markdown]
# Gradient features of a small fully connected stack
#
# A weight gradient of a fully connected layer is an outer product: the
# activation entering the layer times the signal back-propagated to its
# pre-activation. We check that on a random network and look at how much
# storage the factored form saves.

# %%
import numpy as np

from gradfeat import forward, gradient_feature, make_synthetic_network
from gradfeat import features as feat
from gradfeat import oracles

net = make_synthetic_network(seed=0, dims=(12, 10, 8, 5))
print("dims", net.dims, "depth", net.depth)

rng = np.random.default_rng(1)
x = np.abs(rng.standard_normal(net.input_dim))
trace = forward(net, x, tau=1.0)
print("probabilities", np.round(trace.probabilities, 4))

# %% [markdown]
# Back-propagate from the uniform label vector. The seed is g - p, so the
# signal points from the prediction towards "no preference".

# %%
back = feat.backprop_to(trace, net, k=1)
for k in sorted(back.signals, reverse=True):
    print(f"d_{k}", np.round(back[k], 4))

# %%
# The layer-2 gradient as a dense matrix has rank one
a, u = feat.gradient_factors(trace, net, 2)
G = np.outer(a, u)
print("rank", np.linalg.matrix_rank(G), "shape", G.shape)

# Central differences of the cross-entropy agree up to the sign convention
entries = [(0, 0), (3, 5), (9, 7)]
fd, kink_free = oracles.fd_weight_gradient(net, x, 2, entries)
for (i, j), est in zip(entries, fd):
    print(f"W2[{i},{j}]  factor {G[i, j]: .6e}  -fd {-est: .6e}")

# %% [markdown]
# Features are the two factors, each scaled to unit length. At tau = 2 the
# SoftMax is softer and the top signal carries more information about the
# non-winning classes.

# %%
f = gradient_feature(forward(net, x, tau=2.0), net, 2)
print("stored", f.stored_size, "numbers for an implied", f.implied_size, "entry matrix")

for k, implied, stored in feat.gradient_sizes((9216, 4096, 4096, 1000)):
    print(f"layer {k}: {implied:>11,} implied, {stored:>6,} stored")
