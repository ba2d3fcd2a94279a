"""
Measuring one perturbation twelve ways
======================================

Four synthetic perturbation families are applied to the same textured
image and measured with the four L-norms and the eight full-reference
quality metrics.

The second half builds two perturbations with almost the same L2 norm but
very different structure. Their quality metrics tell them apart, which a
single norm cannot do.
"""

import numpy as np

from advmetrics import FEATURE_NAMES, metric_vector
from advmetrics.datagen import PerturbationSpec, generate_pair, textured_base
from advmetrics.tensor import quantize, make_pair

base = textured_base(32, 32, 3, seed=0)

specs = {
    "uniform_linf eps=8": PerturbationSpec("uniform_linf", 8.0, seed=1),
    "gaussian sigma=5": PerturbationSpec("gaussian", 5.0, seed=1),
    "sparse 40 x 45": PerturbationSpec("sparse_pixels", 45.0, count=40, seed=1),
    "block 6x6 +30": PerturbationSpec("block_patch", 30.0, count=6, seed=1),
}

print(f"{'':<20}" + "".join(f"{n:>9}" for n in FEATURE_NAMES))
for name, spec in specs.items():
    pair = generate_pair(base, spec)
    m = metric_vector(make_pair(base.data, quantize(pair.adversarial).data))
    print(f"{name:<20}" + "".join(f"{m[n]:>9.3g}" for n in FEATURE_NAMES))

###############################################################################
# Same L2, different perturbation
# -------------------------------
# Scale a dense gaussian perturbation so that its L2 norm matches the block
# patch above, then compare the remaining metrics.

block = generate_pair(base, specs["block 6x6 +30"])
target = np.linalg.norm(block.adversarial.data - base.data)
noise = np.random.default_rng(3).standard_normal(base.shape)
dense = np.clip(base.data + noise * target / np.linalg.norm(noise), 0, 255)

for name, adv in (("block patch", block.adversarial.data), ("dense noise", dense)):
    m = metric_vector(make_pair(base.data, adv))
    print(f"{name:<12} l2={m['l2']:7.2f}  linf={m['linf']:6.2f}  l0={m['l0']:6.0f}  "
          f"psnrb={m['psnrb']:6.2f}  vifp={m['vifp']:.3f}  scc={m['scc']:.3f}")
