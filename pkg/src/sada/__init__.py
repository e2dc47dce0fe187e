"""Semantic-aware data augmentation for paired text/image embedding corpora.

Core surfaces:

* sada.store        — manifest + raw-matrix corpus format, subsampling
* sada.covariance   — covariance blocks, conditional (Schur) diagonals
* sada.augment      — closed-form perturbation of text embeddings
* sada.losses       — semantic consistency, direction bounding, shift regularizer
* sada.tinynet      — the trainable augmenter and its training loop
* sada.testbed      — synthetic linear world and proposition experiments
* sada.cli          — the `sada` command
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
