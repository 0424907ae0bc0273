"""Recommender-systems engine.

Implements three research models plus simple baselines on session-style
interaction logs:

* ``apar``: personality-regularized nonnegative matrix factorization for
  explicit ratings, with trait profiles scored from review text.
* ``das``: attention network over long-term and short-term item sets with a
  mixture layer and a personalized output layer, trained with pairwise
  binary cross-entropy.
* ``can``: 1-D convolution over the long-term history, purpose-specific
  attention, and a preference encoder over the current session, trained
  with a BPR objective.

Everything is plain numpy with hand-derived gradients; training is
deterministic under a fixed seed.
"""

__version__ = "0.1.0"

CHECKPOINT_FORMAT_VERSION = 1
