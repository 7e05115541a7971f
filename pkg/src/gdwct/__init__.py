"""Group-wise deep whitening-and-coloring transform (GDWCT).

A verifiable numerical library for exemplar-based image translation:
a classical eigendecomposition whitening/coloring oracle, the learned
group-wise approximation with its two regularizers, desk-scale networks,
and a bidirectional training harness with gradient checks.
"""

from .tensor import Tensor

__version__ = "0.1.0"

__all__ = ["Tensor", "__version__"]
