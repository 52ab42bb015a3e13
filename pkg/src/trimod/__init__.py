"""Tri-modality (text / visual / hashtag) sequence tagger.

A small numpy-based library: reverse-mode autodiff core, Bi-GRU text
encoders, a character-level hashtag segmenter, attention fusion of the
three modality features, and a linear-chain CRF output layer, plus the
training loop, entity-level evaluation, and model serialization.
"""

from .tensor import Parameter, Tensor, backward, grad_check, no_grad

__version__ = "0.1.0"

__all__ = ["Tensor", "Parameter", "backward", "grad_check", "no_grad", "__version__"]
