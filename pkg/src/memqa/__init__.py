"""Question answering over a knowledge base with a bidirectional
attentive key-value memory network, on a self-contained autodiff core."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
