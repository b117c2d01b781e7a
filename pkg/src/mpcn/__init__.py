"""MpCN and baseline Metropolis-Hastings samplers for heavy-tailed targets."""
from ._backend import NAME as BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
