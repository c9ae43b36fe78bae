"""Kernel hash function learning with class codewords.

Per-bit kernel SVMs with multiple-kernel weights, codewords fitted by
proximal subgradient descent, and Hamming-ranking evaluation tools.

>>> from shl import TrainConfig, train, encode
>>> from shl.dataset import LabeledDataset
"""

__version__ = "0.1.0"

from .codebook import Assignment, Codebook, assign, dbar, prox_pair, surrogate_loss  # noqa: E402
from .dataset import LabeledDataset  # noqa: E402
from .errors import FormatError, InputError, NumericalError, ShlError  # noqa: E402
from .evalkit import CodeDatabase, hamming, lsh_fit, lsh_encode, pr_curve, topk_precision  # noqa: E402
from .kernels import KernelBank, KernelSpec, build_bank, combined_kernel, default_specs  # noqa: E402
from .trainer import HashModel, TrainConfig, classify, encode, train, transductive_train  # noqa: E402

__all__ = [
    "Assignment",
    "Codebook",
    "CodeDatabase",
    "FormatError",
    "HashModel",
    "InputError",
    "KernelBank",
    "KernelSpec",
    "LabeledDataset",
    "NumericalError",
    "ShlError",
    "TrainConfig",
    "assign",
    "build_bank",
    "classify",
    "combined_kernel",
    "dbar",
    "default_specs",
    "encode",
    "hamming",
    "lsh_encode",
    "lsh_fit",
    "pr_curve",
    "prox_pair",
    "surrogate_loss",
    "topk_precision",
    "train",
    "transductive_train",
]
