"""JSON encoding of complex tensors as nested [re, im] pairs."""
from __future__ import annotations

import numpy as np


def encode_complex(arr) -> list:
    """Nested lists where every complex entry becomes [re, im]."""
    a = np.asarray(arr, dtype=complex)
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def decode_complex(data) -> np.ndarray:
    """Inverse of encode_complex."""
    a = np.asarray(data, dtype=float)
    if a.ndim == 0 or a.shape[-1] != 2:
        raise ValueError("complex payload must consist of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]
