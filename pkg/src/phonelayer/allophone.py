"""Allophone layer: max-pooled mapping from universal phone logits to phoneme logits.

For language ``i`` the phoneme logit is ``g_j = max_k W[j, k] * h[k]`` over
*every* phone column ``k``, so columns with zero weight put a floor of 0
under ``g_j``. Ties go to the smallest ``k``; the subgradient only flows
through that winner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .inventory import SignatureMatrix
from .numeric import ShapeError


@dataclass
class AllophoneMatrix:
    language_id: str
    weights: np.ndarray
    signature: SignatureMatrix = field(repr=False)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.shape != self.signature.shape:
            raise ShapeError(f"W shape {self.weights.shape} != S shape {self.signature.shape}")
        if not np.isfinite(self.weights).all():
            raise ValueError(f"{self.language_id}: allophone weights are not finite")

    @property
    def shape(self):
        return self.weights.shape

    def distance(self) -> float:
        """Frobenius norm of ``W - S``."""
        return float(np.linalg.norm(self.weights - self.signature.entries))

    def to_text(self) -> str:
        rows, cols = self.shape
        lines = [f"{self.language_id} {rows} {cols}"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.weights]
        return self.signature.to_text() + "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AllophoneMatrix":
        lines = [line for line in text.splitlines() if line.strip()]
        rows = int(lines[0].split()[1])
        signature = SignatureMatrix.from_text("\n".join(lines[: rows + 1]))
        header = lines[rows + 1].split()
        if header[0] != signature.language_id or (int(header[1]), int(header[2])) != signature.shape:
            raise ShapeError(f"allophone header {lines[rows + 1]!r} does not match its signature")
        body = [[float(v) for v in line.split()] for line in lines[rows + 2 :]]
        return cls(signature.language_id, np.array(body).reshape(signature.shape), signature)


def init_from_signature(signature: SignatureMatrix) -> AllophoneMatrix:
    return AllophoneMatrix(signature.language_id, signature.entries.astype(np.float64), signature)


def _weights(w) -> np.ndarray:
    return w.weights if isinstance(w, AllophoneMatrix) else np.asarray(w, dtype=np.float64)


def allophone_forward(w, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Phoneme logits and per-row winning phone column.

    ``h`` may be one frame ``(P,)`` or a sequence ``(T, P)``; outputs are then
    ``(Q,)``/``(Q,)`` or ``(T, Q)``/``(T, Q)``.
    """
    weights = _weights(w)
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != weights.shape[1]:
        raise ShapeError(f"phone logits have {h.shape[-1]} entries, allophone matrix has {weights.shape[1]} columns")
    scores = weights * h[..., None, :]
    argmax = scores.argmax(axis=-1)
    g = np.take_along_axis(scores, argmax[..., None], axis=-1)[..., 0]
    return g, argmax


def allophone_backward(grad_g: np.ndarray, argmax: np.ndarray, w, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the max-pooled layer with respect to ``W`` and ``h``."""
    weights = _weights(w)
    grad_g = np.asarray(grad_g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if argmax.shape != grad_g.shape or argmax.shape[-1] != weights.shape[0]:
        raise ShapeError("argmax does not match this allophone forward pass")
    if argmax.size and (argmax.min() < 0 or argmax.max() >= weights.shape[1]):
        raise ShapeError("argmax indexes outside the phone inventory")
    frames_g = grad_g.reshape(-1, weights.shape[0])
    frames_k = argmax.reshape(-1, weights.shape[0])
    frames_h = h.reshape(-1, weights.shape[1])
    if frames_h.shape[0] != frames_g.shape[0]:
        raise ShapeError("argmax does not match this allophone forward pass")
    rows = np.broadcast_to(np.arange(weights.shape[0]), frames_k.shape)
    frames = np.broadcast_to(np.arange(frames_k.shape[0])[:, None], frames_k.shape)
    grad_w = np.zeros_like(weights)
    grad_h = np.zeros_like(frames_h)
    np.add.at(grad_w, (rows, frames_k), frames_g * frames_h[frames, frames_k])
    np.add.at(grad_h, (frames, frames_k), frames_g * weights[rows, frames_k])
    return grad_w, grad_h.reshape(h.shape)


def l2_penalty(w, signature, alpha: float) -> tuple[float, np.ndarray]:
    """``alpha * ||W - S||_F^2`` and its gradient ``2 alpha (W - S)``."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    weights = _weights(w)
    s = signature.entries if isinstance(signature, SignatureMatrix) else np.asarray(signature)
    if weights.shape != s.shape:
        raise ShapeError(f"W shape {weights.shape} != S shape {s.shape}")
    diff = weights - s
    return float(alpha * np.sum(diff * diff)), 2.0 * alpha * diff
