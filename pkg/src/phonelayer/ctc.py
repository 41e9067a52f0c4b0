"""CTC loss (log-space forward-backward), greedy decoding and a brute-force oracle.

Logit sequences are ``(T, V)`` arrays whose last class ``V - 1`` is the blank.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np

from .numeric import log_softmax, logsumexp

BRUTE_FORCE_LIMIT = 2_000_000


class CTCInfeasibleError(ValueError):
    """Label sequence cannot be aligned to this many frames."""


def min_frames(labels: Sequence[int]) -> int:
    """Frames needed: one per label plus a blank between adjacent repeats."""
    repeats = sum(a == b for a, b in zip(labels, labels[1:]))
    return len(labels) + repeats


def _check(logits: np.ndarray, labels: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise ValueError(f"logits must be T x V with V >= 2, got {logits.shape}")
    labels = [int(s) for s in labels]
    blank = logits.shape[1] - 1
    if any(s < 0 or s >= blank for s in labels):
        raise ValueError(f"label index outside [0, {blank}) in {labels}")
    need = min_frames(labels)
    if logits.shape[0] < need:
        raise CTCInfeasibleError(f"{len(labels)} labels need {need} frames, got {logits.shape[0]}")
    return logits, labels


def ctc_loss(logits: np.ndarray, labels: Sequence[int]) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``labels`` and its gradient w.r.t. ``logits``."""
    logits, labels = _check(logits, labels)
    T, V = logits.shape
    blank = V - 1
    logp = log_softmax(logits)

    ext = np.full(2 * len(labels) + 1, blank)
    ext[1::2] = labels
    S = ext.size
    # transition s-2 -> s allowed for labels that differ from the previous label
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    emit = logp[:, ext]  # (T, S)

    alpha = np.full((T, S), -np.inf)
    alpha[0, :2] = emit[0, :2]
    for t in range(1, T):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([-np.inf], prev[:-1]))
        jump = np.where(skip, np.concatenate(([-np.inf, -np.inf], prev[:-2])), -np.inf)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), jump) + emit[t]

    # beta excludes the emission at t
    beta = np.full((T, S), -np.inf)
    beta[T - 1, max(0, S - 2) :] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [-np.inf]))
        jump = np.concatenate((np.where(skip, nxt, -np.inf)[2:], [-np.inf, -np.inf]))
        beta[t] = np.logaddexp(np.logaddexp(stay, step), jump)

    log_likelihood = float(logsumexp(alpha[T - 1, max(0, S - 2) :]))
    occupancy = np.exp(alpha + beta - log_likelihood)  # (T, S)
    per_class = np.zeros((T, V))
    np.add.at(per_class.T, ext, occupancy.T)
    grad = np.exp(logp) - per_class
    return -log_likelihood, grad


def collapse(path: Iterable[int], blank: int) -> list[int]:
    out = []
    prev = None
    for s in path:
        s = int(s)
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return out


def brute_force_ctc(logits: np.ndarray, labels: Sequence[int], limit: int = BRUTE_FORCE_LIMIT) -> float:
    """CTC loss by summing over every length-T path. Test oracle only.

    Returns ``inf`` when no path collapses to ``labels``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    T, V = logits.shape
    if V**T > limit:
        raise ValueError(f"{V}^{T} paths exceeds the enumeration limit {limit}")
    logp = log_softmax(logits)
    target = [int(s) for s in labels]
    frames = range(T)
    total = 0.0
    for path in itertools.product(range(V), repeat=T):
        if collapse(path, V - 1) == target:
            total += np.exp(sum(logp[t, k] for t, k in zip(frames, path)))
    return -np.log(total) if total > 0 else float("inf")


def greedy_decode(logits: np.ndarray) -> list[int]:
    logits = np.asarray(logits)
    return collapse(np.argmax(logits, axis=1), logits.shape[1] - 1)


def restricted_greedy_decode(logits: np.ndarray, allowed: Iterable[int]) -> list[int]:
    """Greedy decoding with every class outside ``allowed`` (blank excepted) masked out."""
    logits = np.asarray(logits, dtype=np.float64)
    allowed = set(int(k) for k in allowed)
    if not allowed:
        raise ValueError("restricted decoding needs at least one allowed class")
    V = logits.shape[1]
    keep = np.zeros(V, dtype=bool)
    keep[[k for k in allowed if 0 <= k < V - 1]] = True
    keep[V - 1] = True
    return greedy_decode(np.where(keep, logits, -np.inf))
