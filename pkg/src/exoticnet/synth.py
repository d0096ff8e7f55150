"""Synthetic challenge-like event generator for tests and dry runs.

Produces weighted, labeled 30-feature events whose shape mirrors the
real selection problem: a rare signal class whose total importance
weight is tiny next to the background's, jet-count-driven blocks of
sentinel features (six distinct missingness patterns), and a handful of
informative columns that are never masked.
"""

from __future__ import annotations

import numpy as np

from .dataset import FEATURE_NAMES, N_FEATURES, SENTINEL, Dataset

# columns undefined when the event has no jets / exactly one jet
JET0_MASKED = (4, 5, 6, 12, 23, 24, 25, 26, 27, 28)
JET1_MASKED = (4, 5, 6, 12, 26, 27, 28)
MASS_COLUMN = 0  # additionally missing at random

# class-separation coefficients for the never-masked informative columns
_INFORMATIVE = {1: 1.05, 2: 0.95, 3: 0.72, 7: 0.8, 8: 0.6, 9: 0.72, 10: 0.6}

# background comes in three sub-processes: relative weight scale and how
# far each sits from the signal region (heavy backgrounds are the
# well-understood, kinematically distinct ones)
_BKG_WEIGHT_SCALE = (1.0, 3.0, 0.3)
_BKG_SHIFT = (0.0, -0.6, 0.25)
_BKG_PROBS = (0.5, 0.3, 0.2)

_COLUMN_OFFSET = np.linspace(-5.0, 120.0, N_FEATURES)
_COLUMN_SCALE = np.linspace(1.0, 40.0, N_FEATURES)


def make_challenge_like(
    n_events: int,
    seed: int,
    *,
    signal_total: float = 692.0,
    background_total: float = 411000.0,
    sentinels: bool = True,
) -> Dataset:
    """Train-schema dataset of ``n_events`` with exact class weight totals."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(n_events) < 1.0 / 3.0).astype(np.int8)
    sig = labels == 1
    kind = rng.choice(3, size=n_events, p=_BKG_PROBS)
    # signal sits at +alpha; each background sub-process at its own offset
    shift = np.where(sig, 1.0, np.array(_BKG_SHIFT)[kind])

    feats = rng.standard_normal((n_events, N_FEATURES))
    for col, alpha in _INFORMATIVE.items():
        feats[:, col] += alpha * shift
    feats[:, MASS_COLUMN] += 0.95 * shift
    feats = _COLUMN_OFFSET + _COLUMN_SCALE * feats

    jet_num = rng.choice(4, size=n_events, p=[0.40, 0.31, 0.20, 0.09])
    feats[:, 22] = jet_num

    if sentinels:
        feats[np.ix_(jet_num == 0, JET0_MASKED)] = SENTINEL
        feats[np.ix_(jet_num == 1, JET1_MASKED)] = SENTINEL
        mass_missing = rng.random(n_events) < 0.15
        feats[mass_missing, MASS_COLUMN] = SENTINEL

    weights = np.empty(n_events)
    weights[sig] = rng.uniform(0.5, 1.5, int(sig.sum()))
    scale = np.array(_BKG_WEIGHT_SCALE)[kind]
    weights[~sig] = (scale * rng.uniform(0.5, 1.5, n_events))[~sig]
    weights[sig] *= signal_total / weights[sig].sum()
    weights[~sig] *= background_total / weights[~sig].sum()

    ids = np.arange(100000, 100000 + n_events, dtype=np.int64)
    return Dataset(ids, feats, weights, labels, FEATURE_NAMES)
