"""Cause-effect direction for a pair of variables.

Both orientations are fitted with the full trainer on two columns, the
candidate cause always placed first and the only allowed edge being
``0 -> 1``.  The orientation with the lower NLL wins.

With the orientation pinned there is no structure to select, so the group
penalty is switched off by default, and each orientation keeps the better
of two starts (with and without the unit-variance warm-up round).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .loss import nll
from .model import check_data
from .trainer import TrainConfig, fit

FORWARD = "x->y"
BACKWARD = "y->x"
UNCERTAIN = "uncertain"

# per-row NLL gap (nats) below which no direction is claimed
DEFAULT_MARGIN = 1e-3

_CAUSE_FIRST = np.array([[False, True], [False, False]])


@dataclass
class PairDecision:
    decision: str
    nll_xy: float
    nll_yx: float
    gap: float  # nll_yx - nll_xy; positive favours x->y
    margin: float

    def to_dict(self):
        return {
            "decision": self.decision,
            "nll_xy": self.nll_xy,
            "nll_yx": self.nll_yx,
            "gap": self.gap,
            "margin": self.margin,
        }


def pair_config(lambda1=0.0, **kw):
    return TrainConfig(lambda1=lambda1, **kw)


def _starts(cfg):
    return [dataclasses.replace(cfg, warmup=True), dataclasses.replace(cfg, warmup=False)]


def oriented_nll(cause, effect, cfg):
    """Best NLL over the restart schedule for the model ``cause -> effect``."""
    X = np.column_stack([cause, effect])
    return min(nll(fit(X, c, edge_mask=_CAUSE_FIRST).params, X) for c in _starts(cfg))


def decide_direction(XY, cfg=None, margin=DEFAULT_MARGIN):
    """Pick ``x->y`` or ``y->x`` for a two-column array.

    Parameters
    ----------
    XY : array_like of shape (M, 2)
    cfg : TrainConfig, optional
        Shared by both orientations, seed included.  Defaults to
        :func:`pair_config`.
    margin : float
        Per-row indecision band; ``|gap| <= margin * M`` yields ``"uncertain"``.
    """
    XY = check_data(XY)
    if XY.shape[1] != 2:
        raise ValueError(f"a pair needs exactly 2 columns, got {XY.shape[1]}")
    cfg = cfg or pair_config()
    a = oriented_nll(XY[:, 0], XY[:, 1], cfg)
    b = oriented_nll(XY[:, 1], XY[:, 0], cfg)
    gap = b - a
    band = margin * XY.shape[0]
    if abs(gap) <= band:
        decision = UNCERTAIN
    else:
        decision = FORWARD if gap > 0 else BACKWARD
    return PairDecision(decision, float(a), float(b), float(gap), float(band))


def accuracy(decisions, labels):
    """Fraction of labelled pairs decided correctly; ``uncertain`` counts as wrong."""
    keys = [k for k in decisions if k in labels]
    if not keys:
        return None
    return sum(decisions[k] == labels[k] for k in keys) / len(keys)
