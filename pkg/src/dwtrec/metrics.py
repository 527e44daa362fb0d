"""Full-catalog ranking metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLabel

DEFAULT_KS = (5, 10, 20)


def rank_of(scores, label: int, masked=(0,)) -> int:
    """1-based rank of ``label``; ties go to the smaller item id.

    Masked ids take no part in the ranking.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if label in masked or not 0 <= label < scores.shape[-1]:
        raise InvalidLabel(f"label {label} is masked or outside the catalog")
    keep = np.ones(scores.shape[-1], dtype=bool)
    keep[list(masked)] = False
    s = scores[label]
    above = (scores > s) & keep
    tied_before = (scores == s) & keep
    tied_before[label:] = False
    return 1 + int(above.sum()) + int(tied_before.sum())


def ranks(scores, labels, masked=(0,)) -> np.ndarray:
    """Vectorised ``rank_of`` over a batch ``[B, V]``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if np.isin(labels, masked).any():
        raise InvalidLabel("a label is a masked id")
    B, V = scores.shape
    keep = np.ones(V, dtype=bool)
    keep[list(masked)] = False
    target = scores[np.arange(B), labels][:, None]
    above = ((scores > target) & keep).sum(axis=1)
    before = np.arange(V)[None, :] < labels[:, None]
    tied = ((scores == target) & keep & before).sum(axis=1)
    return 1 + above + tied


def hr_at_k(rank_list, k: int) -> float:
    r = np.asarray(rank_list)
    return float(np.mean(r <= k))


def ndcg_at_k(rank_list, k: int) -> float:
    r = np.asarray(rank_list, dtype=np.float64)
    gains = np.where(r <= k, 1.0 / np.log2(r + 1.0), 0.0)
    return float(np.mean(gains))


@dataclass
class EvalResult:
    hr: dict = field(default_factory=dict)
    ndcg: dict = field(default_factory=dict)
    num_users: int = 0

    @classmethod
    def from_ranks(cls, rank_list, ks=DEFAULT_KS) -> "EvalResult":
        return cls(
            hr={k: hr_at_k(rank_list, k) for k in ks},
            ndcg={k: ndcg_at_k(rank_list, k) for k in ks},
            num_users=len(rank_list),
        )

    def rows(self):
        """``(metric, K, value)`` rows, HR first, K ascending."""
        out = [("HR", k, v) for k, v in sorted(self.hr.items())]
        out += [("NDCG", k, v) for k, v in sorted(self.ndcg.items())]
        return out
