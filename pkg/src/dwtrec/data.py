"""Sequence datasets, leave-one-out splitting, padding and batching.

Input files hold one user per line: the user id followed by that user's item
ids in chronological order, all whitespace separated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, ParseError

MIN_SEQUENCE_LENGTH = 3


@dataclass
class InteractionDataset:
    sequences: list[list[int]]
    num_items: int
    user_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)  # contiguous id i <-> item_ids[i - 1]

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @property
    def num_interactions(self) -> int:
        return sum(len(s) for s in self.sequences)

    def stats(self) -> dict:
        n = self.num_interactions
        return {
            "users": self.num_users,
            "items": self.num_items,
            "sparsity": 1.0 - n / (self.num_users * self.num_items),
            "avg_length": n / self.num_users,
        }


def load_dataset(path) -> InteractionDataset:
    """Parse a sequence file, drop users with fewer than 3 interactions and
    remap the surviving item ids onto 1..|V| in ascending original order."""
    raw = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                ids = [int(t) for t in tokens]
            except ValueError:
                bad = next(t for t in tokens if not _is_int(t))
                raise ParseError(f"non-integer token {bad!r}", line=lineno) from None
            if ids[0] in seen:
                raise ParseError(f"duplicate user id {ids[0]}", line=lineno)
            seen.add(ids[0])
            raw.append((ids[0], ids[1:]))
    if not raw:
        raise EmptyDataset(f"{path}: no users")
    kept = [(u, items) for u, items in raw if len(items) >= MIN_SEQUENCE_LENGTH]
    if not kept:
        raise EmptyDataset(f"{path}: no user has {MIN_SEQUENCE_LENGTH} or more interactions")
    item_ids = sorted({v for _, items in kept for v in items})
    remap = {v: i for i, v in enumerate(item_ids, start=1)}
    return InteractionDataset(
        sequences=[[remap[v] for v in items] for _, items in kept],
        num_items=len(item_ids),
        user_ids=[u for u, _ in kept],
        item_ids=item_ids,
    )


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


def write_dataset(ds: InteractionDataset, path) -> None:
    users = ds.user_ids or list(range(1, ds.num_users + 1))
    with open(path, "w", encoding="utf-8") as fh:
        for u, seq in zip(users, ds.sequences):
            fh.write(" ".join(str(v) for v in [u, *seq]) + "\n")


@dataclass
class LeaveOneOut:
    train: list[list[int]]
    valid: np.ndarray
    test: np.ndarray


def leave_one_out(ds: InteractionDataset) -> LeaveOneOut:
    """Last item is the test label, the one before it the validation label."""
    return LeaveOneOut(
        train=[list(s[:-2]) for s in ds.sequences],
        valid=np.array([s[-2] for s in ds.sequences], dtype=np.int64),
        test=np.array([s[-1] for s in ds.sequences], dtype=np.int64),
    )


def pad_truncate(seq, N: int) -> np.ndarray:
    """Keep the rightmost N ids, left-padding with 0."""
    seq = list(seq)[-N:] if N > 0 else []
    out = np.zeros(N, dtype=np.int64)
    if seq:
        out[N - len(seq):] = seq
    return out


def training_examples(split: LeaveOneOut, N: int, augment: bool = False):
    """Input/label pairs for next-item training.

    Without ``augment`` each user contributes one pair: its train prefix minus
    the last item, labelled with that last item. With ``augment`` every
    proper prefix of the train sequence becomes a pair.
    """
    inputs, labels = [], []
    for seq in split.train:
        cuts = range(1, len(seq)) if augment else ([len(seq) - 1] if len(seq) >= 2 else [])
        for j in cuts:
            inputs.append(pad_truncate(seq[:j], N))
            labels.append(seq[j])
    if not inputs:
        return np.zeros((0, N), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.stack(inputs), np.array(labels, dtype=np.int64)


def eval_inputs(split: LeaveOneOut, N: int, which: str):
    """Padded inputs and labels for the ``valid`` or ``test`` split."""
    if which == "valid":
        seqs = [pad_truncate(s, N) for s in split.train]
        labels = split.valid
    elif which == "test":
        seqs = [pad_truncate(s + [int(v)], N) for s, v in zip(split.train, split.valid)]
        labels = split.test
    else:
        raise ValueError(f"unknown split {which!r}")
    return np.stack(seqs), labels


def batches(inputs, labels, batch_size: int, rng: np.random.Generator | None = None):
    """Yield ``(inputs, labels)`` batches, shuffled when ``rng`` is given.

    The last batch may be smaller than ``batch_size``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    n = len(labels)
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield inputs[idx], labels[idx]


def synthetic_alternating(num_users: int = 32, num_items: int = 100, length: int = 20) -> InteractionDataset:
    """Each user alternates between two items of their own: a, b, a, b, ..."""
    if 2 * num_users > num_items:
        raise ValueError("need at least two items per user")
    step = num_items // num_users
    seqs = []
    for u in range(num_users):
        a = u * step + 1
        b = a + 1
        seqs.append([a if t % 2 == 0 else b for t in range(length)])
    return InteractionDataset(
        sequences=seqs,
        num_items=num_items,
        user_ids=list(range(1, num_users + 1)),
        item_ids=list(range(1, num_items + 1)),
    )

