"""Constraint pools: sampled uncertainty realizations with content-derived ids."""

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Family(str, Enum):
    LINEAR_HALFSPACE = "linear_halfspace"
    ELLIPSOID_MEMBERSHIP = "ellipsoid_membership"
    CLASSIFICATION_MARGIN = "classification_margin"


_ID_MASK = (1 << 62) - 1


def _content_id(family: Family, delta: np.ndarray, salt: int) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(family.value.encode())
    h.update(np.asarray(delta, dtype=np.float64).tobytes())
    h.update(salt.to_bytes(4, "little"))
    return int.from_bytes(h.digest(), "little") & _ID_MASK


@dataclass(frozen=True)
class Constraint:
    """One sampled realization plus its family tag; the unit exchanged between nodes."""

    id: int
    family: Family
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=np.float64))
        if not np.all(np.isfinite(self.delta)):
            raise ValueError("constraint realization must be finite")


class ConstraintPool:
    """Shared store of realizations for a single constraint family.

    Ids are derived from the realization content (not insertion order), so any
    permutation of the same realizations produces the same id set.  Halfspace
    rows are normalized to unit max-norm at ingestion; the per-row scale is kept
    so multipliers can be reported in original units.
    """

    def __init__(self, family: Family, deltas):
        self.family = Family(family)
        deltas = np.atleast_2d(np.asarray(deltas, dtype=np.float64))
        if deltas.size and not np.all(np.isfinite(deltas)):
            raise ValueError("realizations must be finite")
        if self.family is Family.CLASSIFICATION_MARGIN and deltas.size:
            labels = deltas[:, -1]
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ValueError("classification labels must be in {-1, +1}")
        self._deltas = deltas
        self._deltas.setflags(write=False)
        self.dim = int(deltas.shape[1]) if deltas.size else 0

        if self.family is Family.LINEAR_HALFSPACE and deltas.size:
            scales = np.max(np.abs(deltas), axis=1)
            scales[scales == 0.0] = 1.0
        else:
            scales = np.ones(len(deltas))
        self._row_scale = scales
        self._scaled = deltas / scales[:, None] if deltas.size else deltas

        ids = []
        seen = set()
        for row in deltas:
            salt = 0
            cid = _content_id(self.family, row, salt)
            while cid in seen:
                salt += 1
                cid = _content_id(self.family, row, salt)
            seen.add(cid)
            ids.append(cid)
        self.ids = tuple(ids)
        self._row_of = {cid: k for k, cid in enumerate(ids)}

    def __len__(self):
        return len(self.ids)

    def __contains__(self, cid):
        return cid in self._row_of

    def row_index(self, cid: int) -> int:
        return self._row_of[cid]

    def constraint(self, cid: int) -> Constraint:
        return Constraint(cid, self.family, self._deltas[self._row_of[cid]])

    def deltas(self, ids=None) -> np.ndarray:
        """Realization rows in original units, in the order of `ids`."""
        if ids is None:
            return self._deltas
        rows = [self._row_of[c] for c in ids]
        return self._deltas[rows]

    def scaled_deltas(self, ids) -> np.ndarray:
        rows = [self._row_of[c] for c in ids]
        return self._scaled[rows]

    def row_scales(self, ids) -> np.ndarray:
        rows = [self._row_of[c] for c in ids]
        return self._row_scale[rows]

    def hull_vectors(self, ids) -> np.ndarray:
        """Vectors whose convex-hull vertices form an invariant set for the family.

        Halfspace rows and ellipsoid points are used directly.  Margin
        constraints enter the decision problem linearly through -l*[b; 1], so
        the hull is taken over those transformed rows.
        """
        d = self.deltas(ids)
        if self.family is Family.CLASSIFICATION_MARGIN:
            labels = d[:, -1:]
            return -labels * np.hstack([d[:, :-1], np.ones((len(d), 1))])
        return d

    # -- JSON interface ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "family": self.family.value,
            "dim": self.dim,
            "deltas": self._deltas.tolist(),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ConstraintPool":
        return cls(Family(payload["family"]), payload["deltas"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ConstraintPool":
        with open(path) as fh:
            return cls.from_json(json.load(fh))
