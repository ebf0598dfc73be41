"""Pedigree handling and the numerator relationship matrix.

Unknown parents are coded 0.  Parents referenced but not listed as
animals are inserted as founders.  The relationship matrix is built
with the tabular method; its inverse follows Henderson's rules with
inbreeding taken from the diagonal of A.
"""

import csv
import graphlib
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import StructuralError, ValidationError

log = logging.getLogger(__name__)

UNKNOWN = 0


@dataclass(frozen=True)
class Pedigree:
    """Ordered ``(animal, sire, dam)`` triples, parents before offspring."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", _order(tuple(self.entries)))

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self):
        return [e[0] for e in self.entries]

    def index(self):
        return {animal: i for i, (animal, _, _) in enumerate(self.entries)}

    def parent_indices(self):
        """Integer positions of sire and dam, -1 when unknown."""
        idx = self.index()
        sires = np.array([idx.get(s, -1) if s != UNKNOWN else -1 for _, s, _ in self.entries], dtype=int)
        dams = np.array([idx.get(d, -1) if d != UNKNOWN else -1 for _, _, d in self.entries], dtype=int)
        return sires, dams

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open(newline="") as handle:
            reader = csv.DictReader(handle)
            missing = {"animal", "sire", "dam"} - set(reader.fieldnames or [])
            if missing:
                raise ValidationError(f"{path}: missing pedigree column(s) {sorted(missing)}")
            rows = []
            for lineno, row in enumerate(reader, start=1):
                try:
                    rows.append((int(row["animal"]), int(row["sire"] or 0), int(row["dam"] or 0)))
                except (TypeError, ValueError):
                    raise ValidationError(f"{path}: row {lineno} has a non-integer id") from None
        return cls(tuple(rows))

    def to_csv(self, path):
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["animal", "sire", "dam"])
            writer.writerows(self.entries)


def _order(entries):
    seen = set()
    for animal, sire, dam in entries:
        if animal == UNKNOWN:
            raise ValidationError("animal id 0 is reserved for unknown parents")
        if animal in seen:
            raise ValidationError(f"duplicate animal id {animal}")
        seen.add(animal)
        if animal in (sire, dam):
            raise StructuralError(f"animal {animal} is listed as its own parent")

    # parents that never appear as animals become founders
    extra = []
    for _, sire, dam in entries:
        for p in (sire, dam):
            if p != UNKNOWN and p not in seen:
                seen.add(p)
                extra.append((p, UNKNOWN, UNKNOWN))
    if extra:
        log.info("added %d unlisted parents as founders", len(extra))
    entries = tuple(extra) + entries

    pos = {e[0]: i for i, e in enumerate(entries)}
    if all(pos.get(s, -1) < i and pos.get(d, -1) < i for i, (_, s, d) in enumerate(entries)):
        return entries

    sorter = graphlib.TopologicalSorter()
    for animal, sire, dam in entries:
        sorter.add(animal, *[p for p in (sire, dam) if p != UNKNOWN])
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        raise StructuralError(f"pedigree contains a cycle: {exc.args[1]}") from None
    by_id = {e[0]: e for e in entries}
    ordered = []
    while sorter.is_active():
        ready = sorted(sorter.get_ready(), key=pos.__getitem__)
        ordered.extend(by_id[a] for a in ready)
        sorter.done(*ready)
    return tuple(ordered)


@dataclass(frozen=True)
class RelationshipMatrix:
    ids: tuple
    values: np.ndarray

    @property
    def dim(self):
        return len(self.ids)

    @property
    def inbreeding(self):
        return np.diag(self.values) - 1.0


def build_A(ped):
    """Numerator additive relationship matrix by the tabular method."""
    sires, dams = ped.parent_indices()
    q = len(ped)
    A = np.zeros((q, q))
    for j in range(q):
        s, d = sires[j], dams[j]
        if j:
            row = np.zeros(j)
            if s >= 0:
                row += 0.5 * A[s, :j]
            if d >= 0:
                row += 0.5 * A[d, :j]
            A[j, :j] = row
            A[:j, j] = row
        A[j, j] = 1.0 + (0.5 * A[s, d] if s >= 0 and d >= 0 else 0.0)
    return RelationshipMatrix(tuple(ped.ids), A)


def inbreeding_coefficients(ped):
    """Inbreeding coefficients from a memoized recursion on relationships.

    Only the diagonal of A is needed for the inverse, so this avoids the
    dense q x q table for large pedigrees.
    """
    sires, dams = ped.parent_indices()
    q = len(ped)
    F = np.zeros(q)
    cache = {}

    def rel(i, j):
        # additive relationship between i and j (i, j positions; -1 unknown)
        if i < 0 or j < 0:
            return 0.0
        if i == j:
            return 1.0 + F[i]
        if i < j:
            i, j = j, i
        key = (i, j)
        if key not in cache:
            cache[key] = 0.5 * (rel(sires[i], j) + rel(dams[i], j))
        return cache[key]

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * q + 1000))
    try:
        for j in range(q):
            s, d = sires[j], dams[j]
            F[j] = 0.5 * rel(s, d) if s >= 0 and d >= 0 else 0.0
    finally:
        sys.setrecursionlimit(limit)
    return F


def build_A_inverse(ped, inbreeding=None):
    """Sparse inverse of A from Henderson's rules including inbreeding."""
    sires, dams = ped.parent_indices()
    q = len(ped)
    F = inbreeding_coefficients(ped) if inbreeding is None else np.asarray(inbreeding)
    rows, cols, vals = [], [], []
    for j in range(q):
        parents = [p for p in (sires[j], dams[j]) if p >= 0]
        if len(parents) == 2:
            d = 0.5 - 0.25 * (F[parents[0]] + F[parents[1]])
        elif len(parents) == 1:
            d = 0.75 - 0.25 * F[parents[0]]
        else:
            d = 1.0
        b = 1.0 / d
        rows.append(j)
        cols.append(j)
        vals.append(b)
        for p in parents:
            rows += [j, p]
            cols += [p, j]
            vals += [-0.5 * b, -0.5 * b]
            for p2 in parents:
                rows.append(p)
                cols.append(p2)
                vals.append(0.25 * b)
    return sparse.coo_matrix((vals, (rows, cols)), shape=(q, q)).tocsr()
