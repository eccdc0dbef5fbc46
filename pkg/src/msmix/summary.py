"""Partition summaries of a posterior sample."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from . import tree_index as ti
from .errors import DomainError


def _as_label_matrix(chain) -> np.ndarray:
    """Integer label matrix ``(samples, n)`` from a chain or nested label lists."""
    rows = []
    for sample in chain:
        labels = sample.labels() if hasattr(sample, "labels") else list(sample)
        _, codes = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True)
        rows.append(codes)
    if not rows:
        raise DomainError("empty chain")
    return np.vstack(rows)


def cocluster(chain) -> np.ndarray:
    """Posterior frequency with which each pair of subjects shares a stop pattern."""
    labels = _as_label_matrix(chain)
    n = labels.shape[1]
    out = np.zeros((n, n))
    for row in labels:
        out += row[:, None] == row[None, :]
    return out / labels.shape[0]


def binder_loss(labels: Sequence, psm: np.ndarray) -> float:
    """``sum_{i<j} |1{same cluster} - psm_ij|``."""
    labels = np.asarray(labels, dtype=object).astype(str)
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(labels.size, k=1)
    return float(np.abs(same[iu] - psm[iu]).sum())


@dataclass
class PartitionEstimate:
    labels: list[str]
    loss: float
    sizes: dict[str, int] = field(default_factory=dict)
    edges: list[tuple[str, str]] = field(default_factory=list)
    sample_index: int = 0


def tree_edges(labels: Sequence[str]) -> list[tuple[str, str]]:
    """Edges from each cluster to its nearest ancestor that is also a cluster."""
    present = set(labels)
    edges = []
    for lab in sorted(present, key=lambda s: (len(s), s)):
        if lab == "":
            continue
        for anc in ti.ancestors(ti.pattern_from_str(lab)):
            a = ti.pattern_to_str(anc)
            if a in present:
                edges.append((lab, a))
                break
    return edges


def point_partition(psm: np.ndarray, candidates) -> PartitionEstimate:
    """Candidate partition with minimal Binder loss.

    Ties go to the candidate with fewer clusters, then to the first one seen.
    """
    cands = [c.labels() if hasattr(c, "labels") else [str(x) for x in c] for c in candidates]
    if not cands:
        raise DomainError("no candidate partitions")
    best, best_key = None, None
    for idx, labels in enumerate(cands):
        key = (binder_loss(labels, psm), len(set(labels)), idx)
        if best_key is None or key < best_key:
            best, best_key = idx, key
    labels = cands[best]
    return PartitionEstimate(labels, best_key[0], dict(Counter(labels)), tree_edges(labels), best)


def ari(a: Sequence, b: Sequence) -> float:
    """Adjusted Rand index from the contingency table."""
    a = np.asarray(a, dtype=object).astype(str)
    b = np.asarray(b, dtype=object).astype(str)
    if a.size != b.size:
        raise DomainError(f"partitions have different lengths: {a.size} vs {b.size}")
    n = a.size
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    sum_ij = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(0))
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def tree_report(estimate: PartitionEstimate, chain) -> dict:
    """Clusters grouped by level with parent edges, occupancy and mean location.

    Occupancy is the fraction of samples in which at least one subject uses the
    pattern. The mean location averages ``Theta rho`` over the samples whose
    truncation can represent the pattern.
    """
    chain = list(chain)
    occupied = Counter()
    for sample in chain:
        occupied.update(set(sample.labels()))
    parent_of = dict(estimate.edges)
    clusters = []
    for lab, size in sorted(estimate.sizes.items(), key=lambda kv: (len(kv[0]), kv[0])):
        pat = ti.pattern_from_str(lab)
        locs = [sample.state.loadings.Theta @ ti.encode_node(pat, sample.k)
                for sample in chain if len(pat) + 1 <= sample.k]
        clusters.append({
            "pattern": lab,
            "level": None if lab == "" else len(lab),
            "size": size,
            "parent": parent_of.get(lab),
            "occupancy": occupied[lab] / len(chain) if chain else 0.0,
            "mean_location": np.mean(locs, axis=0).tolist() if locs else None,
        })
    levels: dict[str, list[str]] = {}
    for c in clusters:
        levels.setdefault("background" if c["level"] is None else str(c["level"]), []).append(c["pattern"])
    roots = [c["pattern"] for c in clusters if c["parent"] is None]
    return {"clusters": clusters, "levels": levels, "edges": [list(e) for e in estimate.edges],
            "roots": roots, "loss": estimate.loss}
