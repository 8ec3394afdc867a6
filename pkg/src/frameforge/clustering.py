"""Group-average agglomerative clustering, X-means, and the two induction
pipelines (one-step over all instances, two-step per-lemma then cross-verb).

Linkage is the mean pairwise *plain* Euclidean distance between clusters,
while the training losses use squared Euclidean; the two conventions are
deliberate and must not be mixed.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .training import EncoderParams, encode
from .vectors import combine, l2_normalize


@dataclass
class ClusterAssignment:
    """Instance/point -> contiguous cluster id map."""

    labels: dict
    num_clusters: int

    def __post_init__(self):
        used = set(self.labels.values())
        if used != set(range(self.num_clusters)):
            raise ValueError("cluster ids must be contiguous and all non-empty")

    def members(self) -> list[list]:
        out: list[list] = [[] for _ in range(self.num_clusters)]
        for key, cid in self.labels.items():
            out[cid].append(key)
        return out


@dataclass
class Dendrogram:
    """Full agglomerative merge tree.

    Leaves are ids 0..leaf_count-1; the merge at step t creates cluster
    id leaf_count + t. Merge distances are non-decreasing (group-average
    linkage is monotonic); this is asserted on construction.
    """

    merges: list[tuple[int, int, float]]
    leaf_count: int

    def __post_init__(self):
        if len(self.merges) != max(self.leaf_count - 1, 0):
            raise ValueError("expected leaf_count - 1 merges")
        for prev, cur in zip(self.merges, self.merges[1:]):
            if cur[2] < prev[2] - 1e-9:
                raise ValueError("merge distances must be non-decreasing")

    def merge_distances(self) -> list[float]:
        return [d for _, _, d in self.merges]


def group_average_cluster(points: np.ndarray) -> Dendrogram:
    """Agglomerate by mean pairwise Euclidean distance.

    Ties break toward the smaller (cluster-a, cluster-b) id pair. Updates
    use the exact Lance-Williams recurrence for average linkage, so the
    result equals recomputing mean pairwise distances from scratch.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = pts.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return Dendrogram(merges=[], leaf_count=1)
    total = 2 * n - 1
    # dist[a, b] = mean pairwise distance between active clusters a and b
    dist = np.full((total, total), np.inf)
    diff = pts[:, None, :] - pts[None, :, :]
    base = np.sqrt((diff * diff).sum(axis=2))
    dist[:n, :n] = base
    np.fill_diagonal(dist, np.inf)
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    active = np.zeros(total, dtype=bool)
    active[:n] = True
    merges: list[tuple[int, int, float]] = []
    for step in range(n - 1):
        act = np.flatnonzero(active)
        sub = dist[np.ix_(act, act)]
        # flat argmin on the symmetric matrix finds the lexicographically
        # smallest (a, b) pair with a < b among distance ties
        k = int(np.argmin(sub))
        a = int(act[k // len(act)])
        b = int(act[k % len(act)])
        d = float(sub.flat[k])
        new = n + step
        merges.append((a, b, d))
        sa, sb = sizes[a], sizes[b]
        others = np.flatnonzero(active)
        others = others[(others != a) & (others != b)]
        dist[new, others] = (sa * dist[a, others] + sb * dist[b, others]) / (sa + sb)
        dist[others, new] = dist[new, others]
        sizes[new] = sa + sb
        active[a] = active[b] = False
        active[new] = True
    return Dendrogram(merges=merges, leaf_count=n)


def cut_dendrogram(dg: Dendrogram, threshold: float) -> ClusterAssignment:
    """Apply all merges with distance < threshold; components are clusters.

    Labels are keyed by leaf index and numbered contiguously in order of
    first appearance.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    parent = list(range(2 * dg.leaf_count - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, (a, b, d) in enumerate(dg.merges):
        if d < threshold:
            new = dg.leaf_count + t
            parent[find(a)] = new
            parent[find(b)] = new
    roots: dict[int, int] = {}
    labels: dict[int, int] = {}
    for leaf in range(dg.leaf_count):
        r = find(leaf)
        if r not in roots:
            roots[r] = len(roots)
        labels[leaf] = roots[r]
    return ClusterAssignment(labels=labels, num_clusters=len(roots))


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[rng.integers(n)]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = pts[rng.integers(n)]
        else:
            centers[i] = pts[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((pts - centers[i]) ** 2).sum(axis=1))
    return centers


def _kmeans(
    pts: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100, tol: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding; returns (labels, centers)."""
    centers = _kmeans_pp_init(pts, k, rng)
    labels = np.zeros(pts.shape[0], dtype=int)
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = pts[labels == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
        shift = float(np.linalg.norm(new_centers - centers))
        centers = new_centers
        if shift < tol:
            break
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1), centers


def _xmeans_bic(pts: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    """Spherical identical-variance BIC of a k-cluster model on pts."""
    n, d = pts.shape
    k = centers.shape[0]
    if n <= k:
        return -math.inf
    sq = 0.0
    counts = np.zeros(k)
    for j in range(k):
        members = pts[labels == j]
        counts[j] = len(members)
        if len(members):
            sq += float(((members - centers[j]) ** 2).sum())
    sigma2 = sq / (n - k)
    if sigma2 <= 1e-30 or np.any(counts == 0):
        return -math.inf
    loglik = 0.0
    for j in range(k):
        nk = counts[j]
        loglik += (
            nk * math.log(nk)
            - nk * math.log(n)
            - nk * d / 2.0 * math.log(2.0 * math.pi * sigma2)
        )
    loglik -= (n - k) / 2.0
    num_params = (k - 1) + k * d + 1
    return loglik - num_params / 2.0 * math.log(n)


def xmeans(points: np.ndarray, k_max: int, seed: int = 0) -> ClusterAssignment:
    """Recursive BIC-scored 2-means splitting starting from one cluster."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need at least one point")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    seed_seq = np.random.SeedSequence(seed)
    final: list[np.ndarray] = []
    queue: list[np.ndarray] = [np.arange(pts.shape[0])]
    attempt = 0
    while queue:
        idx = queue.pop(0)
        k_now = len(final) + len(queue) + 1
        if len(idx) < 2 or k_now >= k_max:
            final.append(idx)
            continue
        sub = pts[idx]
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        attempt += 1
        labels2, centers2 = _kmeans(sub, 2, rng)
        if len(set(labels2.tolist())) < 2:
            final.append(idx)
            continue
        parent_center = sub.mean(axis=0, keepdims=True)
        bic1 = _xmeans_bic(sub, np.zeros(len(sub), dtype=int), parent_center)
        bic2 = _xmeans_bic(sub, labels2, centers2)
        if bic2 > bic1:
            queue.append(idx[labels2 == 0])
            queue.append(idx[labels2 == 1])
        else:
            final.append(idx)
    labels = {}
    for cid, idx in enumerate(final):
        for i in idx:
            labels[int(i)] = cid
    return ClusterAssignment(labels=labels, num_clusters=len(final))


def embed_instances(ds: Dataset, enc: EncoderParams, alpha: float) -> np.ndarray:
    """Clustering-time embedding: renormalized mix of encoded word/mask."""
    out = np.empty((len(ds), ds.dim))
    for i, rec in enumerate(ds.records):
        e_w = encode(enc, rec.v_word)
        e_m = encode(enc, rec.v_mask)
        out[i] = l2_normalize(combine(e_w, e_m, alpha))
    return out


def one_step_induce(
    ds: Dataset, enc: EncoderParams, alpha: float, threshold: float
) -> ClusterAssignment:
    """Group-average clustering over all embedded instances, cut at threshold."""
    emb = embed_instances(ds, enc, alpha)
    dg = group_average_cluster(emb)
    by_index = cut_dendrogram(dg, threshold)
    labels = {ds.records[i].id: cid for i, cid in by_index.labels.items()}
    return ClusterAssignment(labels=labels, num_clusters=by_index.num_clusters)


def _lemma_seed(seed: int, lemma: str) -> int:
    digest = hashlib.sha256(lemma.encode("utf-8")).digest()
    return (seed * 0x10001 + int.from_bytes(digest[:4], "big")) % (2**31)


def two_step_induce(
    ds: Dataset,
    enc: EncoderParams,
    alpha: float,
    threshold: float,
    k_max_per_lemma: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> tuple[ClusterAssignment, ClusterAssignment]:
    """Per-lemma X-means into pseudo-LUs, then group-average over pLU means.

    Returns (pLU assignment, final assignment), both keyed by instance id.
    pLU representatives are renormalized member means.
    """
    emb = embed_instances(ds, enc, alpha)
    lemma_indices: dict[str, list[int]] = {}
    for i, rec in enumerate(ds.records):
        lemma_indices.setdefault(rec.lemma, []).append(i)
    lemmas = sorted(lemma_indices)

    def split_lemma(lemma: str) -> ClusterAssignment:
        idx = lemma_indices[lemma]
        return xmeans(emb[idx], k_max_per_lemma, seed=_lemma_seed(seed, lemma))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(split_lemma, lemmas))
    else:
        results = [split_lemma(lemma) for lemma in lemmas]

    plu_labels: dict[str, int] = {}
    plu_members: list[list[int]] = []
    for lemma, assign in zip(lemmas, results):
        idx = lemma_indices[lemma]
        offset = len(plu_members)
        plu_members.extend([] for _ in range(assign.num_clusters))
        for local_i, cid in assign.labels.items():
            row = idx[local_i]
            plu_labels[ds.records[row].id] = offset + cid
            plu_members[offset + cid].append(row)
    plus = ClusterAssignment(labels=plu_labels, num_clusters=len(plu_members))

    reps = np.empty((len(plu_members), ds.dim))
    for p, rows in enumerate(plu_members):
        reps[p] = l2_normalize(emb[rows].mean(axis=0))
    if len(plu_members) == 1:
        final_of_plu = {0: 0}
        n_final = 1
    else:
        dg = group_average_cluster(reps)
        cut = cut_dendrogram(dg, threshold)
        final_of_plu = cut.labels
        n_final = cut.num_clusters
    final_labels = {
        rec_id: final_of_plu[plu] for rec_id, plu in plu_labels.items()
    }
    return plus, ClusterAssignment(labels=final_labels, num_clusters=n_final)
