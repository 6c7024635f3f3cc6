"""K-means over strategy latents with silhouette model selection.

Clusters are summarized as diagonal Gaussians (empirical per-dimension
member variance, floored) so downstream consumers can sample representative
latents per cluster.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

VARIANCE_FLOOR = 1e-4
MAX_ITERATIONS = 300
CLUSTER_MAGIC = b"TLCL"


class ClusterFileError(Exception):
    """Raised for malformed or corrupted cluster files."""


@dataclass
class ClusterSet:
    means: np.ndarray       # (K, dim)
    variances: np.ndarray   # (K, dim), floored
    counts: np.ndarray      # (K,)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.maximum(
            np.asarray(self.variances, dtype=np.float64), VARIANCE_FLOOR)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not (len(self.means) == len(self.variances) ==
                len(self.counts) >= 1):
            raise ValueError("inconsistent cluster set")

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.means, self.variances, self.counts):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()[:16]

    def assign(self, latents: np.ndarray) -> np.ndarray:
        """Nearest-mean cluster index for each latent row."""
        latents = np.atleast_2d(latents)
        d2 = ((latents[:, None, :] - self.means[None]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


@dataclass
class SilhouetteReport:
    scores: dict            # K -> mean silhouette
    chosen_k: int

    def __post_init__(self):
        best = max(self.scores.values())
        expected = min(k for k, s in self.scores.items() if s == best)
        if self.chosen_k != expected:
            raise ValueError("chosen K must be the silhouette argmax "
                             "(ties to the smaller K)")


def sample_latent(clusters: ClusterSet, c: int, rng) -> np.ndarray:
    if not 0 <= c < clusters.k:
        raise IndexError(f"cluster {c} out of range")
    sigma = np.sqrt(clusters.variances[c])
    return clusters.means[c] + sigma * rng.standard_normal(clusters.dim)


# ---------------------------------------------------------------------------
# Lloyd's algorithm


def _kmeanspp_init(latents: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(latents)
    centers = [latents[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((latents[:, None, :] -
                      np.asarray(centers)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(latents[rng.integers(n)])
            continue
        centers.append(latents[rng.choice(n, p=d2 / total)])
    return np.asarray(centers, dtype=np.float64)


def fit_kmeans(latents: np.ndarray, k: int, seed: int):
    """Lloyd's algorithm with k-means++ seeding.

    Returns (assignment, ClusterSet, inertia trace). The trace records the
    within-cluster inertia after every assignment step and is non-increasing.
    """
    latents = np.asarray(latents, dtype=np.float64)
    n = len(latents)
    if k < 1 or k > n:
        raise ValueError(f"K={k} out of range for {n} points")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(latents, k, rng)
    trace = []
    assignment = None
    for _ in range(MAX_ITERATIONS):
        d2 = ((latents[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(n), new_assignment].sum()))
        if assignment is not None and (new_assignment == assignment).all():
            break
        assignment = new_assignment
        for c in range(k):
            members = latents[assignment == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from its
                # current center.
                worst = d2[np.arange(n), assignment].argmax()
                centers[c] = latents[worst]
    variances = np.empty_like(centers)
    counts = np.empty(k, dtype=np.int64)
    for c in range(k):
        members = latents[assignment == c]
        counts[c] = len(members)
        variances[c] = members.var(axis=0) if len(members) else 0.0
    clusters = ClusterSet(centers, variances, counts)
    return assignment, clusters, trace


# ---------------------------------------------------------------------------
# Silhouette


def silhouette(latents: np.ndarray, assignment: np.ndarray):
    """Mean silhouette score; ``None`` when only one cluster exists."""
    latents = np.asarray(latents, dtype=np.float64)
    assignment = np.asarray(assignment)
    labels = np.unique(assignment)
    if len(labels) < 2:
        return None
    dists = np.sqrt(np.maximum(
        ((latents[:, None, :] - latents[None]) ** 2).sum(axis=2), 0.0))
    scores = np.zeros(len(latents))
    for i in range(len(latents)):
        own = assignment == assignment[i]
        if own.sum() <= 1:
            continue                    # singleton contributes 0
        a = dists[i][own].sum() / (own.sum() - 1)
        b = min(dists[i][assignment == other].mean()
                for other in labels if other != assignment[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


@dataclass
class SelectionResult:
    report: SilhouetteReport
    clusters: ClusterSet
    assignment: np.ndarray = field(repr=False)


def select_k(latents: np.ndarray, k_range=range(2, 17), seed: int = 0,
             restarts: int = 5) -> SelectionResult:
    """Silhouette-argmax model selection over K with best-of-5 restarts."""
    latents = np.asarray(latents, dtype=np.float64)
    ks = [k for k in k_range if 2 <= k <= len(latents) - 1]
    if not ks:
        raise ValueError("empty K range")
    scores, fits = {}, {}
    for k in ks:
        best = None
        for restart in range(restarts):
            fit = fit_kmeans(latents, k, seed * 1000 + k * 10 + restart)
            if best is None or fit[2][-1] < best[2][-1]:
                best = fit
        assignment, clusters, _ = best
        scores[k] = silhouette(latents, assignment)
        fits[k] = (assignment, clusters)
    top = max(scores.values())
    chosen = min(k for k, s in scores.items() if s == top)
    assignment, clusters = fits[chosen]
    return SelectionResult(SilhouetteReport(scores, chosen), clusters,
                           assignment)


# ---------------------------------------------------------------------------
# Persistence


def save_clusters(clusters: ClusterSet, path) -> None:
    body = b"".join([
        CLUSTER_MAGIC, struct.pack("<HII", 1, clusters.k, clusters.dim),
        np.ascontiguousarray(clusters.means, dtype="<f8").tobytes(),
        np.ascontiguousarray(clusters.variances, dtype="<f8").tobytes(),
        np.ascontiguousarray(clusters.counts, dtype="<i8").tobytes(),
    ])
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_clusters(path) -> ClusterSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 18 or blob[:4] != CLUSTER_MAGIC:
        raise ClusterFileError("not a cluster file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ClusterFileError("cluster file checksum mismatch")
    version, k, dim = struct.unpack_from("<HII", body, 4)
    if version != 1:
        raise ClusterFileError(f"unsupported cluster file version {version}")
    off = 14
    means = np.frombuffer(body, "<f8", k * dim, off).reshape(k, dim)
    off += k * dim * 8
    variances = np.frombuffer(body, "<f8", k * dim, off).reshape(k, dim)
    off += k * dim * 8
    counts = np.frombuffer(body, "<i8", k, off)
    return ClusterSet(means.copy(), variances.copy(), counts.copy())
