"""Deterministic numeric primitives: seeded RNG streams, PCA, k-means.

Everything is sized for the shapes this simulator actually produces: one row
per client, so the symmetric eigenproblems are at most ~20x20 and a cyclic
Jacobi sweep is both exact enough and dependency-free. PCA works on the Gram
matrix of the centered rows, never materializing a d x d covariance (d is the
flattened model dimension and can exceed 50,000).

All randomness flows through an explicitly passed RngStream; there is no
module-level RNG state, and every floating-point reduction runs in a fixed
order so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _key_to_int(key: int | str) -> int:
    if isinstance(key, int):
        return key & _MASK64
    # Fold string bytes through the mixer; unlike hash(), stable across runs.
    state = len(key) & _MASK64
    for b in key.encode("utf-8"):
        state = _splitmix64(state ^ b)
    return state


def derive_seed(base: int, *keys: int | str) -> int:
    """Mix a base seed with keys into a new 64-bit seed.

    Used to hand each client, round, and subsystem its own independent
    stream without shared RNG state.
    """
    state = _splitmix64(base & _MASK64)
    for key in keys:
        state = _splitmix64(state ^ _key_to_int(key))
    return state


class RngStream:
    """Seeded pseudorandom stream owned by a single consumer.

    Thin wrapper over numpy's PCG64 generator: the same seed produces the
    identical sequence on every platform numpy supports.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, *keys: int | str) -> RngStream:
        """Child stream seeded from this stream's seed and the given keys."""
        return RngStream(derive_seed(self.seed, *keys))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, upper: int) -> int:
        """Single integer in [0, upper)."""
        return int(self._gen.integers(upper))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-D float64 array with finite entries."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def l2_norm(v) -> float:
    """Euclidean norm of a flat vector."""
    a = np.asarray(v, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError("l2_norm: non-finite entries")
    return float(np.sqrt(np.dot(a, a)))


# --------------------------------------------------------------------------
# Symmetric eigendecomposition (cyclic Jacobi)
# --------------------------------------------------------------------------

def jacobi_eigh(a: np.ndarray, max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue;
    eigenvectors are columns. Accurate to machine precision for the tiny
    (<= ~20x20) matrices produced here.
    """
    a = as_matrix(a, "symmetric matrix")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    w = a.copy()
    v = np.eye(n)
    scale = max(float(np.abs(w).max()), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(w, -1) ** 2))
        if off <= 1e-14 * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                # Smaller-magnitude root of t^2 + 2*theta*t - 1 = 0.
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # B = J^T W J with J the (p, q)-plane rotation [[c, s], [-s, c]];
                # this choice of t zeroes B[p, q].
                row_p, row_q = w[p, :].copy(), w[q, :].copy()
                w[p, :] = c * row_p - s * row_q
                w[q, :] = s * row_p + c * row_q
                col_p, col_q = w[:, p].copy(), w[:, q].copy()
                w[:, p] = c * col_p - s * col_q
                w[:, q] = s * col_p + c * col_q
                v_p, v_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * v_p - s * v_q
                v[:, q] = s * v_p + c * v_q
    eigvals = np.diag(w).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


# --------------------------------------------------------------------------
# PCA
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    """Principal components of a set of row samples.

    components holds k orthonormal rows of length d; explained_variance is
    sorted descending (sample covariance convention, divisor n - 1).
    degenerate marks inputs with no spread (all rows identical), in which
    case components are an arbitrary orthonormal set and variances are zero.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[0]


def _fill_orthonormal(rows: list[np.ndarray], d: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to all given orthonormal rows."""
    for j in range(d):
        cand = np.zeros(d)
        cand[j] = 1.0
        for r in rows:
            cand -= np.dot(cand, r) * r
        norm = np.sqrt(np.dot(cand, cand))
        if norm > 0.5:
            return cand / norm
    raise ValueError("cannot extend orthonormal basis: k exceeds dimension")


def pca_fit(samples, k: int) -> PcaModel:
    """Fit the top-k principal directions of mean-centered row samples.

    Solves the n x n Gram eigenproblem of the centered rows rather than the
    d x d covariance, which is exact and cheap for n << d. Rank-deficient
    inputs get zero variance for the missing directions and a deterministic
    orthonormal completion of the component set.
    """
    x = as_matrix(samples, "samples")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"pca_fit requires at least 2 samples, got {n}")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} outside [1, min(n-1, d)] = [1, {min(n - 1, d)}]")

    mean = x.mean(axis=0)
    centered = x - mean
    gram = centered @ centered.T
    eigvals, eigvecs = jacobi_eigh(gram)

    total_spread = float(np.trace(gram))
    magnitude = max(float(np.sum(x * x)), 1.0)
    degenerate = total_spread <= 1e-24 * magnitude
    zero_tol = max(total_spread * 1e-12, 1e-24 * magnitude)

    components = np.zeros((k, d))
    explained = np.zeros(k)
    have: list[np.ndarray] = []
    for i in range(k):
        lam = float(eigvals[i])
        if not degenerate and lam > zero_tol:
            comp = centered.T @ eigvecs[:, i] / np.sqrt(lam)
            # Deterministic sign: largest-magnitude coordinate made positive.
            lead = int(np.argmax(np.abs(comp)))
            if comp[lead] < 0:
                comp = -comp
            components[i] = comp
            explained[i] = lam / (n - 1)
        else:
            components[i] = _fill_orthonormal(have, d)
        have.append(components[i])
    return PcaModel(mean=mean, components=components, explained_variance=explained, degenerate=degenerate)


def pca_transform(model: PcaModel, samples) -> np.ndarray:
    """Project rows onto the model's components: each row -> C (row - mean)."""
    x = as_matrix(samples, "samples")
    if x.shape[1] != model.dim:
        raise ValueError(f"sample width {x.shape[1]} != model dimension {model.dim}")
    return (x - model.mean) @ model.components.T


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------

def _kmeanspp_init(points: np.ndarray, k: int, rng: RngStream) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.uniform(0.0, total)
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def kmeans(points, clusters: int, rng: RngStream, max_iters: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding.

    Ties in assignment go to the lowest centroid index; an empty cluster is
    repaired by moving the point farthest from its current centroid into it.
    Terminates when assignments stabilize or after max_iters. Fully
    deterministic given the RngStream.
    """
    x = as_matrix(points, "points")
    n = x.shape[0]
    if not 1 <= clusters <= n:
        raise ValueError(f"clusters={clusters} outside [1, n={n}]")

    centroids = _kmeanspp_init(x, clusters, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _squared_distances(x, centroids)
        new_assign = np.argmin(d2, axis=1).astype(np.int64)

        counts = np.bincount(new_assign, minlength=clusters)
        for empty in np.flatnonzero(counts == 0):
            own_dist = d2[np.arange(n), new_assign].copy()
            # Only points whose cluster keeps >= 2 members may move.
            own_dist[counts[new_assign] <= 1] = -1.0
            far = int(np.argmax(own_dist))
            counts[new_assign[far]] -= 1
            new_assign[far] = empty
            counts[empty] += 1

        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for c in range(clusters):
            members = x[assignments == c]
            if members.shape[0] > 0:
                centroids[c] = members.mean(axis=0)
    return assignments, centroids


def wcss(points, assignments, centroids) -> float:
    """Within-cluster sum of squared distances."""
    x = as_matrix(points, "points")
    c = as_matrix(centroids, "centroids")
    a = np.asarray(assignments, dtype=np.int64)
    diff = x - c[a]
    return float(np.sum(diff * diff))
