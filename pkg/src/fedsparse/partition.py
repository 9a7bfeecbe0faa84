"""Dirichlet sampling, its log-density, and label-skew dataset partitioning.

Client heterogeneity is simulated the usual way: for every class, a
proportion vector over the clients is drawn from a symmetric Dirichlet
with concentration alpha, and that class's samples are dealt out
accordingly. Small alpha concentrates each class on few clients; large
alpha approaches a balanced split.

The Gamma/Dirichlet sampler and log-Gamma are implemented here rather
than taken from a library: Gamma variates via the Marsaglia-Tsang
squeeze method (with the u^(1/a) boost for shape < 1), log-Gamma via the
9-coefficient Lanczos approximation with reflection for x < 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Lanczos g=7, n=9 coefficients.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_LN_SQRT_2PI = 0.9189385332046727


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0, Lanczos approximation."""
    if x <= 0:
        raise ValueError(f"log_gamma needs x > 0, got {x}")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    series = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        series += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (x + 0.5) * math.log(t) - t + math.log(series)


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector; every entry strictly positive, length >= 2."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) < 2:
            raise ValueError("need at least two components")
        if any(a <= 0 for a in self.alpha):
            raise ValueError("every concentration must be > 0")

    @classmethod
    def symmetric(cls, alpha: float, k: int) -> "DirichletParams":
        return cls((float(alpha),) * k)


def _gamma_draw(shape: float, rng: np.random.Generator) -> float:
    """One Gamma(shape, 1) variate, Marsaglia-Tsang."""
    if shape < 1.0:
        # boost: G(a) = G(a+1) * U^(1/a)
        g = _gamma_draw(shape + 1.0, rng)
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return g * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * x ** 4:
            return d * v
        if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def _sample_proportions(alpha, rng: np.random.Generator) -> np.ndarray:
    gammas = np.array([_gamma_draw(a, rng) for a in alpha])
    total = gammas.sum()
    while total == 0.0:  # underflow guard for very small alphas
        gammas = np.array([_gamma_draw(a, rng) for a in alpha])
        total = gammas.sum()
    return gammas / total


def sample_dirichlet(params: DirichletParams, rng_seed) -> np.ndarray:
    """Gamma-normalization draw: G_i ~ Gamma(alpha_i, 1), return G / sum(G)."""
    return _sample_proportions(params.alpha, np.random.default_rng(rng_seed))


def dirichlet_log_pdf(params: DirichletParams, x) -> float:
    """Log-density sum((alpha_i - 1) ln x_i) - ln B(alpha), with
    ln B(alpha) = sum(ln Gamma(alpha_i)) - ln Gamma(sum(alpha))."""
    alpha = np.asarray(params.alpha)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != alpha.shape:
        raise ValueError(f"x has shape {x.shape}, alpha has shape {alpha.shape}")
    if np.any(x < 0):
        raise ValueError("proportions must be nonnegative")
    if abs(x.sum() - 1.0) > 1e-9:
        raise ValueError(f"proportions sum to {x.sum()!r}, not 1 within 1e-9")
    if np.any((x == 0) & (alpha < 1)):
        raise ValueError("zero proportion with concentration < 1 has unbounded density")
    log_beta = sum(log_gamma(a) for a in alpha) - log_gamma(float(alpha.sum()))
    total = -log_beta
    for a, xi in zip(alpha, x):
        if a != 1.0:  # skip exponent-zero terms so x_i = 0 stays well-defined
            total += (a - 1.0) * math.log(xi) if xi > 0 else -math.inf
    return total


@dataclass
class Partition:
    """One client's slice of a dataset: indices into it plus its weight |D_i|/|D|."""

    client_id: int
    sample_indices: np.ndarray
    weight: float

    def __post_init__(self):
        self.sample_indices = np.asarray(self.sample_indices, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.sample_indices.shape[0])


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to `total`, proportional to quotas.

    Floor first, then hand the leftovers to the largest remainders
    (ties toward the lower client index).
    """
    base = np.floor(quotas).astype(np.int64)
    leftover = total - int(base.sum())
    if leftover > 0:
        remainders = quotas - base
        order = np.lexsort((np.arange(len(quotas)), -remainders))
        base[order[:leftover]] += 1
    return base


def partition_dataset(labels, n_clients: int, alpha: float, rng_seed) -> list[Partition]:
    """Label-skew split of a dataset (given by its label array) across clients.

    Per class, draw client proportions from Dir(alpha * ones(n_clients)),
    shuffle that class's sample positions, and deal them out with
    largest-remainder rounding. Clients that end up empty are repaired by
    moving one sample at a time from the currently largest client.
    Deterministic given rng_seed.
    """
    labels = np.asarray(labels)
    if n_clients < 1:
        raise ValueError("need at least one client")
    if labels.shape[0] < n_clients:
        raise ValueError(
            f"dataset has {labels.shape[0]} samples, fewer than {n_clients} clients"
        )
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    rng = np.random.default_rng(rng_seed)
    per_client: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
    for cls in np.unique(labels):
        cls_idx = np.flatnonzero(labels == cls)
        if n_clients == 1:
            props = np.ones(1)
        else:
            props = _sample_proportions((alpha,) * n_clients, rng)
        shuffled = rng.permutation(cls_idx)
        counts = _largest_remainder(props * cls_idx.shape[0], cls_idx.shape[0])
        start = 0
        for cid in range(n_clients):
            per_client[cid].append(shuffled[start:start + counts[cid]])
            start += counts[cid]
    assignments = [
        np.sort(np.concatenate(chunks)) if chunks else np.empty(0, dtype=np.int64)
        for chunks in per_client
    ]
    _repair_empty(assignments)
    total = labels.shape[0]
    return [
        Partition(cid, idx, idx.shape[0] / total)
        for cid, idx in enumerate(assignments)
    ]


def _repair_empty(assignments: list[np.ndarray]) -> None:
    """Move single samples from the largest client until none is empty."""
    while True:
        sizes = np.array([a.shape[0] for a in assignments])
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            return
        donor = int(np.argmax(sizes))
        taker = int(empty[0])
        assignments[taker] = assignments[donor][-1:]
        assignments[donor] = assignments[donor][:-1]


def export_assignments_csv(partitions: list[Partition], path) -> None:
    """Audit dump: one (sample_index, client_id) row per sample, sorted by index."""
    rows = []
    for p in partitions:
        for idx in p.sample_indices:
            rows.append((int(idx), p.client_id))
    rows.sort()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sample_index,client_id\n")
        for idx, cid in rows:
            fh.write(f"{idx},{cid}\n")
