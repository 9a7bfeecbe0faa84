"""Update sparsifiers, the sparse-update container, and its wire codec.

Three ways to shrink a dense update vector before upload:

* top_k      -- keep the max(1, ceil(K*d)) coordinates of largest magnitude
* threshold  -- keep every coordinate with |v| >= tau (may keep none)
* random     -- keep a uniformly chosen subset of max(1, ceil(K*d)) coordinates

plus a pass-through "dense" policy. Retained-count ties in top_k break
toward the lower index so results are reproducible.

The binary wire format ("FSU1") is the byte-accounting contract: header of
27 bytes (magic, version, dim, entry count, round, client id, all
little-endian) followed by 4-byte unsigned indices and 4-byte IEEE-754
single-precision values, 8 bytes per retained entry. Values are stored at
32-bit precision on the wire; in-memory updates keep float64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FSU1"
WIRE_VERSION = 1
HEADER_BYTES = 27  # 4 magic + 1 version + 8 dim + 8 count + 4 round + 2 client_id
BYTES_PER_ENTRY = 8  # 4-byte index + 4-byte float32 value

_HEADER = struct.Struct("<4sBQQIH")


class DecodeError(ValueError):
    """Malformed FSU1 payload; message names the byte offset of the problem."""


@dataclass
class SparseUpdate:
    """Index/value pairs of a sparsified length-`dim` vector.

    Indices are strictly increasing and < dim. `round` and `client_id`
    tag the update's origin and travel on the wire.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray
    round: int = 0
    client_id: int = 0

    def __post_init__(self):
        self.dim = int(self.dim)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.dim < 0:
            raise ValueError("dim must be nonnegative")
        if self.indices.ndim != 1 or self.values.ndim != 1:
            raise ValueError("indices and values must be 1-d")
        if self.indices.shape[0] != self.values.shape[0]:
            raise ValueError(
                f"{self.indices.shape[0]} indices but {self.values.shape[0]} values"
            )
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.dim:
                raise ValueError("indices must lie in [0, dim)")
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError("indices must be strictly increasing")

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseUpdate):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.round == other.round
            and self.client_id == other.client_id
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class SparsityPolicy:
    """Which sparsifier to run and with what parameter.

    kind "top_k" and "random" use `rate` (the retained fraction K in
    (0, 1]); kind "threshold" uses `tau` (>= 0); kind "dense" keeps
    everything and ignores both.
    """

    kind: str
    rate: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("top_k", "threshold", "random", "dense"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("top_k", "random"):
            if self.rate is None:
                raise ValueError(f"{self.kind} policy needs a rate")
            _check_rate(self.rate)
        if self.kind == "threshold":
            if self.tau is None:
                raise ValueError("threshold policy needs tau")
            if self.tau < 0:
                raise ValueError("tau must be >= 0")


def _check_rate(rate: float) -> None:
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"rate must be in (0, 1], got {rate}")


def _check_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("expected a nonempty 1-d vector")
    if np.isnan(v).any():
        raise ValueError("vector contains NaN")
    return v


def retained_count(rate: float, dim: int) -> int:
    """max(1, ceil(rate*dim)), with a small slack so that e.g. 0.1 * 1000
    (which rounds up to 100.00000000000001 in binary) still yields 100."""
    _check_rate(rate)
    return max(1, math.ceil(rate * dim - 1e-9))


def top_k_sparsify(v, rate: float, *, round: int = 0, client_id: int = 0) -> SparseUpdate:
    """Keep the retained_count(rate, d) entries of largest |v|."""
    v = _check_vector(v)
    m = retained_count(rate, v.shape[0])
    # stable sort on -|v|: magnitude ties keep ascending-index order
    order = np.argsort(-np.abs(v), kind="stable")
    keep = np.sort(order[:m])
    return SparseUpdate(v.shape[0], keep, v[keep], round=round, client_id=client_id)


def threshold_sparsify(v, tau: float, *, round: int = 0, client_id: int = 0) -> SparseUpdate:
    """Keep every entry with |v| >= tau (boundary inclusive); may keep none."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    v = _check_vector(v)
    keep = np.flatnonzero(np.abs(v) >= tau)
    return SparseUpdate(v.shape[0], keep, v[keep], round=round, client_id=client_id)


def random_sparsify(v, rate: float, rng_seed, *, round: int = 0,
                    client_id: int = 0) -> SparseUpdate:
    """Keep a uniformly chosen subset of retained_count(rate, d) entries."""
    v = _check_vector(v)
    m = retained_count(rate, v.shape[0])
    rng = np.random.default_rng(rng_seed)
    keep = np.sort(rng.choice(v.shape[0], size=m, replace=False))
    return SparseUpdate(v.shape[0], keep, v[keep], round=round, client_id=client_id)


def dense_update(v, *, round: int = 0, client_id: int = 0) -> SparseUpdate:
    v = _check_vector(v)
    return SparseUpdate(v.shape[0], np.arange(v.shape[0]), v.copy(),
                        round=round, client_id=client_id)


def sparsify(v, policy: SparsityPolicy, rng_seed=None, *, round: int = 0,
             client_id: int = 0) -> SparseUpdate:
    """Dispatch on policy kind. `rng_seed` is only consulted by "random"."""
    if policy.kind == "top_k":
        return top_k_sparsify(v, policy.rate, round=round, client_id=client_id)
    if policy.kind == "threshold":
        return threshold_sparsify(v, policy.tau, round=round, client_id=client_id)
    if policy.kind == "random":
        if rng_seed is None:
            raise ValueError("random policy needs an rng_seed")
        return random_sparsify(v, policy.rate, rng_seed, round=round, client_id=client_id)
    return dense_update(v, round=round, client_id=client_id)


def densify(u: SparseUpdate) -> np.ndarray:
    """Length-dim vector with u.values scattered at u.indices, zeros elsewhere."""
    out = np.zeros(u.dim)
    out[u.indices] = u.values
    return out


def encoded_size(entry_count: int) -> int:
    return HEADER_BYTES + BYTES_PER_ENTRY * entry_count


def encode(u: SparseUpdate) -> bytes:
    """Serialize to the FSU1 wire format. Values are rounded to float32."""
    m = len(u)
    if u.dim >= 2 ** 64:
        raise ValueError("dim does not fit the 8-byte wire field")
    if m and int(u.indices.max()) >= 2 ** 32:
        raise ValueError("index does not fit the 4-byte wire field")
    if not (0 <= u.round < 2 ** 32):
        raise ValueError("round does not fit the 4-byte wire field")
    if not (0 <= u.client_id < 2 ** 16):
        raise ValueError("client_id does not fit the 2-byte wire field")
    header = _HEADER.pack(MAGIC, WIRE_VERSION, u.dim, m, u.round, u.client_id)
    return (header
            + u.indices.astype("<u4").tobytes()
            + u.values.astype("<f4").tobytes())


def decode(data: bytes) -> SparseUpdate:
    """Parse FSU1 bytes; inverse of encode at float32 value precision."""
    if len(data) < HEADER_BYTES:
        raise DecodeError(
            f"truncated header at offset {len(data)}: need {HEADER_BYTES} bytes, "
            f"got {len(data)}"
        )
    magic, version, dim, m, rnd, client_id = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported version {version} at offset 4")
    expected = encoded_size(m)
    if len(data) != expected:
        raise DecodeError(
            f"payload length mismatch at offset {min(len(data), expected)}: "
            f"expected {expected} bytes for {m} entries, got {len(data)}"
        )
    indices = np.frombuffer(data, dtype="<u4", count=m, offset=HEADER_BYTES).astype(np.int64)
    values = np.frombuffer(data, dtype="<f4", count=m,
                           offset=HEADER_BYTES + 4 * m).astype(np.float64)
    if m:
        if indices.max() >= dim:
            bad = int(np.argmax(indices >= dim))
            raise DecodeError(
                f"index {indices[bad]} >= dim {dim} at offset {HEADER_BYTES + 4 * bad}"
            )
        steps = np.diff(indices)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0)) + 1
            raise DecodeError(
                f"non-increasing index at offset {HEADER_BYTES + 4 * bad}"
            )
    return SparseUpdate(dim, indices, values, round=rnd, client_id=client_id)


def comm_bytes(updates) -> int:
    """Total encoded length of a batch of updates."""
    return sum(encoded_size(len(u)) for u in updates)
