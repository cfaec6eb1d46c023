"""Ising problems, exact enumeration and spin-symmetry helpers.

Energies follow the minus convention

    E(s) = offset - sum_i h_i s_i - sum_{i<j} J_ij s_i s_j

where ``offset`` accumulates the constants produced when spins are fixed,
so energies of reduced problems stay comparable with the original one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, DimensionError, DomainError, InstanceFormatError

EXHAUSTIVE_CAP = 24
FORMAT_HEADER = "ising v1"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """Fields and couplers on an arbitrary graph, stored as an edge list.

    Args:
        n: number of spins.
        h: local fields, length ``n``.
        edges: ``(m, 2)`` integer array of coupler endpoints with ``i < j``.
        J: ``(m,)`` coupler strengths aligned with ``edges``.
        offset: constant energy term.
    """

    n: int
    h: np.ndarray
    edges: np.ndarray
    J: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise DomainError(f"spin count must be non-negative, got {n}")
        h = np.array(self.h, dtype=float).reshape(-1)
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        J = np.array(self.J, dtype=float).reshape(-1)
        if h.shape != (n,):
            raise DimensionError(f"expected {n} fields, got {h.size}")
        if edges.shape[0] != J.shape[0]:
            raise DimensionError("edges and J differ in length")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise DomainError("coupler index out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DomainError("self-coupling i == j is not allowed")
            lo = edges.min(axis=1)
            hi = edges.max(axis=1)
            edges = np.stack([lo, hi], axis=1)
            keys = lo * n + hi
            if np.unique(keys).size != keys.size:
                raise DomainError("duplicate coupler pair")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "J", _frozen(J))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_couplers(cls, n: int, fields: Sequence[float] | None = None,
                      couplers: Iterable[tuple[int, int, float]] = (),
                      offset: float = 0.0) -> "IsingProblem":
        couplers = list(couplers)
        edges = [(int(i), int(j)) for i, j, _ in couplers]
        J = [float(v) for _, _, v in couplers]
        h = np.zeros(n) if fields is None else fields
        return cls(n, h, np.array(edges, dtype=np.int64).reshape(-1, 2), J, offset)

    @cached_property
    def dense_J(self) -> np.ndarray:
        """Symmetric ``(n, n)`` coupling matrix with zero diagonal."""
        M = np.zeros((self.n, self.n))
        if self.J.size:
            i, j = self.edges[:, 0], self.edges[:, 1]
            M[i, j] = self.J
            M[j, i] = self.J
        return _frozen(M)

    @property
    def couplers(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for (i, j), v in zip(self.edges, self.J)]

    @property
    def field_free(self) -> bool:
        return not np.any(self.h)

    def __eq__(self, other):
        if not isinstance(other, IsingProblem):
            return NotImplemented
        return (self.n == other.n and self.offset == other.offset
                and np.array_equal(self.h, other.h)
                and sorted(self.couplers) == sorted(other.couplers))

    __hash__ = None


def as_config(config, n: int | None = None) -> np.ndarray:
    """Validate and return a ``±1`` spin vector as an ``int8`` array."""
    s = np.asarray(config)
    if s.ndim != 1:
        raise DimensionError("a spin configuration must be one-dimensional")
    if n is not None and s.shape[0] != n:
        raise DimensionError(f"configuration has length {s.shape[0]}, problem has {n} spins")
    if not np.all((s == 1) | (s == -1)):
        raise DomainError("spin entries must be +1 or -1")
    return s.astype(np.int8)


def energy(problem: IsingProblem, config) -> float:
    """Energy of one configuration under the minus sign convention."""
    s = as_config(config, problem.n).astype(float)
    e = problem.offset - float(problem.h @ s)
    if problem.J.size:
        e -= float(problem.J @ (s[problem.edges[:, 0]] * s[problem.edges[:, 1]]))
    return e


def energies(problem: IsingProblem, configs) -> np.ndarray:
    """Row-wise :func:`energy`; bit-identical to calling it per row."""
    configs = np.asarray(configs)
    if configs.ndim != 2:
        raise DimensionError("expected a 2-D array of configurations")
    return np.array([energy(problem, c) for c in configs], dtype=float)


def generate_sk(n: int, seed=None) -> IsingProblem:
    """Fully connected field-free instance with ``J_ij ~ U[-1, 1]``."""
    if n < 2:
        raise DomainError(f"SK instances need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(n, k=1)
    J = rng.uniform(-1.0, 1.0, size=i.size)
    return IsingProblem(n, np.zeros(n), np.stack([i, j], axis=1), J)


def fix_spin(problem: IsingProblem, index: int, value: int) -> IsingProblem:
    """Remove spin ``index`` held at ``value`` and fold its couplers into fields.

    The spin's own field contributes ``-h_index * value`` to the offset; every
    coupler ``J_{k,index}`` becomes an extra field ``J_{k,index} * value`` on
    ``k``. Remaining spins are renumbered in order.
    """
    if not 0 <= index < problem.n:
        raise IndexError(f"spin index {index} out of range for n={problem.n}")
    if value not in (1, -1):
        raise DomainError("fixed value must be +1 or -1")
    keep = np.array([k for k in range(problem.n) if k != index], dtype=np.int64)
    remap = -np.ones(problem.n, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    h = problem.h.copy()
    new_edges, new_J = [], []
    for (a, b), v in zip(problem.edges, problem.J):
        if a == index:
            h[b] += v * value
        elif b == index:
            h[a] += v * value
        else:
            new_edges.append((remap[a], remap[b]))
            new_J.append(v)
    offset = problem.offset - problem.h[index] * value
    return IsingProblem(problem.n - 1, h[keep], np.array(new_edges, dtype=np.int64).reshape(-1, 2),
                        new_J, offset)


def sk_fix(n: int, seed=None) -> IsingProblem:
    """SK instance on ``n`` spins with the last spin fixed down (``n - 1`` free spins)."""
    return fix_spin(generate_sk(n, seed), n - 1, -1)


def _all_energies(problem: IsingProblem, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(problem.n, dtype=np.int64)) & 1
    s = 1.0 - 2.0 * bits
    e = problem.offset - s @ problem.h
    if problem.J.size:
        e -= 0.5 * np.einsum("ki,ki->k", s @ problem.dense_J, s)
    return e


def config_from_index(k: int, n: int) -> np.ndarray:
    """Spin ``i`` is ``-1`` iff bit ``i`` of ``k`` is set."""
    return (1 - 2 * ((k >> np.arange(n)) & 1)).astype(np.int8)


def exhaustive_solve(problem: IsingProblem, cap: int = EXHAUSTIVE_CAP, chunk: int = 1 << 16,
                     rtol: float = 1e-9) -> tuple[list[np.ndarray], float]:
    """Enumerate all ``2**n`` states; return every ground state and its energy.

    States within ``rtol * (1 + |E_min|)`` of the minimum count as degenerate,
    which absorbs summation-order rounding between symmetric partners.
    """
    if problem.n > cap:
        raise CapExceeded(f"exhaustive search refused: n={problem.n} exceeds cap {cap}")
    total = 1 << problem.n
    best = math.inf
    hits: list[int] = []
    for start in range(0, total, chunk):
        e = _all_energies(problem, start, min(total, start + chunk))
        emin = float(e.min())
        tol = rtol * (1.0 + abs(min(best, emin)))
        if emin < best - tol:
            hits = []
        best = min(best, emin)
        hits.extend((start + np.flatnonzero(e <= best + tol)).tolist())
    configs = [config_from_index(k, problem.n) for k in sorted(set(hits))]
    exact = [energy(problem, c) for c in configs]
    emin = min(exact)
    tol = rtol * (1.0 + abs(emin))
    configs = [c for c, e in zip(configs, exact) if e <= emin + tol]
    return configs, emin


def global_flip(config) -> np.ndarray:
    return -as_config(config)


def hamming_distance(a, b) -> int:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


# -- instance files ---------------------------------------------------------

def format_instance(problem: IsingProblem) -> str:
    lines = [f"{FORMAT_HEADER} n={problem.n} sign=minus offset={problem.offset!r}"]
    lines += [f"h {i} {v!r}" for i, v in enumerate(problem.h.tolist())]
    lines += [f"J {i} {j} {v!r}" for i, j, v in problem.couplers]
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> IsingProblem:
    """Parse the ``ising v1`` text format (0-based indices, duplicates rejected)."""
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, ln) for k, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InstanceFormatError("empty instance file")
    lineno, header = lines[0]
    if not header.startswith(FORMAT_HEADER + " "):
        raise InstanceFormatError(f"line {lineno}: expected header '{FORMAT_HEADER} n=<N>'")
    meta = {}
    for tok in header[len(FORMAT_HEADER):].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise InstanceFormatError(f"line {lineno}: malformed header token {tok!r}")
        meta[key] = val
    unknown = set(meta) - {"n", "sign", "offset"}
    if unknown or "n" not in meta:
        raise InstanceFormatError(f"line {lineno}: bad header keys {sorted(unknown) or ['n missing']}")
    if meta.get("sign", "minus") != "minus":
        raise InstanceFormatError(f"line {lineno}: only sign=minus is supported")
    try:
        n = int(meta["n"])
        offset = float(meta.get("offset", 0.0))
    except ValueError as exc:
        raise InstanceFormatError(f"line {lineno}: {exc}") from None

    h = np.zeros(n)
    seen_h: set[int] = set()
    couplers: dict[tuple[int, int], float] = {}
    for lineno, ln in lines[1:]:
        parts = ln.split()
        try:
            if parts[0] == "h" and len(parts) == 3:
                i = int(parts[1])
                if not 0 <= i < n:
                    raise InstanceFormatError(f"line {lineno}: field index {i} out of range")
                if i in seen_h:
                    raise InstanceFormatError(f"line {lineno}: duplicate field for spin {i}")
                seen_h.add(i)
                h[i] = float(parts[2])
            elif parts[0] == "J" and len(parts) == 4:
                i, j = sorted((int(parts[1]), int(parts[2])))
                if i == j or i < 0 or j >= n:
                    raise InstanceFormatError(f"line {lineno}: invalid coupler ({parts[1]}, {parts[2]})")
                if (i, j) in couplers:
                    raise InstanceFormatError(f"line {lineno}: duplicate coupler ({i}, {j})")
                couplers[(i, j)] = float(parts[3])
            else:
                raise InstanceFormatError(f"line {lineno}: unrecognised record {ln!r}")
        except ValueError as exc:
            if isinstance(exc, InstanceFormatError):
                raise
            raise InstanceFormatError(f"line {lineno}: {exc}") from None
    return IsingProblem.from_couplers(n, h, [(i, j, v) for (i, j), v in couplers.items()], offset)


def write_instance(problem: IsingProblem, path) -> None:
    Path(path).write_text(format_instance(problem))


def read_instance(path) -> IsingProblem:
    return parse_instance(Path(path).read_text())


# -- clusters ---------------------------------------------------------------

@dataclass(frozen=True)
class ClusterSet:
    """Ordered list of unique, non-empty bit clusters."""

    clusters: tuple[tuple[int, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        norm = tuple(tuple(sorted(int(i) for i in c)) for c in self.clusters)
        seen = set()
        for c in norm:
            if not c:
                raise DomainError("clusters must be non-empty")
            if len(set(c)) != len(c):
                raise DomainError(f"cluster {c} repeats a bit")
            if c in seen:
                raise DomainError(f"cluster {c} appears twice")
            seen.add(c)
        object.__setattr__(self, "clusters", norm)

    @classmethod
    def singletons(cls, n: int) -> "ClusterSet":
        return cls(tuple((i,) for i in range(n)))

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __getitem__(self, k):
        return self.clusters[k]

    @property
    def all_singleton(self) -> bool:
        return all(len(c) == 1 for c in self.clusters)

    def max_bit(self) -> int:
        return max((max(c) for c in self.clusters), default=-1)

    def singleton_index(self, n: int) -> np.ndarray:
        """Cluster index of each bit's singleton cluster, ``-1`` if it has none."""
        out = -np.ones(n, dtype=np.int64)
        for k, c in enumerate(self.clusters):
            if len(c) == 1:
                out[c[0]] = k
        return out
