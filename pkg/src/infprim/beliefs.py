"""Beliefs ``{R, S, P}`` and candidate lists ``{G, E}`` exchanged between nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DimensionError, DomainError
from .ising import ClusterSet, IsingProblem, as_config, energies


@dataclass(frozen=True, eq=False)
class Belief:
    """Inferred bit values ``S`` and per-cluster uncertainties ``P``."""

    R: ClusterSet
    S: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        S = as_config(self.S)
        P = np.array(self.P, dtype=float).reshape(-1)
        if P.shape[0] != len(self.R):
            raise DimensionError(f"{P.shape[0]} uncertainties for {len(self.R)} clusters")
        if self.R.max_bit() >= S.shape[0]:
            raise DimensionError("cluster refers to a bit beyond len(S)")
        if np.any(~np.isfinite(P)) or np.any(P < 0) or np.any(P > 0.5):
            raise DomainError("every P_i must lie in [0, 0.5]")
        S.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @classmethod
    def uniform(cls, R: ClusterSet, S, p: float) -> "Belief":
        return cls(R, S, np.full(len(R), float(p)))

    def __eq__(self, other):
        if not isinstance(other, Belief):
            return NotImplemented
        return (self.R == other.R and np.array_equal(self.S, other.S)
                and np.array_equal(self.P, other.P))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Solution candidates ``G`` (rows of ``±1``) with energies ``E``."""

    G: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G)
        if G.ndim != 2:
            raise DimensionError("G must be a 2-D array (reads x bits)")
        if G.size and not np.all((G == 1) | (G == -1)):
            raise DomainError("candidate entries must be +1 or -1")
        G = G.astype(np.int8)
        E = np.array(self.E, dtype=float).reshape(-1)
        if E.shape[0] != G.shape[0]:
            raise DimensionError(f"|G| = {G.shape[0]} but |E| = {E.shape[0]}")
        G.setflags(write=False)
        E.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "E", E)

    @classmethod
    def from_configs(cls, problem: IsingProblem, configs) -> "CandidateSet":
        G = np.asarray(configs, dtype=np.int8).reshape(-1, problem.n)
        return cls(G, energies(problem, G))

    def __len__(self):
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def best_index(self) -> int:
        """Lowest energy, first index on ties."""
        return int(np.argmin(self.E))

    @property
    def best(self) -> tuple[np.ndarray, float]:
        k = self.best_index
        return self.G[k], float(self.E[k])

    @property
    def min_energy(self) -> float:
        return float(self.E.min())

    def flipped(self) -> "CandidateSet":
        return CandidateSet(-self.G, self.E)

    def __eq__(self, other):
        if not isinstance(other, CandidateSet):
            return NotImplemented
        return np.array_equal(self.G, other.G) and np.array_equal(self.E, other.E)

    __hash__ = None

    def to_csv(self) -> str:
        n = self.n
        lines = ["read,energy," + ",".join(f"s{i}" for i in range(n))]
        for k, (g, e) in enumerate(zip(self.G, self.E)):
            lines.append(f"{k},{float(e)!r}," + ",".join(str(int(v)) for v in g))
        return "\n".join(lines) + "\n"


def check_energies(problem: IsingProblem, cands: CandidateSet) -> None:
    """Raise unless every ``E_j`` equals ``energy(G_j)`` exactly."""
    if not np.array_equal(energies(problem, cands.G), cands.E):
        raise ConsistencyError("candidate energies do not match the problem")
