"""Inference primitives for hybrid quantum-classical Ising optimisation.

A primitive maps a belief (bit values ``S``, cluster uncertainties ``P``) to
candidate solutions; processing functions map candidates back to beliefs;
protocols wire the two into search loops.
"""

from .backends import AnnealParams, infer
from .beliefs import Belief, CandidateSet
from .ising import ClusterSet, IsingProblem, energy, exhaustive_solve, generate_sk, sk_fix

__version__ = "0.1.0"

__all__ = ["AnnealParams", "Belief", "CandidateSet", "ClusterSet", "IsingProblem", "energy",
           "exhaustive_solve", "generate_sk", "infer", "sk_fix"]
