"""Brute-force structure oracles for small programs, intended for testing.

Both oracles perform full solves over many index subsets and are exponential
or linear in the pool size; callers must keep |C| small.
"""

from itertools import combinations

import numpy as np

from .programs import TAU_OBJ, ConvexProgram, solve


def support_set_oracle(program: ConvexProgram, tol=TAU_OBJ) -> tuple:
    """Ids whose removal strictly lowers the optimal value."""
    base = solve(program).j_star
    support = []
    for cid in sorted(program.indices):
        rest = tuple(c for c in program.indices if c != cid)
        if solve(program.restrict(rest)).j_star < base - tol:
            support.append(cid)
    return tuple(support)


def essential_sets_oracle(program: ConvexProgram, tol=TAU_OBJ, max_size=16) -> tuple:
    """All minimal-cardinality subsets attaining the full optimal value."""
    ids = tuple(sorted(program.indices))
    if len(ids) > max_size:
        raise ValueError("pool too large for exhaustive enumeration")
    base = solve(program).j_star
    for k in range(len(ids) + 1):
        found = []
        for subset in combinations(ids, k):
            j = solve(program.restrict(subset)).j_star
            if np.isinf(base) and np.isinf(j):
                found.append(subset)
            elif abs(j - base) <= tol:
                found.append(subset)
        if found:
            return tuple(found)
    return ((),)
