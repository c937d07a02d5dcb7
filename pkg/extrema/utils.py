import math
from typing import Dict, List, Tuple

import numpy as np


# Clustering of touching boxes
class UnionFind:
    """
    Disjoint sets over the integers `0..n-1` with path compression.
    Used to group surviving leaf boxes into clusters.
    """

    def __init__(self, n_vertices: int):
        self._parent = np.arange(n_vertices, dtype=int)

    def find(self, u: int) -> int:
        """
        Finds and returns the representative of u.
        """
        if self._parent[u] == u:
            return u
        self._parent[u] = self.find(self._parent[u])
        return self._parent[u]

    def merge(self, u: int, v: int):
        """
        Merges the component of u into the component of v. The smaller
        representative wins, so components are labelled by their first member.
        """
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if ru < rv:
            self._parent[rv] = ru
        else:
            self._parent[ru] = rv

    def components(self) -> List[List[int]]:
        """Members of every component, ordered by representative."""
        groups: Dict[int, List[int]] = {}
        for vertex in range(len(self._parent)):
            groups.setdefault(int(self.find(vertex)), []).append(vertex)
        return [groups[r] for r in sorted(groups)]


# Number formatting
def format_float(x: float) -> str:
    """Shortest decimal string that reads back to exactly `x`."""
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return repr(float(x))


def format_pair(lo: float, hi: float) -> Tuple[str, str]:
    return format_float(lo), format_float(hi)
