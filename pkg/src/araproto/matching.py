"""Maximum bipartite matching (augmenting paths).

Used both as the crossbar feasibility oracle and by the runtime buffer
allocator to bind accelerator ports to concrete banks.
"""

from typing import Dict, Hashable, Iterable, Mapping, Optional, Sequence


def max_matching(
    adj: Mapping[Hashable, Sequence[int]],
    order: Optional[Iterable[Hashable]] = None,
) -> Dict[Hashable, int]:
    """Return a maximum matching of left vertices onto right vertices.

    ``adj`` maps each left vertex to its candidate right vertices; candidates
    are tried in the given order, so callers can express bank preferences.
    Left vertices are processed in ``order`` (defaults to iteration order of
    ``adj``), which makes the result deterministic.
    """
    owner: Dict[int, Hashable] = {}

    def augment(u, seen):
        for v in adj[u]:
            if v in seen:
                continue
            seen.add(v)
            if v not in owner or augment(owner[v], seen):
                owner[v] = u
                return True
        return False

    for u in adj if order is None else order:
        augment(u, set())
    return {u: v for v, u in owner.items()}


def has_perfect_matching(adj: Mapping[Hashable, Sequence[int]]) -> bool:
    """True when every left vertex can be matched simultaneously."""
    if any(len(vs) == 0 for vs in adj.values()):
        return False
    return len(max_matching(adj)) == len(adj)
