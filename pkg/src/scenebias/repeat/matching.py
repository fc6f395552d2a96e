"""Maximum-cardinality bipartite matching (Hopcroft-Karp)."""

from __future__ import annotations

from collections import deque

__all__ = ["hopcroft_karp", "max_matching_size", "canonical_matching"]

_INF = float("inf")


def hopcroft_karp(adj: dict, right_excluded=frozenset()) -> dict:
    """Maximum matching of a bipartite graph.

    adj maps each left vertex to an iterable of right vertices. Returns a
    dict left -> right. Vertices are visited in sorted order, so the result
    is deterministic.
    """
    left = sorted(adj)
    nbrs = {u: [v for v in sorted(adj[u]) if v not in right_excluded] for u in left}
    match_l = {u: None for u in left}
    match_r = {}
    dist = {}

    def bfs():
        queue = deque()
        found = False
        for u in left:
            if match_l[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                w = match_r.get(v)
                if w is None:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u):
        # iterative augmenting-path search along the BFS layering
        stack = [(u, iter(nbrs[u]))]
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r.get(v)
                if w is None:
                    path.append((node, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[w] == dist[node] + 1:
                    path.append((node, v))
                    stack.append((w, iter(nbrs[w])))
                    advanced = True
                    break
            if not advanced:
                dist[node] = _INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in left:
            if match_l[u] is None:
                dfs(u)
    return {u: v for u, v in match_l.items() if v is not None}


def max_matching_size(adj: dict) -> int:
    return len(hopcroft_karp(adj))


def _components(adj: dict) -> list[tuple[list, set]]:
    right_to_left = {}
    for u, vs in adj.items():
        for v in vs:
            right_to_left.setdefault(v, []).append(u)
    seen = set()
    comps = []
    for start in sorted(adj):
        if start in seen or not adj[start]:
            continue
        lefts, rights = [], set()
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            lefts.append(u)
            for v in adj[u]:
                if v in rights:
                    continue
                rights.add(v)
                for w in right_to_left[v]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
        comps.append((sorted(lefts), rights))
    return comps


def canonical_matching(adj: dict) -> list[tuple[int, int]]:
    """The lexicographically smallest maximum matching, as sorted (left, right) pairs.

    Each connected component is settled independently: left vertices are
    taken in ascending order and paired with the smallest right vertex that
    still allows a maximum matching of the remainder.
    """
    pairs = []
    for lefts, _ in _components(adj):
        sub = {u: set(adj[u]) for u in lefts}
        target = max_matching_size(sub)
        used = set()
        fixed = 0
        remaining = list(lefts)
        while remaining:
            u = remaining.pop(0)
            rest = {w: sub[w] - used for w in remaining}
            for v in sorted(sub[u] - used):
                trial = {w: vs - {v} for w, vs in rest.items()}
                if fixed + 1 + max_matching_size(trial) == target:
                    pairs.append((u, v))
                    used.add(v)
                    fixed += 1
                    break
    return sorted(pairs)
