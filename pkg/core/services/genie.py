"""
services/genie.py
Exhaustive genie-aided scheduling: the largest set of concurrent transmissions
that all meet the SINR threshold on one channel realisation.

Single-hop pairs transmitter ``i`` with receiver ``i``. Two-hop lets each
source pick any relay; the interference at a relay depends only on which
sources transmit, so for a fixed source set the feasible source -> relay links
form a bipartite "success graph" and a perfect matching replaces the search
over assignments.

Environment variables
---------------------
``SCALING_LAB_GENIE_SINGLE_LIMIT``  : largest n searched exhaustively, single-hop (default 16)
``SCALING_LAB_GENIE_TWO_HOP_LIMIT`` : largest n searched exhaustively, two-hop (default 12)
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Sequence
from itertools import combinations, permutations
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.special import gammaln

from ..common.errors import DomainError, SizeLimitError
from ..common.observability import get_logger, log_event
from ..models.channel import ChannelMatrix, LinkParams
from ..models.protocol import GenieMode, GenieResult

logger = get_logger("genie")

DEFAULT_SINGLE_LIMIT = 16
DEFAULT_TWO_HOP_LIMIT = 12


def single_hop_limit() -> int:
    return int(os.getenv("SCALING_LAB_GENIE_SINGLE_LIMIT", str(DEFAULT_SINGLE_LIMIT)))


def two_hop_limit() -> int:
    return int(os.getenv("SCALING_LAB_GENIE_TWO_HOP_LIMIT", str(DEFAULT_TWO_HOP_LIMIT)))


def _check_size(what: str, n: int, limit: int, force_exponential: bool) -> None:
    if n <= limit:
        return
    if not force_exponential:
        raise SizeLimitError(what, n, limit)
    log_event(logger, "genie.limit_overridden", level=logging.WARNING, search=what, n=n, limit=limit)


# ---------------------------------------------------------------------------
# Maximum bipartite matching
# ---------------------------------------------------------------------------

def hopcroft_karp(adjacency: Sequence[Sequence[int]], n_left: int, n_right: int) -> list[tuple[int, int]]:
    """
    Matched ``(left, right)`` pairs of a maximum matching, ordered by left vertex.

    ``adjacency[u]`` lists the right vertices adjacent to left vertex ``u``. The
    matching runs on the sparse ``n_left x n_right`` biadjacency matrix.
    """
    if len(adjacency) != n_left:
        raise DomainError("hopcroft_karp: adjacency must have one entry per left vertex")
    rows = [u for u, neighbours in enumerate(adjacency) for _ in neighbours]
    cols = [v for neighbours in adjacency for v in neighbours]
    for v in cols:
        if not 0 <= v < n_right:
            raise DomainError(f"hopcroft_karp: right vertex {v} outside [0, {n_right})")
    if not cols:
        return []
    graph = csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(n_left, n_right))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return [(u, int(v)) for u, v in enumerate(match) if v != -1]


# ---------------------------------------------------------------------------
# Link tests on a candidate set
# ---------------------------------------------------------------------------

def _link_passes(H: ChannelMatrix, members: tuple[int, ...], i: int, j: int, params: LinkParams) -> bool:
    gains = H.gains
    noise_plus = params.noise + math.fsum(gains[t, j] for t in members if t != i)
    return gains[i, j] / noise_plus >= params.beta0


def _single_valid(H: ChannelMatrix, members: tuple[int, ...], params: LinkParams) -> bool:
    return all(_link_passes(H, members, i, i, params) for i in members)


def _success_graph(H: ChannelMatrix, members: tuple[int, ...], params: LinkParams) -> list[list[int]]:
    return [
        [j for j in range(H.n_rx) if _link_passes(H, members, i, j, params)]
        for i in members
    ]


def _two_hop_matching(
    H: ChannelMatrix, members: tuple[int, ...], params: LinkParams
) -> Optional[list[tuple[int, int]]]:
    adjacency = _success_graph(H, members, params)
    if any(not neighbours for neighbours in adjacency):
        return None
    matching = hopcroft_karp(adjacency, len(members), H.n_rx)
    if len(matching) < len(members):
        return None
    return [(members[u], v) for u, v in matching]


def _check_square(H: ChannelMatrix, what: str) -> None:
    if not H.is_square:
        raise DomainError(f"{what}: channel must be square, got {H.n_tx}x{H.n_rx}")


def _check_two_hop(params: LinkParams) -> None:
    if params.beta0 < 1:
        raise DomainError(
            f"two-hop genie requires beta0 >= 1 so each relay decodes at most one source, got {params.beta0}"
        )


def _single_candidates(H: ChannelMatrix, params: LinkParams) -> tuple[int, ...]:
    # valid sets are closed under removal, so a pair failing alone is never in a valid set
    return tuple(i for i in range(H.n_tx) if _link_passes(H, (i,), i, i, params))


def _two_hop_candidates(H: ChannelMatrix, params: LinkParams) -> tuple[int, ...]:
    return tuple(i for i in range(H.n_tx) if any(_link_passes(H, (i,), i, j, params) for j in range(H.n_rx)))


# ---------------------------------------------------------------------------
# Searches
# ---------------------------------------------------------------------------

def max_valid_single_hop(
    H: ChannelMatrix,
    params: LinkParams,
    *,
    limit: Optional[int] = None,
    force_exponential: bool = False,
    count_m: Optional[int] = None,
) -> GenieResult:
    """Largest set S with every pair i in S meeting the threshold at receiver i."""
    _check_square(H, "max_valid_single_hop")
    _check_size("max_valid_single_hop", H.n_tx, single_hop_limit() if limit is None else limit, force_exponential)

    candidates = _single_candidates(H, params)
    checked = 0
    best: tuple[int, ...] = ()
    for m in range(len(candidates), 0, -1):
        for members in combinations(candidates, m):
            checked += 1
            if _single_valid(H, members, params):
                best = members
                break
        if best:
            break

    valid_count = None
    if count_m is not None:
        valid_count = count_valid_sets(H, count_m, params, GenieMode.SINGLE, force_exponential=True)
    return GenieResult(
        mode=GenieMode.SINGLE,
        m_star=len(best),
        witness=best,
        assignment=tuple((i, i) for i in best),
        valid_count=valid_count,
        subsets_checked=checked,
    )


def max_valid_two_hop(
    H: ChannelMatrix,
    params: LinkParams,
    *,
    limit: Optional[int] = None,
    force_exponential: bool = False,
    count_m: Optional[int] = None,
) -> GenieResult:
    """Largest source set with an injective source -> relay assignment that all pass."""
    _check_two_hop(params)
    _check_size("max_valid_two_hop", H.n_tx, two_hop_limit() if limit is None else limit, force_exponential)

    candidates = _two_hop_candidates(H, params)
    checked = 0
    best: tuple[int, ...] = ()
    assignment: list[tuple[int, int]] = []
    for m in range(min(len(candidates), H.n_rx), 0, -1):
        for members in combinations(candidates, m):
            checked += 1
            matching = _two_hop_matching(H, members, params)
            if matching is not None:
                best, assignment = members, matching
                break
        if best:
            break

    valid_count = None
    if count_m is not None:
        valid_count = count_valid_sets(H, count_m, params, GenieMode.TWO_HOP, force_exponential=True)
    return GenieResult(
        mode=GenieMode.TWO_HOP,
        m_star=len(best),
        witness=best,
        assignment=tuple(assignment),
        valid_count=valid_count,
        subsets_checked=checked,
    )


def max_valid_two_hop_bruteforce(H: ChannelMatrix, params: LinkParams) -> GenieResult:
    """Reference search over every subset and every injective assignment."""
    _check_two_hop(params)
    checked = 0
    for m in range(min(H.n_tx, H.n_rx), 0, -1):
        for members in combinations(range(H.n_tx), m):
            for relays in permutations(range(H.n_rx), m):
                checked += 1
                if all(_link_passes(H, members, i, j, params) for i, j in zip(members, relays)):
                    return GenieResult(
                        mode=GenieMode.TWO_HOP,
                        m_star=m,
                        witness=members,
                        assignment=tuple(zip(members, relays)),
                        subsets_checked=checked,
                    )
    return GenieResult(mode=GenieMode.TWO_HOP, m_star=0, subsets_checked=checked)


def max_valid(
    H: ChannelMatrix,
    params: LinkParams,
    mode: "GenieMode | str",
    **kwargs,
) -> GenieResult:
    if GenieMode.parse(mode) is GenieMode.SINGLE:
        return max_valid_single_hop(H, params, **kwargs)
    return max_valid_two_hop(H, params, **kwargs)


def count_valid_sets(
    H: ChannelMatrix,
    m: int,
    params: LinkParams,
    mode: "GenieMode | str" = GenieMode.SINGLE,
    *,
    limit: Optional[int] = None,
    force_exponential: bool = False,
) -> int:
    """
    Exact number X(m) of valid sets of size *m*.

    For two-hop a source set counts once if at least one perfect assignment
    exists.
    """
    mode = GenieMode.parse(mode)
    if m < 0:
        raise DomainError(f"count_valid_sets: m must be >= 0, got {m}")
    if mode is GenieMode.SINGLE:
        _check_square(H, "count_valid_sets")
        default_limit = single_hop_limit()
    else:
        _check_two_hop(params)
        default_limit = two_hop_limit()
    _check_size("count_valid_sets", H.n_tx, default_limit if limit is None else limit, force_exponential)

    if m == 0:
        return 1
    if m > H.n_tx or (mode is GenieMode.TWO_HOP and m > H.n_rx):
        return 0

    if mode is GenieMode.SINGLE:
        candidates = _single_candidates(H, params)
        return sum(1 for members in combinations(candidates, m) if _single_valid(H, members, params))
    candidates = _two_hop_candidates(H, params)
    return sum(1 for members in combinations(candidates, m) if _two_hop_matching(H, members, params) is not None)


def expected_valid_sets(n: int, m: int, p: float) -> float:
    """``C(n, m) * p**m``, the mean of X(m) when link events are i.i.d. with probability *p*."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"expected_valid_sets: p must lie in [0, 1], got {p!r}")
    if m < 0 or m > n:
        raise DomainError(f"expected_valid_sets: need 0 <= m <= n, got m={m}, n={n}")
    if m == 0:
        return 1.0
    if p == 0.0:
        return 0.0
    log_value = gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1) + m * math.log(p)
    return float(math.exp(log_value))
