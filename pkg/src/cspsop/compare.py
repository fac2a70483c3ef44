"""Directive-wise equality of normalized policies."""

from __future__ import annotations

from dataclasses import dataclass

from .normalize import NormalizedPolicy


@dataclass(frozen=True)
class DirectiveDelta:
    only_in_a: frozenset[str]
    only_in_b: frozenset[str]


@dataclass(frozen=True)
class ComparisonResult:
    equal: bool
    differing_directives: frozenset[str]
    detail: dict[str, DirectiveDelta]


def compare(a: NormalizedPolicy, b: NormalizedPolicy) -> ComparisonResult:
    """Report which directives differ between two normalized policies.

    Every directive present in either policy is examined; a directive
    differs when its canonical source sets are unequal, and present-vs-absent
    counts as a difference (an empty delta marks pure presence mismatches).
    """
    differing: set[str] = set()
    detail: dict[str, DirectiveDelta] = {}
    for name in sorted(set(a.directives) | set(b.directives)):
        in_a = name in a.directives
        in_b = name in b.directives
        set_a = a.directives.get(name, frozenset())
        set_b = b.directives.get(name, frozenset())
        if in_a != in_b or set_a != set_b:
            differing.add(name)
            detail[name] = DirectiveDelta(
                only_in_a=frozenset(set_a - set_b), only_in_b=frozenset(set_b - set_a)
            )
    return ComparisonResult(
        equal=not differing, differing_directives=frozenset(differing), detail=detail
    )


def policy_sets_equal(a: list[NormalizedPolicy], b: list[NormalizedPolicy]) -> bool:
    """Multiset equality of two policy lists under compare-equality.

    Pages can ship several policies (multiple headers plus meta tags);
    delivery order does not matter but multiplicity does.
    """
    if len(a) != len(b):
        return False
    remaining = list(b)
    for pa in a:
        for i, pb in enumerate(remaining):
            if compare(pa, pb).equal:
                del remaining[i]
                break
        else:
            return False
    return True


def unmatched_policies(
    a: list[NormalizedPolicy], b: list[NormalizedPolicy]
) -> tuple[list[NormalizedPolicy], list[NormalizedPolicy]]:
    """Policies on each side without a compare-equal partner on the other.

    Used to explain why two policy sets differ: every cross pairing of the
    two leftover lists is guaranteed unequal.
    """
    left = list(a)
    right = list(b)
    kept: list[NormalizedPolicy] = []
    for pa in left:
        for i, pb in enumerate(right):
            if compare(pa, pb).equal:
                del right[i]
                break
        else:
            kept.append(pa)
    return kept, right
