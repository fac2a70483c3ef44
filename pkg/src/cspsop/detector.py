"""Classify parent/iframe couples and find potential victims corpus-wide.

A page's CSP never reaches into a same-origin iframe, yet the iframe can
reach into the page. Whenever the two documents are (or can become, via
document.domain) same-origin and their enforced policies are not identical,
the stricter side's policy can be subverted from the weaker one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .compare import compare, policy_sets_equal, unmatched_policies
from .crawler import STATUS_OK, PageRecord
from .normalize import NormalizedPolicy, normalize
from .origins import SuffixTable, relaxable_to, same_origin

RELATION_SAME_ORIGIN = "same-origin"
RELATION_RELAXABLE = "relaxable"
RELATION_UNRELATED = "unrelated"

CATEGORY_ONLY_PARENT = "only-parent-csp"
CATEGORY_ONLY_IFRAME = "only-iframe-csp"
CATEGORY_DIFFERENT = "different-csp"
CATEGORY_NO_VIOLATION = "no-violation"
CATEGORY_NO_CSP = "no-csp-anywhere"

VIOLATION_CATEGORIES = frozenset(
    {CATEGORY_ONLY_PARENT, CATEGORY_ONLY_IFRAME, CATEGORY_DIFFERENT}
)

VERDICT_PEER_NO_CSP = "peer-without-csp"
VERDICT_PEER_DIFF_CSP = "peer-with-different-csp"
VERDICT_NONE = "none"


@dataclass(frozen=True)
class PairClassification:
    relation: str
    category: str
    evidence: frozenset[str] = frozenset()

    def is_violation(self) -> bool:
        """True when the couple can actually subvert a policy: unrelated
        origins stay isolated by SOP no matter what their CSPs say."""
        return self.relation != RELATION_UNRELATED and self.category in VIOLATION_CATEGORIES


@dataclass(frozen=True)
class Mitigation:
    kind: str  # origin-wide-csp | document-domain-freeze | sandbox-directive
    advice: str
    snippet: str | None = None


# First statement of a page's scripts; locks document.domain before any
# other code can relax the origin.
DOMAIN_FREEZE_SNIPPET = (
    'Object.defineProperty(document, "domain", '
    "{ __proto__: null, writable: false, configurable: false});"
)

_MITIGATIONS = {
    "origin-wide-csp": Mitigation(
        kind="origin-wide-csp",
        advice=(
            "Deliver one identical effective CSP on every page of the origin, "
            "so no embeddable document is weaker than its embedder."
        ),
    ),
    "document-domain-freeze": Mitigation(
        kind="document-domain-freeze",
        advice=(
            "Run a first script that freezes document.domain, preventing any "
            "later code from relaxing the origin to the shared parent domain."
        ),
        snippet=DOMAIN_FREEZE_SNIPPET,
    ),
    "sandbox-directive": Mitigation(
        kind="sandbox-directive",
        advice=(
            "If the iframe does not need the page's origin, isolate it with the "
            "sandbox CSP directive (no allow-same-origin): a unique origin makes "
            "SOP shield both documents, and the directive cannot be stripped by "
            "scripts the way the iframe attribute can."
        ),
    ),
}


def normalized_enforced(record: PageRecord) -> list[NormalizedPolicy]:
    """Enforced policies of a record, normalized against its origin.

    Report-only policies are excluded: they record violations but restrict
    nothing, so they cannot be violated.
    """
    if record.origin is None:
        return []
    return [normalize(p, record.origin) for p in record.enforced_policies()]


def _relation(parent: PageRecord, iframe: PageRecord, psl: SuffixTable | None) -> str:
    if parent.origin is None or iframe.origin is None:
        return RELATION_UNRELATED
    if same_origin(parent.origin, iframe.origin):
        return RELATION_SAME_ORIGIN
    if relaxable_to(parent.origin, iframe.origin, psl) is not None:
        return RELATION_RELAXABLE
    return RELATION_UNRELATED


def _difference_evidence(
    a: list[NormalizedPolicy], b: list[NormalizedPolicy]
) -> frozenset[str]:
    left, right = unmatched_policies(a, b)
    evidence: set[str] = set()
    for pa in left:
        for pb in right:
            evidence |= compare(pa, pb).differing_directives
    if not evidence:
        # Pure multiplicity difference: the surplus deliveries themselves
        # are the discrepancy, so name everything they restrict.
        for policy in left + right:
            evidence |= set(policy.directives)
    return frozenset(evidence)


def classify_pair(
    parent: PageRecord, iframe: PageRecord, psl: SuffixTable | None = None
) -> PairClassification:
    """Origin relation and CSP-violation category for one couple."""
    relation = _relation(parent, iframe, psl)
    parent_policies = normalized_enforced(parent)
    iframe_policies = normalized_enforced(iframe)
    if parent_policies and not iframe_policies:
        return PairClassification(relation, CATEGORY_ONLY_PARENT)
    if iframe_policies and not parent_policies:
        return PairClassification(relation, CATEGORY_ONLY_IFRAME)
    if not parent_policies and not iframe_policies:
        return PairClassification(relation, CATEGORY_NO_CSP)
    if policy_sets_equal(parent_policies, iframe_policies):
        return PairClassification(relation, CATEGORY_NO_VIOLATION)
    return PairClassification(
        relation, CATEGORY_DIFFERENT, _difference_evidence(parent_policies, iframe_policies)
    )


def recommend(classification: PairClassification) -> list[Mitigation]:
    """Ordered mitigation advice for one classified couple."""
    if classification.relation == RELATION_UNRELATED:
        return []
    if classification.category not in VIOLATION_CATEGORIES:
        return []
    out = [_MITIGATIONS["origin-wide-csp"]]
    if classification.relation == RELATION_RELAXABLE:
        out.append(_MITIGATIONS["document-domain-freeze"])
    out.append(_MITIGATIONS["sandbox-directive"])
    return out


@dataclass(frozen=True)
class PageVerdicts:
    """Potential-violation verdicts for one page carrying an enforced CSP."""

    url: str
    same_origin: str = VERDICT_NONE
    relaxed: str = VERDICT_NONE


@dataclass
class GranularityCounts:
    """Flag totals for one peer granularity, in pages/origins/sites."""

    pages_peer_no_csp: int = 0
    origins_peer_no_csp: int = 0
    sites_peer_no_csp: int = 0
    pages_peer_diff_csp: int = 0
    origins_peer_diff_csp: int = 0
    sites_peer_diff_csp: int = 0

    @property
    def pages_total(self) -> int:
        return self.pages_peer_no_csp + self.pages_peer_diff_csp


@dataclass
class PotentialViolationReport:
    pages_with_csp: int
    origins_with_csp: int
    sites_with_csp: int
    same_origin: GranularityCounts
    relaxed: GranularityCounts
    flagged_pages_total: int  # distinct pages flagged at either granularity
    verdicts: list[PageVerdicts] = field(default_factory=list)


def _group_key_origin(record: PageRecord):
    return record.origin


def _group_key_relaxed(record: PageRecord):
    return (record.site, record.origin.scheme, record.origin.port)


def _peer_verdict(
    mine: list[NormalizedPolicy], peers: list[PageRecord],
    cache: dict[int, list[NormalizedPolicy]],
) -> str:
    diff_seen = False
    for peer in peers:
        peer_policies = cache[id(peer)]
        if not peer_policies:
            return VERDICT_PEER_NO_CSP
        if not diff_seen and not policy_sets_equal(mine, peer_policies):
            diff_seen = True
    return VERDICT_PEER_DIFF_CSP if diff_seen else VERDICT_NONE


def potential_violations(
    corpus: list[PageRecord], psl: SuffixTable | None = None
) -> PotentialViolationReport:
    """Pages whose CSP could be subverted by embedding a weaker peer page.

    A page with an enforced CSP is flagged when another page of the same
    origin lacks a CSP or ships a different one; separately, the same check
    runs against relaxed-origin peers (same site, scheme and port but a
    different origin, reachable via document.domain).
    """
    pages = [r for r in corpus if r.fetch_status == STATUS_OK and r.origin is not None]
    cache = {id(r): normalized_enforced(r) for r in pages}

    by_origin: dict[object, list[PageRecord]] = {}
    by_relaxed: dict[object, list[PageRecord]] = {}
    for record in pages:
        by_origin.setdefault(_group_key_origin(record), []).append(record)
        if record.site is not None:
            by_relaxed.setdefault(_group_key_relaxed(record), []).append(record)

    csp_pages = [r for r in pages if cache[id(r)]]
    report = PotentialViolationReport(
        pages_with_csp=len(csp_pages),
        origins_with_csp=len({r.origin for r in csp_pages}),
        sites_with_csp=len({r.site for r in csp_pages if r.site}),
        same_origin=GranularityCounts(),
        relaxed=GranularityCounts(),
        flagged_pages_total=0,
    )

    flagged: dict[str, set] = {
        "so_no": set(), "so_diff": set(), "rx_no": set(), "rx_diff": set(),
    }
    for record in csp_pages:
        mine = cache[id(record)]
        so_peers = [r for r in by_origin[_group_key_origin(record)] if r is not record]
        so_verdict = _peer_verdict(mine, so_peers, cache)
        rx_verdict = VERDICT_NONE
        if record.site is not None:
            rx_peers = [
                r
                for r in by_relaxed[_group_key_relaxed(record)]
                if r is not record and r.origin != record.origin
            ]
            rx_verdict = _peer_verdict(mine, rx_peers, cache)
        if so_verdict != VERDICT_NONE or rx_verdict != VERDICT_NONE:
            report.verdicts.append(
                PageVerdicts(url=record.url, same_origin=so_verdict, relaxed=rx_verdict)
            )
        if so_verdict == VERDICT_PEER_NO_CSP:
            flagged["so_no"].add((record.url, record.origin, record.site))
        elif so_verdict == VERDICT_PEER_DIFF_CSP:
            flagged["so_diff"].add((record.url, record.origin, record.site))
        if rx_verdict == VERDICT_PEER_NO_CSP:
            flagged["rx_no"].add((record.url, record.origin, record.site))
        elif rx_verdict == VERDICT_PEER_DIFF_CSP:
            flagged["rx_diff"].add((record.url, record.origin, record.site))

    def fill(counts: GranularityCounts, no_key: str, diff_key: str) -> None:
        counts.pages_peer_no_csp = len(flagged[no_key])
        counts.origins_peer_no_csp = len({o for _, o, _ in flagged[no_key]})
        counts.sites_peer_no_csp = len({s for _, _, s in flagged[no_key] if s})
        counts.pages_peer_diff_csp = len(flagged[diff_key])
        counts.origins_peer_diff_csp = len({o for _, o, _ in flagged[diff_key]})
        counts.sites_peer_diff_csp = len({s for _, _, s in flagged[diff_key] if s})

    fill(report.same_origin, "so_no", "so_diff")
    fill(report.relaxed, "rx_no", "rx_diff")
    flagged_urls = {u for bucket in flagged.values() for u, _, _ in bucket}
    report.flagged_pages_total = len(flagged_urls)
    return report
