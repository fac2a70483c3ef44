"""Aggregate adoption and violation statistics over a crawl corpus.

Counts follow fixed definitions (documented per function) so that any
number can be recomputed independently; machine-readable output always
carries the denominator next to a percentage, never a bare ratio.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import combinations

from .compare import policy_sets_equal
from .crawler import DEPTH_HOME, STATUS_OK, PageRecord
from .detector import (
    CATEGORY_DIFFERENT,
    CATEGORY_NO_CSP,
    CATEGORY_NO_VIOLATION,
    CATEGORY_ONLY_IFRAME,
    CATEGORY_ONLY_PARENT,
    RELATION_RELAXABLE,
    RELATION_SAME_ORIGIN,
    RELATION_UNRELATED,
    PairClassification,
    PotentialViolationReport,
    _difference_evidence,
    classify_pair,
    normalized_enforced,
)
from .origins import SuffixTable, UnsupportedUrlError, origin_of

CATEGORIES = (
    CATEGORY_ONLY_PARENT,
    CATEGORY_ONLY_IFRAME,
    CATEGORY_DIFFERENT,
    CATEGORY_NO_VIOLATION,
    CATEGORY_NO_CSP,
)
RELATIONS = (RELATION_SAME_ORIGIN, RELATION_RELAXABLE)


@dataclass(frozen=True)
class Ratio:
    count: int
    denominator: int

    @property
    def percent(self) -> float:
        return 0.0 if self.denominator == 0 else round(100.0 * self.count / self.denominator, 2)

    def to_dict(self) -> dict:
        return {"count": self.count, "denominator": self.denominator, "percent": self.percent}


def _ok(corpus: list[PageRecord]) -> list[PageRecord]:
    return [r for r in corpus if r.fetch_status == STATUS_OK and r.origin is not None]


@dataclass
class AdoptionReport:
    """Crawling statistics: how widely CSP is deployed across the corpus."""

    sites_crawled: int = 0
    pages_visited: int = 0
    pages_with_same_site_iframes: int = 0
    pages_with_same_origin_iframes: int = 0
    pages_with_so_iframe_and_csp: int = 0
    pages_with_csp: Ratio = Ratio(0, 0)
    sites_with_csp_on_home: Ratio = Ratio(0, 0)
    sites_with_csp_some_pages: Ratio = Ratio(0, 0)

    def to_dict(self) -> dict:
        return {
            "sites_crawled": self.sites_crawled,
            "pages_visited": self.pages_visited,
            "pages_with_same_site_iframes": self.pages_with_same_site_iframes,
            "pages_with_same_origin_iframes": self.pages_with_same_origin_iframes,
            "pages_with_so_iframe_and_csp": self.pages_with_so_iframe_and_csp,
            "pages_with_csp": self.pages_with_csp.to_dict(),
            "sites_with_csp_on_home": self.sites_with_csp_on_home.to_dict(),
            "sites_with_csp_some_pages": self.sites_with_csp_some_pages.to_dict(),
        }

    def rows(self) -> list[list[str]]:
        def pct(r: Ratio) -> str:
            return f"{r.count} ({r.percent}% of {r.denominator})"

        return [
            ["statistic", "value"],
            ["Sites successfully crawled", str(self.sites_crawled)],
            ["Pages visited", str(self.pages_visited)],
            ["Pages with same-site iframe(s)", str(self.pages_with_same_site_iframes)],
            ["Pages with same-origin iframe(s)", str(self.pages_with_same_origin_iframes)],
            [
                "Pages with same-origin iframe(s) where page and/or iframe has CSP",
                str(self.pages_with_so_iframe_and_csp),
            ],
            ["Pages with CSP", pct(self.pages_with_csp)],
            ["Sites with CSP on home page", pct(self.sites_with_csp_on_home)],
            ["Sites with CSP on some pages", pct(self.sites_with_csp_some_pages)],
        ]


def adoption_stats(corpus: list[PageRecord]) -> AdoptionReport:
    """Adoption counts.

    Definitions: pages = successfully fetched records; a page "has CSP"
    here under any disposition (report-only included); iframe CSP presence
    is resolved through the iframe's own record when the corpus has one.
    """
    pages = _ok(corpus)
    by_url = {r.url: r for r in pages}
    sites = {r.site for r in pages if r.site}

    def iframe_origin_same(record: PageRecord, iframe_url: str) -> bool:
        try:
            return origin_of(iframe_url) == record.origin
        except UnsupportedUrlError:
            return False

    pages_so_iframes = []
    for record in pages:
        so_iframes = [u for u in record.iframes_same_site if iframe_origin_same(record, u)]
        if so_iframes:
            pages_so_iframes.append((record, so_iframes))

    so_iframe_with_csp = 0
    for record, so_iframes in pages_so_iframes:
        iframe_has = any(
            u in by_url and by_url[u].has_any_csp() for u in so_iframes
        )
        if record.has_any_csp() or iframe_has:
            so_iframe_with_csp += 1

    csp_pages = [r for r in pages if r.has_any_csp()]
    home_csp_sites = {r.site for r in pages if r.depth == DEPTH_HOME and r.has_any_csp() and r.site}
    csp_sites = {r.site for r in csp_pages if r.site}
    return AdoptionReport(
        sites_crawled=len(sites),
        pages_visited=len(pages),
        pages_with_same_site_iframes=sum(1 for r in pages if r.iframes_same_site),
        pages_with_same_origin_iframes=len(pages_so_iframes),
        pages_with_so_iframe_and_csp=so_iframe_with_csp,
        pages_with_csp=Ratio(len(csp_pages), len(pages)),
        sites_with_csp_on_home=Ratio(len(home_csp_sites), len(sites)),
        sites_with_csp_some_pages=Ratio(len(csp_sites), len(sites)),
    )


BUCKET_LABELS = tuple(f"{lo}-{lo + 10}" for lo in range(0, 100, 10))


@dataclass
class SiteCspHistogram:
    """Sites bucketed by the share of their pages carrying a CSP.

    Only sites with at least one CSP page appear; buckets are [lo, lo+10)
    with the last bucket closed at 100.
    """

    buckets: dict[str, int] = field(default_factory=dict)
    sites_total: int = 0

    def to_dict(self) -> dict:
        return {"sites_total": self.sites_total, "buckets": dict(self.buckets)}

    def rows(self) -> list[list[str]]:
        out = [["bucket_percent", "sites"]]
        out += [[label, str(self.buckets.get(label, 0))] for label in BUCKET_LABELS]
        return out


def csp_per_site_distribution(corpus: list[PageRecord]) -> SiteCspHistogram:
    pages = _ok(corpus)
    per_site: dict[str, list[PageRecord]] = {}
    for record in pages:
        if record.site:
            per_site.setdefault(record.site, []).append(record)
    histogram = SiteCspHistogram(buckets={label: 0 for label in BUCKET_LABELS})
    for site_pages in per_site.values():
        with_csp = sum(1 for r in site_pages if r.has_any_csp())
        if not with_csp:
            continue
        share = 100.0 * with_csp / len(site_pages)
        index = min(int(share // 10), 9)
        histogram.buckets[BUCKET_LABELS[index]] += 1
        histogram.sites_total += 1
    return histogram


@dataclass(frozen=True)
class ClassifiedPair:
    parent: PageRecord
    iframe: PageRecord
    classification: PairClassification


def build_pairs(
    corpus: list[PageRecord],
    psl: SuffixTable | None = None,
    include_siblings: bool = False,
) -> list[ClassifiedPair]:
    """(parent, iframe) couples: each page joined with the records of its
    same-site iframes. Iframes missing from the corpus cannot be classified
    and are skipped.

    include_siblings additionally pairs the iframes of one parent with each
    other; sibling frames share the parent's document just as transitively,
    but are excluded by default to keep counts comparable.
    """
    pages = _ok(corpus)
    by_url = {r.url: r for r in pages}
    pairs = []
    for parent in pages:
        embedded = [by_url[u] for u in parent.iframes_same_site if u in by_url]
        for iframe in embedded:
            pairs.append(ClassifiedPair(parent, iframe, classify_pair(parent, iframe, psl)))
        if include_siblings:
            for left, right in combinations(embedded, 2):
                pairs.append(ClassifiedPair(left, right, classify_pair(left, right, psl)))
    return pairs


@dataclass
class ViolationTable:
    """Category x relation matrix over classifiable parent-iframe couples.

    The rate denominator per relation counts couples where at least one
    side has an enforced CSP; couples with no CSP anywhere are listed but
    excluded from that rate, and unrelated couples are excluded entirely.
    """

    cells: dict[str, dict[str, int]]
    violations_total: dict[str, Ratio]
    couples_excluded_unrelated: int = 0

    def category_total(self, category: str) -> int:
        return sum(self.cells[category].values())

    def to_dict(self) -> dict:
        return {
            "cells": {c: dict(r) for c, r in self.cells.items()},
            "violations_total": {k: v.to_dict() for k, v in self.violations_total.items()},
            "couples_excluded_unrelated": self.couples_excluded_unrelated,
        }

    def rows(self) -> list[list[str]]:
        header = ["category", *RELATIONS, "total"]
        out = [header]
        for category in CATEGORIES:
            row = [category]
            row += [str(self.cells[category][rel]) for rel in RELATIONS]
            row.append(str(self.category_total(category)))
            out.append(row)
        total_row = ["csp-violations-total"]
        overall = Ratio(
            sum(self.violations_total[rel].count for rel in RELATIONS),
            sum(self.violations_total[rel].denominator for rel in RELATIONS),
        )
        for rel in RELATIONS:
            r = self.violations_total[rel]
            total_row.append(f"{r.count} ({r.percent}%)")
        total_row.append(f"{overall.count} ({overall.percent}%)")
        out.append(total_row)
        return out


def violation_table(
    corpus: list[PageRecord],
    psl: SuffixTable | None = None,
    include_siblings: bool = False,
) -> ViolationTable:
    pairs = build_pairs(corpus, psl, include_siblings=include_siblings)
    cells = {category: {rel: 0 for rel in RELATIONS} for category in CATEGORIES}
    excluded = 0
    for pair in pairs:
        relation = pair.classification.relation
        if relation == RELATION_UNRELATED:
            excluded += 1
            continue
        cells[pair.classification.category][relation] += 1
    totals = {}
    for rel in RELATIONS:
        violations = sum(cells[c][rel] for c in (CATEGORY_ONLY_PARENT, CATEGORY_ONLY_IFRAME, CATEGORY_DIFFERENT))
        with_csp = violations + cells[CATEGORY_NO_VIOLATION][rel]
        totals[rel] = Ratio(violations, with_csp)
    return ViolationTable(cells=cells, violations_total=totals, couples_excluded_unrelated=excluded)


@dataclass
class DirectiveDiffHistogram:
    """How often each directive appears in the evidence of differing pairs."""

    fractions: dict[str, Ratio] = field(default_factory=dict)
    pairs_total: int = 0

    def to_dict(self) -> dict:
        return {
            "pairs_total": self.pairs_total,
            "directives": {name: r.to_dict() for name, r in sorted(self.fractions.items())},
        }

    def rows(self) -> list[list[str]]:
        out = [["directive", "differing_pairs", "pairs_total", "percent"]]
        for name, ratio in sorted(self.fractions.items()):
            out.append([name, str(ratio.count), str(ratio.denominator), str(ratio.percent)])
        return out


def directive_diff_histogram(classifications: list[PairClassification]) -> DirectiveDiffHistogram:
    """Per-directive mismatch frequency among different-csp classifications.

    The denominator is the number of couples where both sides carry a CSP
    and the CSPs differ; each directive's count says in how many of those
    couples it was part of the difference. Unrelated couples are ignored
    (SOP already isolates them, so their differences prove nothing).
    """
    differing = [
        c
        for c in classifications
        if c.category == CATEGORY_DIFFERENT and c.relation != RELATION_UNRELATED
    ]
    histogram = DirectiveDiffHistogram(pairs_total=len(differing))
    if not differing:
        return histogram
    counts: dict[str, int] = {}
    for classification in differing:
        for name in classification.evidence:
            counts[name] = counts.get(name, 0) + 1
    histogram.fractions = {
        name: Ratio(count, len(differing)) for name, count in counts.items()
    }
    return histogram


def page_set_diffs(
    corpus: list[PageRecord], relation: str = RELATION_SAME_ORIGIN,
    psl: SuffixTable | None = None,
) -> list[PairClassification]:
    """Differing-CSP classifications over peer PAGE couples (not iframes).

    Groups pages by origin (or by site+scheme+port for the relaxed flavor)
    and emits one classification per unordered couple of CSP-bearing pages
    whose policy sets are unequal. Feeds the directive-difference histogram
    for page-level potential violations.
    """
    pages = [r for r in _ok(corpus) if r.site]
    cache = {id(r): normalized_enforced(r) for r in pages}
    groups: dict[object, list[PageRecord]] = {}
    for record in pages:
        if relation == RELATION_SAME_ORIGIN:
            key: object = record.origin
        else:
            key = (record.site, record.origin.scheme, record.origin.port)
        groups.setdefault(key, []).append(record)
    out = []
    for members in groups.values():
        with_csp = [r for r in members if cache[id(r)]]
        for a, b in combinations(with_csp, 2):
            if relation != RELATION_SAME_ORIGIN and a.origin == b.origin:
                continue
            if policy_sets_equal(cache[id(a)], cache[id(b)]):
                continue
            out.append(
                PairClassification(
                    relation=relation,
                    category=CATEGORY_DIFFERENT,
                    evidence=_difference_evidence(cache[id(a)], cache[id(b)]),
                )
            )
    return out


def _potential_rows(report: PotentialViolationReport) -> list[list[str]]:
    rows = [["statistic", "pages", "origins", "sites"]]
    for label, counts in (
        ("same-origin", report.same_origin),
        ("relaxed-origin", report.relaxed),
    ):
        rows.append(
            [
                f"{label}: a peer page has no CSP",
                str(counts.pages_peer_no_csp),
                str(counts.origins_peer_no_csp),
                str(counts.sites_peer_no_csp),
            ]
        )
        rows.append(
            [
                f"{label}: a peer page has a different CSP",
                str(counts.pages_peer_diff_csp),
                str(counts.origins_peer_diff_csp),
                str(counts.sites_peer_diff_csp),
            ]
        )
        rows.append([f"{label}: total", str(counts.pages_total), "-", "-"])
    share = Ratio(report.flagged_pages_total, report.pages_with_csp)
    rows.append(["potential violations total (distinct pages)", f"{share.count} ({share.percent}% of {share.denominator})", "-", "-"])
    return rows


def _potential_dict(report: PotentialViolationReport) -> dict:
    def counts(c) -> dict:
        return {
            "pages_peer_no_csp": c.pages_peer_no_csp,
            "origins_peer_no_csp": c.origins_peer_no_csp,
            "sites_peer_no_csp": c.sites_peer_no_csp,
            "pages_peer_diff_csp": c.pages_peer_diff_csp,
            "origins_peer_diff_csp": c.origins_peer_diff_csp,
            "sites_peer_diff_csp": c.sites_peer_diff_csp,
            "pages_total": c.pages_total,
        }

    return {
        "pages_with_csp": report.pages_with_csp,
        "origins_with_csp": report.origins_with_csp,
        "sites_with_csp": report.sites_with_csp,
        "same_origin": counts(report.same_origin),
        "relaxed": counts(report.relaxed),
        "flagged_pages_total": Ratio(
            report.flagged_pages_total, report.pages_with_csp
        ).to_dict(),
        "verdicts": [
            {"url": v.url, "same_origin": v.same_origin, "relaxed": v.relaxed}
            for v in report.verdicts
        ],
    }


FORMAT_TEXT = "text-table"
FORMAT_JSON = "json"
FORMAT_CSV = "csv"


def _rows_of(report) -> list[list[str]]:
    if isinstance(report, PotentialViolationReport):
        return _potential_rows(report)
    return report.rows()


def _dict_of(report) -> dict:
    if isinstance(report, PotentialViolationReport):
        return _potential_dict(report)
    return report.to_dict()


def render(report, fmt: str = FORMAT_TEXT) -> bytes:
    """Serialize any report object to text-table, json, or csv bytes."""
    if fmt == FORMAT_JSON:
        return (json.dumps(_dict_of(report), indent=2, sort_keys=True) + "\n").encode()
    rows = _rows_of(report)
    if fmt == FORMAT_CSV:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerows(rows)
        return buffer.getvalue().encode()
    if fmt == FORMAT_TEXT:
        if not rows:
            return b"\n"
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "-" * max(len(line) for line in lines))
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format: {fmt}")
