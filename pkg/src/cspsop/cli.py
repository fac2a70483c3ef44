"""Command-line entry point wiring the audit workflows together.

Exit codes: 0 success, 1 usage error, 2 I/O error, and 3 when audit-pair
finds an exploitable couple, so CI jobs can gate on their own sites.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import report as report_mod
from .compare import compare
from .corpus import CorpusFormatError, read_corpus, write_corpus
from .crawler import (
    DEPTH_HOME,
    DEPTH_IFRAME_HOME,
    STATUS_OK,
    CrawlConfig,
    build_record,
    crawl_sites,
    fetch,
)
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
    classify_pair,
    potential_violations,
    recommend,
)
from .fixtures import DEFAULT_PAGE_CSP, generate_suite
from .normalize import normalize
from .origins import NAIVE_SUFFIXES, UnsupportedUrlError, origin_of
from .policy import ENFORCE, REPORT_ONLY, parse_policy

USER_AGENT_ENV = "CSPSOP_USER_AGENT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VIOLATION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is 1
        raise UsageError(message)


def _policy_json(policy) -> dict:
    directives = {}
    for name, directive in policy.directives.items():
        if directive.opaque_values:
            directives[name] = list(directive.opaque_values)
        else:
            directives[name] = [s.token() for s in directive.sources]
    return {
        "disposition": policy.disposition,
        "delivery": policy.delivery,
        "directives": directives,
        "warnings": [{"kind": w.kind, "detail": w.detail} for w in policy.warnings],
    }


def _read_policy_arg(args) -> str:
    if args.policy is not None:
        return args.policy
    with open(args.file, encoding="utf-8") as fh:
        return fh.read().strip()


def _emit(payload, out_path: str | None = None) -> None:
    data = payload if isinstance(payload, (bytes, bytearray)) else (
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    ).encode()
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _parse_resolve(entries: list[str]) -> dict[str, str]:
    overrides = {}
    for entry in entries or []:
        host, sep, target = entry.partition("=")
        if not sep or not host or not target:
            raise UsageError(f"--resolve expects HOST=ADDR[:PORT], got {entry!r}")
        overrides[host.lower()] = target
    return overrides


def _config_from_args(args) -> CrawlConfig:
    config = CrawlConfig(
        user_agent=getattr(args, "user_agent", None)
        or os.environ.get(USER_AGENT_ENV)
        or CrawlConfig().user_agent,
        resolve_overrides=_parse_resolve(getattr(args, "resolve", None)),
    )
    if getattr(args, "timeout", None):
        config.timeout = args.timeout
    if getattr(args, "max_pages", None):
        config.max_pages_per_site = args.max_pages
    if getattr(args, "max_links", None):
        config.max_links_per_page = args.max_links
    if getattr(args, "max_iframes", None):
        config.max_iframes_per_page = args.max_iframes
    if getattr(args, "parallel", None):
        config.parallel_sites = args.parallel
    if getattr(args, "politeness", None) is not None:
        config.politeness_delay = args.politeness
    if getattr(args, "respect_robots", None) is not None:
        config.respect_robots = args.respect_robots in ("true", "1", "yes")
    if getattr(args, "naive_sites", False):
        config.naive_sites = True
    return config


def build_parser() -> _Parser:
    parser = _Parser(prog="cspsop", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("parse", help="parse a policy string")
    p.add_argument("--policy", help="policy text")
    p.add_argument("--file", help="file containing the policy text")
    p.add_argument("--report-only", action="store_true", help="mark as report-only")

    p = sub.add_parser("normalize", help="canonicalize a policy against a page origin")
    p.add_argument("--policy")
    p.add_argument("--file")
    p.add_argument("--origin", required=True, help="page URL or origin, e.g. http://x.com")

    p = sub.add_parser("compare", help="diff two policies directive by directive")
    p.add_argument("--a", required=True)
    p.add_argument("--origin-a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--origin-b", required=True)

    p = sub.add_parser("audit-pair", help="fetch a parent and iframe URL and classify the couple")
    p.add_argument("--parent", required=True)
    p.add_argument("--iframe", required=True)
    p.add_argument("--resolve", action="append", metavar="HOST=ADDR[:PORT]")
    p.add_argument("--timeout", type=float)
    p.add_argument("--user-agent")
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("crawl", help="crawl seed sites and write a corpus")
    p.add_argument("--seeds", required=True, help="file with one seed URL per line")
    p.add_argument("--out", required=True, help="corpus path (.jsonl or .jsonl.gz)")
    p.add_argument("--max-pages", type=int)
    p.add_argument("--max-links", type=int)
    p.add_argument("--max-iframes", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--parallel", type=int, help="sites crawled in parallel")
    p.add_argument("--politeness", type=float, help="seconds between requests per site")
    p.add_argument("--respect-robots", choices=["true", "false"], default=None)
    p.add_argument("--naive-sites", action="store_true", help="last-two-labels site mode")
    p.add_argument("--resolve", action="append", metavar="HOST=ADDR[:PORT]")
    p.add_argument("--user-agent")

    p = sub.add_parser("analyze", help="compute report tables over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--table",
        choices=["adoption", "violations", "potential", "directive-diff", "csp-per-site"],
        default="adoption",
    )
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out", help="write to file instead of stdout")
    p.add_argument("--naive-sites", action="store_true")

    p = sub.add_parser("potential", help="shortcut for analyze --table potential")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.add_argument("--naive-sites", action="store_true")

    p = sub.add_parser("recommend", help="mitigations for a classified couple")
    p.add_argument(
        "--relation",
        required=True,
        choices=[RELATION_SAME_ORIGIN, RELATION_RELAXABLE, RELATION_UNRELATED],
    )
    p.add_argument(
        "--category",
        required=True,
        choices=[
            CATEGORY_ONLY_PARENT,
            CATEGORY_ONLY_IFRAME,
            CATEGORY_DIFFERENT,
            CATEGORY_NO_VIOLATION,
            CATEGORY_NO_CSP,
        ],
    )
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("fixtures", help="generate srcdoc/sandbox conformance pages")
    p.add_argument("--out", required=True)
    p.add_argument("--beacon", default="https://probe-host.invalid")
    p.add_argument("--page-origin", default="http://localhost:8000")
    p.add_argument("--page-csp", default=DEFAULT_PAGE_CSP)

    return parser


def _cmd_parse(args) -> int:
    disposition = REPORT_ONLY if args.report_only else ENFORCE
    policy = parse_policy(_read_policy_arg(args), disposition)
    _emit(_policy_json(policy))
    return EXIT_OK


def _cmd_normalize(args) -> int:
    policy = parse_policy(_read_policy_arg(args))
    origin = origin_of(args.origin)
    normalized = normalize(policy, origin)
    _emit(
        {
            "page_origin": str(origin),
            "directives": {n: sorted(s) for n, s in normalized.directives.items()},
        }
    )
    return EXIT_OK


def _cmd_compare(args) -> int:
    na = normalize(parse_policy(args.a), origin_of(args.origin_a))
    nb = normalize(parse_policy(args.b), origin_of(args.origin_b))
    result = compare(na, nb)
    _emit(
        {
            "equal": result.equal,
            "differing_directives": sorted(result.differing_directives),
            "detail": {
                name: {"only_in_a": sorted(d.only_in_a), "only_in_b": sorted(d.only_in_b)}
                for name, d in result.detail.items()
            },
        }
    )
    return EXIT_OK


def _mitigations_json(mitigations) -> list[dict]:
    return [
        {"kind": m.kind, "advice": m.advice, **({"snippet": m.snippet} if m.snippet else {})}
        for m in mitigations
    ]


def _cmd_audit_pair(args) -> int:
    config = _config_from_args(args)
    parent = build_record(fetch(args.parent, config), DEPTH_HOME)
    iframe = build_record(fetch(args.iframe, config), DEPTH_IFRAME_HOME)
    if parent.fetch_status != STATUS_OK or iframe.fetch_status != STATUS_OK:
        print(
            f"fetch failed: parent={parent.fetch_status} iframe={iframe.fetch_status}",
            file=sys.stderr,
        )
        return EXIT_IO
    classification = classify_pair(parent, iframe)
    mitigations = recommend(classification)
    if args.format == "json":
        _emit(
            {
                "parent": {"url": parent.url, "origin": str(parent.origin), "policies": len(parent.enforced_policies())},
                "iframe": {"url": iframe.url, "origin": str(iframe.origin), "policies": len(iframe.enforced_policies())},
                "relation": classification.relation,
                "category": classification.category,
                "evidence": sorted(classification.evidence),
                "violation": classification.is_violation(),
                "mitigations": _mitigations_json(mitigations),
            }
        )
    else:
        print(f"parent:   {parent.url} [{parent.origin}]")
        print(f"iframe:   {iframe.url} [{iframe.origin}]")
        print(f"relation: {classification.relation}")
        print(f"category: {classification.category}")
        if classification.evidence:
            print(f"evidence: {', '.join(sorted(classification.evidence))}")
        for m in mitigations:
            print(f"mitigate: [{m.kind}] {m.advice}")
            if m.snippet:
                print(f"          {m.snippet}")
    return EXIT_VIOLATION if classification.is_violation() else EXIT_OK


def _cmd_crawl(args) -> int:
    config = _config_from_args(args)
    with open(args.seeds, encoding="utf-8") as fh:
        seeds = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    records = crawl_sites(seeds, config)
    records.sort(key=lambda r: (r.site or "", r.url))
    meta = {"seeds": len(seeds), "config_hash": config.config_hash()}
    count = write_corpus(records, args.out, meta=meta)
    print(f"crawled {count} pages from {len(seeds)} seeds -> {args.out}", file=sys.stderr)
    return EXIT_OK


_RENDER_FORMATS = {
    "text": report_mod.FORMAT_TEXT,
    "json": report_mod.FORMAT_JSON,
    "csv": report_mod.FORMAT_CSV,
}


def _cmd_analyze(args, table: str | None = None) -> int:
    corpus = read_corpus(args.corpus)
    psl = NAIVE_SUFFIXES if getattr(args, "naive_sites", False) else None
    table = table or args.table
    if table == "adoption":
        result = report_mod.adoption_stats(corpus)
    elif table == "violations":
        result = report_mod.violation_table(corpus, psl)
    elif table == "potential":
        result = potential_violations(corpus, psl)
    elif table == "csp-per-site":
        result = report_mod.csp_per_site_distribution(corpus)
    else:
        pairs = [p.classification for p in report_mod.build_pairs(corpus, psl)]
        result = report_mod.directive_diff_histogram(pairs)
    _emit(report_mod.render(result, _RENDER_FORMATS[args.format]), getattr(args, "out", None))
    return EXIT_OK


def _cmd_recommend(args) -> int:
    classification = PairClassification(
        relation=args.relation,
        category=args.category,
        evidence=frozenset({"script-src"}) if args.category == CATEGORY_DIFFERENT else frozenset(),
    )
    mitigations = recommend(classification)
    if args.format == "json":
        _emit(_mitigations_json(mitigations))
    else:
        if not mitigations:
            print("no mitigation needed")
        for m in mitigations:
            print(f"[{m.kind}] {m.advice}")
            if m.snippet:
                print(f"  {m.snippet}")
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    manifest = generate_suite(
        args.out,
        beacon_base=args.beacon,
        page_origin_url=args.page_origin,
        page_csp=args.page_csp,
    )
    print(f"generated {len(manifest['cases'])} cases in {args.out}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "parse": _cmd_parse,
    "normalize": _cmd_normalize,
    "compare": _cmd_compare,
    "audit-pair": _cmd_audit_pair,
    "crawl": _cmd_crawl,
    "analyze": _cmd_analyze,
    "potential": lambda args: _cmd_analyze(args, table="potential"),
    "recommend": _cmd_recommend,
    "fixtures": _cmd_fixtures,
}


def cli_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.command == "parse" and args.policy is None and args.file is None:
            raise UsageError("parse requires --policy or --file")
        if args.command == "normalize" and args.policy is None and args.file is None:
            raise UsageError("normalize requires --policy or --file")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except UnsupportedUrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorpusFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv: list[str] | None = None) -> int:
    return cli_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
