"""Same-site crawl pipeline: home page, its links, and the iframes of both.

Fetching is static (no script execution), so dynamically injected links and
iframes are missed; results underestimate what a full browser would see.
The fetcher supports /etc/hosts-style resolve overrides so fixture sites
with arbitrary hostnames can be served from a local test server.
"""

from __future__ import annotations

import hashlib
import http.client
import json
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib import robotparser
from urllib.parse import urldefrag, urljoin, urlsplit

from .origins import (
    NAIVE_SUFFIXES,
    NoRegistrableDomainError,
    Origin,
    SiteKey,
    SuffixTable,
    UnsupportedUrlError,
    origin_of,
    site_of,
)
from .policy import ENFORCE, Policy, extract_policies

DEPTH_HOME = "home"
DEPTH_LINKED = "linked"
DEPTH_IFRAME_HOME = "iframe-of-home"
DEPTH_IFRAME_LINKED = "iframe-of-linked"

STATUS_OK = "ok"
STATUS_HTTP_ERROR = "http-error"
STATUS_NETWORK_ERROR = "network-error"
STATUS_TIMEOUT = "timeout"

DEFAULT_USER_AGENT = (
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
    "(KHTML, like Gecko) Chrome/124.0.0.0 Safari/537.36"
)


@dataclass
class CrawlConfig:
    user_agent: str = DEFAULT_USER_AGENT
    max_pages_per_site: int = 200
    max_links_per_page: int = 100
    max_iframes_per_page: int = 50
    timeout: float = 30.0
    politeness_delay: float = 0.5
    parallel_per_site: int = 1
    parallel_sites: int = 4
    max_redirects: int = 5
    body_cap: int = 5 * 1024 * 1024
    respect_robots: bool = True
    naive_sites: bool = False
    # host -> "address:port"; like curl --resolve, lets tests serve
    # main.com style fixture hosts from 127.0.0.1.
    resolve_overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("max_pages_per_site", "max_links_per_page", "max_iframes_per_page",
                     "parallel_per_site", "parallel_sites"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    def config_hash(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class FetchResult:
    url: str
    final_url: str
    status: str
    http_status: int | None
    headers: list[tuple[str, str]]
    body: bytes


@dataclass
class PageRecord:
    """One crawled page: where it lives, what it delivered, what it embeds."""

    url: str
    final_url: str
    depth: str
    fetch_status: str
    http_status: int | None = None
    origin: Origin | None = None
    site: str | None = None
    policies: list[Policy] = field(default_factory=list)
    links_same_site: list[str] = field(default_factory=list)
    iframes_same_site: list[str] = field(default_factory=list)
    srcdoc_iframes: int = 0

    def enforced_policies(self) -> list[Policy]:
        return [p for p in self.policies if p.disposition == ENFORCE]

    def has_enforced_csp(self) -> bool:
        return bool(self.enforced_policies())

    def has_any_csp(self) -> bool:
        return bool(self.policies)


@dataclass
class IframeRefs:
    """Same-site iframe URLs plus a marker count for inline srcdoc frames."""

    urls: list[str]
    srcdoc_count: int = 0


class _DocumentScan(HTMLParser):
    """Single pass over possibly broken HTML: anchors, iframes, meta CSP."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []
        self.iframe_srcs: list[str] = []
        self.srcdoc_count = 0
        self.meta_csp: list[str] = []

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        attr_map: dict[str, str] = {}
        for key, value in attrs:
            if value is not None and key not in attr_map:
                attr_map[key.lower()] = value
        if tag == "a" and attr_map.get("href"):
            self.hrefs.append(attr_map["href"])
        elif tag == "iframe":
            if "srcdoc" in attr_map:
                self.srcdoc_count += 1
            elif attr_map.get("src"):
                self.iframe_srcs.append(attr_map["src"])
        elif tag == "meta":
            if attr_map.get("http-equiv", "").lower() == "content-security-policy":
                self.meta_csp.append(attr_map.get("content", ""))


def scan_document(body: str) -> _DocumentScan:
    scan = _DocumentScan()
    scan.feed(body)
    scan.close()
    return scan


def _same_site_urls(
    candidates: list[str], base: str, site: SiteKey, psl: SuffixTable | None
) -> list[str]:
    """Absolute, deduplicated, fragment-free URLs that stay on the site."""
    out: list[str] = []
    seen: set[str] = set()
    for raw in candidates:
        try:
            absolute, _ = urldefrag(urljoin(base, raw.strip()))
        except ValueError:
            continue
        try:
            origin = origin_of(absolute)
            if site_of(origin.host, psl) != site:
                continue
        except (UnsupportedUrlError, NoRegistrableDomainError):
            continue
        if absolute not in seen:
            seen.add(absolute)
            out.append(absolute)
    return out


def extract_links(
    body: str, base: str, site: SiteKey, psl: SuffixTable | None = None
) -> list[str]:
    """Same-site anchor targets of an HTML document."""
    return _same_site_urls(scan_document(body).hrefs, base, site, psl)


def extract_iframes(
    body: str, base: str, site: SiteKey, psl: SuffixTable | None = None
) -> IframeRefs:
    """Same-site iframe URLs; srcdoc iframes counted separately."""
    scan = scan_document(body)
    return IframeRefs(
        urls=_same_site_urls(scan.iframe_srcs, base, site, psl),
        srcdoc_count=scan.srcdoc_count,
    )


def _connection_target(origin: Origin, config: CrawlConfig) -> tuple[str, int]:
    override = config.resolve_overrides.get(origin.host)
    if not override:
        return origin.host, origin.port
    host, _, port = override.partition(":")
    return host, int(port) if port else origin.port


_REDIRECT_STATUSES = {301, 302, 303, 307, 308}


def fetch(url: str, config: CrawlConfig) -> FetchResult:
    """GET a URL, following up to config.max_redirects redirects.

    Failures are carried in the result status, never raised: crawl records
    must exist for dead pages too. The body is truncated at config.body_cap.
    """
    current, _ = urldefrag(url)
    redirects = 0
    while True:
        try:
            origin = origin_of(current)
        except UnsupportedUrlError:
            return FetchResult(url, current, STATUS_NETWORK_ERROR, None, [], b"")
        parts = urlsplit(current)
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        conn_host, conn_port = _connection_target(origin, config)
        conn_cls = (
            http.client.HTTPSConnection if origin.scheme == "https" else http.client.HTTPConnection
        )
        conn = conn_cls(conn_host, conn_port, timeout=config.timeout)
        try:
            conn.request(
                "GET",
                path,
                headers={
                    "Host": origin.ascii_serialization().split("://", 1)[1],
                    "User-Agent": config.user_agent,
                    "Accept": "*/*",
                    "Connection": "close",
                },
            )
            response = conn.getresponse()
            location = response.getheader("Location")
            if response.status in _REDIRECT_STATUSES and location and redirects < config.max_redirects:
                redirects += 1
                current, _ = urldefrag(urljoin(current, location))
                continue
            body = response.read(config.body_cap)
            status = STATUS_OK if 200 <= response.status < 300 else STATUS_HTTP_ERROR
            return FetchResult(url, current, status, response.status, response.getheaders(), body)
        except socket.timeout:
            return FetchResult(url, current, STATUS_TIMEOUT, None, [], b"")
        except (OSError, http.client.HTTPException):
            return FetchResult(url, current, STATUS_NETWORK_ERROR, None, [], b"")
        finally:
            conn.close()


def _site_or_host(host: str, psl: SuffixTable | None) -> SiteKey:
    # Hosts that are themselves public suffixes (localhost, bare TLD lab
    # setups) degrade to host identity instead of failing the crawl.
    try:
        return site_of(host, psl)
    except NoRegistrableDomainError:
        return SiteKey(host)


def build_record(result: FetchResult, depth: str, psl: SuffixTable | None = None) -> PageRecord:
    """Turn one fetch into a PageRecord, extracting policies and references."""
    try:
        origin = origin_of(result.final_url)
        site = _site_or_host(origin.host, psl)
    except UnsupportedUrlError:
        origin, site = None, None
    record = PageRecord(
        url=result.url,
        final_url=result.final_url,
        depth=depth,
        fetch_status=result.status,
        http_status=result.http_status,
        origin=origin,
        site=str(site) if site else None,
    )
    if result.status != STATUS_OK or origin is None or site is None:
        return record
    text = result.body.decode("utf-8", errors="replace")
    scan = scan_document(text)
    record.policies = extract_policies(result.headers, scan.meta_csp)
    record.links_same_site = _same_site_urls(scan.hrefs, result.final_url, site, psl)
    record.iframes_same_site = _same_site_urls(scan.iframe_srcs, result.final_url, site, psl)
    record.srcdoc_iframes = scan.srcdoc_count
    return record


class _PoliteFetcher:
    """Spaces request starts per site; parallel workers share the spacing."""

    def __init__(self, config: CrawlConfig):
        self.config = config
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def __call__(self, url: str) -> FetchResult:
        if self.config.politeness_delay > 0:
            with self._lock:
                wait = self._next_allowed - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
                self._next_allowed = time.monotonic() + self.config.politeness_delay
        return fetch(url, self.config)


def _load_robots(origin: Origin, config: CrawlConfig) -> robotparser.RobotFileParser | None:
    result = fetch(origin.ascii_serialization() + "/robots.txt", config)
    if result.status != STATUS_OK:
        return None
    parser = robotparser.RobotFileParser()
    parser.parse(result.body.decode("utf-8", errors="replace").splitlines())
    return parser


def crawl_site(
    seed: str, config: CrawlConfig | None = None, psl: SuffixTable | None = None
) -> list[PageRecord]:
    """Crawl one site: seed page, its same-site links, iframes of both.

    Every visited URL yields exactly one record (failures included) and no
    URL is fetched twice. Pages that redirect off-site become leaf records:
    their outgoing references are never followed.
    """
    config = config or CrawlConfig()
    if config.naive_sites:
        psl = NAIVE_SUFFIXES
    seed, _ = urldefrag(seed)
    seed_origin = origin_of(seed)
    seed_site = _site_or_host(seed_origin.host, psl)

    robots = _load_robots(seed_origin, config) if config.respect_robots else None
    polite_fetch = _PoliteFetcher(config)
    records: list[PageRecord] = []
    visited: set[str] = set()

    def allowed(url: str) -> bool:
        if robots is None:
            return True
        try:
            return robots.can_fetch(config.user_agent, url)
        except Exception:
            return True

    def visit_batch(urls: list[str], depth: str) -> list[PageRecord]:
        batch: list[str] = []
        for url in urls:
            if len(visited) + len(batch) >= config.max_pages_per_site:
                break
            if url in visited or url in batch or not allowed(url):
                continue
            batch.append(url)
        if not batch:
            return []
        if config.parallel_per_site > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=config.parallel_per_site) as pool:
                results = list(pool.map(polite_fetch, batch))
        else:
            results = [polite_fetch(url) for url in batch]
        out = []
        for result in results:
            record = build_record(result, depth, psl)
            visited.add(record.url)
            records.append(record)
            out.append(record)
        return out

    home_records = visit_batch([seed], DEPTH_HOME)
    if not home_records:
        # Robots forbade the seed itself; report it as an unvisited failure.
        return [
            PageRecord(
                url=seed,
                final_url=seed,
                depth=DEPTH_HOME,
                fetch_status=STATUS_NETWORK_ERROR,
                origin=seed_origin,
                site=str(seed_site),
            )
        ]
    home = home_records[0]

    def on_site(record: PageRecord) -> bool:
        return record.fetch_status == STATUS_OK and record.site == str(seed_site)

    linked: list[PageRecord] = []
    if on_site(home):
        linked = visit_batch(home.links_same_site[: config.max_links_per_page], DEPTH_LINKED)
        visit_batch(home.iframes_same_site[: config.max_iframes_per_page], DEPTH_IFRAME_HOME)
    for record in linked:
        if on_site(record):
            visit_batch(
                record.iframes_same_site[: config.max_iframes_per_page], DEPTH_IFRAME_LINKED
            )
    return records


def crawl_sites(
    seeds: list[str], config: CrawlConfig | None = None, psl: SuffixTable | None = None
) -> list[PageRecord]:
    """Crawl many seeds, sites in parallel, each site politely serialized."""
    config = config or CrawlConfig()
    out: list[PageRecord] = []
    if config.parallel_sites > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=config.parallel_sites) as pool:
            for site_records in pool.map(lambda s: crawl_site(s, config, psl), seeds):
                out.extend(site_records)
    else:
        for seed in seeds:
            out.extend(crawl_site(seed, config, psl))
    return out
