"""Seeded generators over a bounded CSP grammar and origin space.

Deterministic (random.Random with explicit seeds) so fuzzed acceptance
counts are exact and reruns are reproducible.
"""

from __future__ import annotations

import random

DIRECTIVE_POOL = [
    "default-src",
    "script-src",
    "style-src",
    "img-src",
    "font-src",
    "connect-src",
    "object-src",
    "media-src",
    "child-src",
    "frame-ancestors",
    "sandbox",
    "report-uri",
]

HOST_POOL = [
    "example.com",
    "*.example.com",
    "cdn.example.com",
    "third.org",
    "a.b.example.co.uk",
    "static.third.org",
]
SCHEME_POOL = [None, "http", "https"]
PORT_POOL = [None, None, "8080", "80", "443", "*"]
PATH_POOL = [None, None, "/js/", "/app.js"]

KEYWORD_TOKENS = ["'self'", "'unsafe-inline'", "'unsafe-eval'", "'none'"]
NONCE_TOKENS = ["'nonce-QUJDMTIz'", "'nonce-eHl6'"]
HASH_TOKENS = ["'sha256-QUJDMTIz'", "'sha384-eHl6'", "'sha512-Zm9v'"]
SCHEME_SOURCE_TOKENS = ["https:", "data:", "blob:"]
SANDBOX_FLAGS = ["allow-scripts", "allow-same-origin", "allow-forms", "allow-popups"]
REPORT_TARGETS = ["/csp-report", "https://report.example.com/collect"]

ORIGIN_SCHEMES = ["http", "https"]
ORIGIN_HOSTS = [
    "main.com",
    "sub.main.com",
    "a.main.com",
    "other.org",
    "deep.sub.main.com",
    "example.co.uk",
    "shop.example.co.uk",
]
ORIGIN_PORTS = [80, 443, 8080, 81]


def host_source_token(rng: random.Random) -> str:
    host = rng.choice(HOST_POOL)
    scheme = rng.choice(SCHEME_POOL)
    port = rng.choice(PORT_POOL)
    path = rng.choice(PATH_POOL)
    token = host
    if scheme:
        token = f"{scheme}://{token}"
    if port:
        token = f"{token}:{port}"
    if path:
        token = f"{token}{path}"
    return token


def source_token(rng: random.Random) -> str:
    kind = rng.randrange(10)
    if kind < 4:
        return host_source_token(rng)
    if kind < 6:
        return rng.choice(KEYWORD_TOKENS)
    if kind == 6:
        return rng.choice(NONCE_TOKENS)
    if kind == 7:
        return rng.choice(HASH_TOKENS)
    if kind == 8:
        return rng.choice(SCHEME_SOURCE_TOKENS)
    return "*"


def directive_text(rng: random.Random, name: str) -> str:
    if name == "sandbox":
        flags = rng.sample(SANDBOX_FLAGS, k=rng.randint(0, 3))
        return " ".join([name, *flags]).strip()
    if name == "report-uri":
        return f"{name} {rng.choice(REPORT_TARGETS)}"
    tokens = [source_token(rng) for _ in range(rng.randint(0, 4))]
    return " ".join([name, *tokens]).strip()


def policy_text(rng: random.Random) -> str:
    names = rng.sample(DIRECTIVE_POOL, k=rng.randint(0, 5))
    return "; ".join(directive_text(rng, name) for name in names)


def origin_triple(rng: random.Random) -> tuple[str, str, int]:
    return rng.choice(ORIGIN_SCHEMES), rng.choice(ORIGIN_HOSTS), rng.choice(ORIGIN_PORTS)
