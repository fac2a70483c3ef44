"""CSP Level-2 policy model and tolerant parser.

Policies arrive as header values or <meta> content strings. Parsing never
fails: malformed pieces are dropped and recorded as warnings, because real
headers in the wild are dirty and an auditor has to keep going.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ENFORCE = "enforce"
REPORT_ONLY = "report-only"
HTTP_HEADER = "http-header"
META_ELEMENT = "meta-element"

CSP_HEADER = "content-security-policy"
CSP_REPORT_ONLY_HEADER = "content-security-policy-report-only"

# Directives with a known role. Anything else is carried opaquely and
# flagged with an unknown-directive warning.
KNOWN_DIRECTIVES = frozenset(
    {
        "script-src",
        "default-src",
        "style-src",
        "img-src",
        "font-src",
        "connect-src",
        "object-src",
        "report-uri",
        "media-src",
        "child-src",
        "frame-ancestors",
        "sandbox",
    }
)

# Directives whose value is not a source list: tokens stay opaque.
VALUE_LIST_DIRECTIVES = frozenset({"sandbox", "report-uri"})

KEYWORDS = frozenset({"self", "unsafe-inline", "unsafe-eval", "none"})

_BASE64_RE = re.compile(r"^[A-Za-z0-9+/\-_]+={0,2}$")
_SCHEME_RE = re.compile(r"^([a-z][a-z0-9+.\-]*):$")
_HOST_SOURCE_RE = re.compile(
    r"^(?:([a-z][a-z0-9+.\-]*)://)?"  # optional scheme
    r"((?:\*\.)?[a-z0-9\-_]+(?:\.[a-z0-9\-_]+)*)"  # host, maybe one leading *.
    r"(?::(\d+|\*))?"  # optional port or port wildcard
    r"(/[^\s;,]*)?$"  # optional path
)


@dataclass(frozen=True)
class SourceExpression:
    """One entry of a source list.

    kind is one of host-source, scheme-source, keyword, nonce, hash, or
    wildcard-all. Only the fields relevant to the kind are populated.
    """

    kind: str
    scheme: str | None = None
    host: str | None = None
    port: str | None = None  # decimal string or "*"
    path: str | None = None
    keyword: str | None = None  # self / unsafe-inline / unsafe-eval / none
    nonce_value: str | None = None
    hash_algorithm: str | None = None
    hash_value: str | None = None

    def token(self) -> str:
        """The canonical textual form this expression serializes to."""
        if self.kind == "wildcard-all":
            return "*"
        if self.kind == "keyword":
            return f"'{self.keyword}'"
        if self.kind == "nonce":
            return f"'nonce-{self.nonce_value}'"
        if self.kind == "hash":
            return f"'{self.hash_algorithm}-{self.hash_value}'"
        if self.kind == "scheme-source":
            return f"{self.scheme}:"
        out = f"{self.scheme}://" if self.scheme else ""
        out += self.host or ""
        if self.port is not None:
            out += f":{self.port}"
        if self.path:
            out += self.path
        return out


@dataclass(frozen=True)
class ParseWarning:
    kind: str  # duplicate-directive | unknown-directive | malformed-source | misplaced-none
    detail: str


@dataclass(frozen=True)
class Directive:
    """A named directive and its parsed source list.

    sources is empty for value-list directives (sandbox, report-uri); their
    tokens are kept verbatim in opaque_values instead.
    """

    name: str
    sources: tuple[SourceExpression, ...]
    opaque_values: tuple[str, ...] = ()
    raw_value: str = field(compare=False, default="")


@dataclass(frozen=True)
class Policy:
    """One delivered CSP: directive map plus disposition and channel.

    Equality is structural over directives/disposition/delivery; the original
    text and warnings are carried but not compared, so a reparse of the
    serialized form equals the original.
    """

    directives: dict[str, Directive]
    disposition: str = ENFORCE
    delivery: str = HTTP_HEADER
    raw: str = field(compare=False, default="")
    warnings: tuple[ParseWarning, ...] = field(compare=False, default=())

    def has_directive(self, name: str) -> bool:
        return name.lower() in self.directives

    def serialize(self) -> str:
        """Canonical policy string; reparses to an equal Policy."""
        parts = []
        for directive in self.directives.values():
            if directive.name in VALUE_LIST_DIRECTIVES:
                tokens = list(directive.opaque_values)
            else:
                tokens = [s.token() for s in directive.sources]
            parts.append(" ".join([directive.name, *tokens]).strip())
        return "; ".join(parts)


def parse_source_expression(token: str) -> SourceExpression | None:
    """Parse one source-list token; None when the token is malformed."""
    if token == "*":
        return SourceExpression(kind="wildcard-all")
    if token.startswith("'") and token.endswith("'") and len(token) > 2:
        inner = token[1:-1]
        low = inner.lower()
        if low in KEYWORDS:
            return SourceExpression(kind="keyword", keyword=low)
        if low.startswith("nonce-"):
            value = inner[len("nonce-"):]
            if value and _BASE64_RE.match(value):
                return SourceExpression(kind="nonce", nonce_value=value)
            return None
        for algo in ("sha256", "sha384", "sha512"):
            if low.startswith(algo + "-"):
                value = inner[len(algo) + 1:]
                if value and _BASE64_RE.match(value):
                    return SourceExpression(kind="hash", hash_algorithm=algo, hash_value=value)
                return None
        return None
    lowered = token.lower()
    m = _SCHEME_RE.match(lowered)
    if m:
        return SourceExpression(kind="scheme-source", scheme=m.group(1))
    m = _HOST_SOURCE_RE.match(lowered)
    if m:
        scheme, host, port, path = m.groups()
        if port is not None and port != "*" and not 1 <= int(port) <= 65535:
            return None
        # Path case matters; recover it from the original token.
        if path:
            path = token[len(token) - len(path):]
        return SourceExpression(kind="host-source", scheme=scheme, host=host, port=port, path=path)
    return None


def parse_policy(raw: str, disposition: str = ENFORCE, delivery: str = HTTP_HEADER) -> Policy:
    """Parse a policy string into a Policy. Total: bad input yields warnings,
    never an exception.

    Duplicate directive names keep the first occurrence (CSP semantics).
    'none' mixed into a longer source list is dropped with a warning,
    mirroring how browsers ignore it outside singleton lists.
    """
    directives: dict[str, Directive] = {}
    warnings: list[ParseWarning] = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        tokens = chunk.split()
        name = tokens[0].lower()
        value_tokens = tokens[1:]
        if name in directives:
            warnings.append(ParseWarning("duplicate-directive", name))
            continue
        if name not in KNOWN_DIRECTIVES:
            warnings.append(ParseWarning("unknown-directive", name))
        if name in VALUE_LIST_DIRECTIVES:
            directives[name] = Directive(
                name, (), opaque_values=tuple(value_tokens), raw_value=" ".join(value_tokens)
            )
            continue
        sources: list[SourceExpression] = []
        for token in value_tokens:
            expr = parse_source_expression(token)
            if expr is None:
                warnings.append(ParseWarning("malformed-source", f"{name}: {token}"))
                continue
            sources.append(expr)
        if len(sources) > 1:
            keep = [s for s in sources if s.keyword != "none"]
            if len(keep) != len(sources):
                warnings.append(ParseWarning("misplaced-none", name))
                sources = keep
        directives[name] = Directive(name, tuple(sources), raw_value=" ".join(value_tokens))
    return Policy(
        directives=directives,
        disposition=disposition,
        delivery=delivery,
        raw=raw,
        warnings=tuple(warnings),
    )


def extract_policies(
    header_fields: list[tuple[str, str]], meta_tags: list[str]
) -> list[Policy]:
    """Policies delivered with one response: headers first, then meta tags.

    Header names are matched case-insensitively; the report-only header sets
    the report-only disposition. Meta policies are always enforced (the
    report-only header has no meta equivalent).
    """
    policies: list[Policy] = []
    for name, value in header_fields:
        low = name.lower()
        if low == CSP_HEADER:
            policies.append(parse_policy(value, ENFORCE, HTTP_HEADER))
        elif low == CSP_REPORT_ONLY_HEADER:
            policies.append(parse_policy(value, REPORT_ONLY, HTTP_HEADER))
    for content in meta_tags:
        policies.append(parse_policy(content, ENFORCE, META_ELEMENT))
    return policies
