"""Newline-delimited JSON persistence for crawl records.

Line 1 is a header object carrying the schema version and crawl metadata;
every following line is one PageRecord. Bodies are never stored, only the
extracted fields, which keeps corpora small enough to share. A .gz suffix
selects transparent gzip compression.
"""

from __future__ import annotations

import gzip
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

from .crawler import PageRecord
from .origins import Origin
from .policy import parse_policy

FORMAT_NAME = "cspsop-corpus"
SCHEMA_VERSION = 1


class CorpusFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnsupportedSchemaError(CorpusFormatError):
    pass


def record_to_dict(record: PageRecord) -> dict:
    origin = record.origin
    return {
        "url": record.url,
        "final_url": record.final_url,
        "depth": record.depth,
        "fetch_status": record.fetch_status,
        "http_status": record.http_status,
        "origin": None
        if origin is None
        else {"scheme": origin.scheme, "host": origin.host, "port": origin.port},
        "site": record.site,
        "policies": [
            {"raw": p.raw, "disposition": p.disposition, "delivery": p.delivery}
            for p in record.policies
        ],
        "links_same_site": list(record.links_same_site),
        "iframes_same_site": list(record.iframes_same_site),
        "srcdoc_iframes": record.srcdoc_iframes,
    }


def record_from_dict(data: dict) -> PageRecord:
    origin = data.get("origin")
    return PageRecord(
        url=data["url"],
        final_url=data["final_url"],
        depth=data["depth"],
        fetch_status=data["fetch_status"],
        http_status=data.get("http_status"),
        origin=None if origin is None else Origin(origin["scheme"], origin["host"], origin["port"]),
        site=data.get("site"),
        policies=[
            parse_policy(p["raw"], p["disposition"], p["delivery"])
            for p in data.get("policies", [])
        ],
        links_same_site=list(data.get("links_same_site", [])),
        iframes_same_site=list(data.get("iframes_same_site", [])),
        srcdoc_iframes=data.get("srcdoc_iframes", 0),
    )


def _open(path: str | Path, mode: str) -> IO:
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_corpus(
    records: Iterable[PageRecord],
    path: str | Path,
    meta: dict | None = None,
    created: str | None = None,
) -> int:
    """Write records to path; returns the record count.

    Pass a fixed `created` timestamp to make output byte-reproducible.
    """
    count = 0
    header = {
        "format": FORMAT_NAME,
        "schema": SCHEMA_VERSION,
        "created": created or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if meta:
        header["crawl"] = meta
    with _open(path, "w") as fh:
        fh.write(_dump(header) + "\n")
        for record in records:
            fh.write(_dump(record_to_dict(record)) + "\n")
            count += 1
    return count


def read_corpus_header(path: str | Path) -> dict:
    with _open(path, "r") as fh:
        first = fh.readline()
    return _parse_header(first)


def _parse_header(line: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"bad header: {exc}", line=1) from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise CorpusFormatError("not a corpus file (missing header)", line=1)
    if header.get("schema") != SCHEMA_VERSION:
        raise UnsupportedSchemaError(
            f"unsupported schema {header.get('schema')!r}, expected {SCHEMA_VERSION}", line=1
        )
    return header


def iter_corpus(path: str | Path) -> Iterator[PageRecord]:
    """Stream records one line at a time; the file is never fully buffered."""
    with _open(path, "r") as fh:
        _parse_header(fh.readline())
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                yield record_from_dict(data)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(str(exc), line=lineno) from exc


def read_corpus(path: str | Path) -> list[PageRecord]:
    return list(iter_corpus(path))
