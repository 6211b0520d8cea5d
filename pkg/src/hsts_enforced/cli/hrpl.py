"""hrpl: build, inspect and query HTTP-Required preload lists."""

from __future__ import annotations

import argparse
import datetime
import sys
import time

from ..preload import DAY, PreloadError, build, load, load_jsonl


def _when(epoch: int) -> str:
    return datetime.datetime.fromtimestamp(epoch, datetime.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ")


def cmd_build(args) -> int:
    entries = load_jsonl(args.source)
    issued = args.issued_at if args.issued_at is not None else int(time.time())
    artifact = build(entries, issued_at=issued, validity=int(args.validity_days * DAY))
    with open(args.output, "wb") as fh:
        fh.write(artifact.encoded)
    print(f"wrote {args.output}: {len(artifact.entries)} entries, {len(artifact.encoded)} bytes,"
          f" expires {_when(artifact.expires_at)}")
    return 0


def cmd_lookup(args) -> int:
    artifact = load(args.file)
    now = args.now if args.now is not None else int(time.time())
    for domain in args.domain:
        result = artifact.lookup(domain, now)
        print(str(result) if len(args.domain) == 1 else f"{domain} {result}")
    return 0


def cmd_inspect(args) -> int:
    a = load(args.file)
    days = a.validity / DAY
    print(f"format: {a.version}")
    print(f"issued_at: {a.issued_at} ({_when(a.issued_at)})")
    print(f"expires_at: {a.expires_at} ({_when(a.expires_at)})")
    print(f"validity: {days:g} d")
    print(f"entries: {len(a.entries)}")
    print(f"encoded_size: {len(a.encoded)} bytes")
    if args.entries:
        for e in sorted(a.entries):
            print(f"  {e.domain}{' (include_subdomains)' if e.include_subdomains else ''}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hrpl", description="HTTP-Required preload list tool")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="compile a JSON-lines source into an .hrpl artifact")
    b.add_argument("source")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--issued-at", type=int, metavar="EPOCH")
    b.add_argument("--validity-days", type=float, default=42)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("lookup", help="look domains up in an artifact")
    q.add_argument("file")
    q.add_argument("domain", nargs="+")
    q.add_argument("--now", type=int, metavar="EPOCH")
    q.set_defaults(func=cmd_lookup)

    i = sub.add_parser("inspect", help="show artifact metadata")
    i.add_argument("file")
    i.add_argument("--entries", action="store_true", help="list every entry")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PreloadError as exc:
        where = getattr(args, "file", None) or getattr(args, "source", None)
        message = str(exc)
        if where and not message.startswith(str(where)):
            message = f"{where}: {exc.code}: {message}"
        print(f"hrpl: {message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hrpl: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
