#!/usr/bin/env python3
"""Convert a local 20 Newsgroups tree or Reuters-21578 SGML files to the
jsonl corpus format read by `negbayes ingest`.

    prepare_corpus.py 20news  path/to/20news-18828  data/20news.jsonl
    prepare_corpus.py reuters path/to/reuters21578  data/reuters.jsonl

Nothing is downloaded. For Reuters, only documents with exactly one topic
are kept, restricted to the ten most frequent such topics.
"""

import argparse
import collections
import html
import json
import re
import sys
from pathlib import Path


def strip_headers(text):
    # newsgroup posts: drop the RFC 822 header block
    head, sep, body = text.partition("\n\n")
    return body if sep else text


def newsgroups(root, keep_headers):
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(p for p in class_dir.iterdir() if p.is_file()):
            text = f.read_text(encoding="latin-1")
            if not keep_headers:
                text = strip_headers(text)
            yield {"id": f"{class_dir.name}/{f.name}", "text": text, "class": class_dir.name}


TAG = re.compile(r"<REUTERS[^>]*NEWID=\"(\d+)\"[^>]*>(.*?)</REUTERS>", re.S)


def field(block, name):
    m = re.search(rf"<{name}>(.*?)</{name}>", block, re.S)
    return html.unescape(m.group(1)) if m else ""


def reuters(root, top):
    docs = []
    for f in sorted(root.glob("*.sgm")):
        for newid, block in TAG.findall(f.read_text(encoding="latin-1")):
            topics = re.findall(r"<D>(.*?)</D>", field(block, "TOPICS"))
            if len(topics) != 1:
                continue
            text = (field(block, "TITLE") + "\n" + field(block, "BODY")).strip()
            if text:
                docs.append({"id": newid, "text": text, "class": topics[0]})
    counts = collections.Counter(d["class"] for d in docs)
    keep = {c for c, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]}
    return [d for d in docs if d["class"] in keep]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("kind", choices=["20news", "reuters"])
    ap.add_argument("source", type=Path)
    ap.add_argument("output", type=Path)
    ap.add_argument("--keep-headers", action="store_true", help="20news: keep message headers")
    ap.add_argument("--top", type=int, default=10, help="reuters: number of topics kept")
    args = ap.parse_args()
    if not args.source.is_dir():
        sys.exit(f"not a directory: {args.source}")
    docs = newsgroups(args.source, args.keep_headers) if args.kind == "20news" else reuters(args.source, args.top)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    classes = collections.Counter()
    with args.output.open("w", encoding="utf-8") as out:
        for d in docs:
            out.write(json.dumps(d) + "\n")
            n += 1
            classes[d["class"]] += 1
    print(f"{n} documents, {len(classes)} classes -> {args.output}")


if __name__ == "__main__":
    main()
