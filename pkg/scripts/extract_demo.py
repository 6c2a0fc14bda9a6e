"""Extract the sample invoice's fields and print the full provenance.

Runs the extraction pipeline with the checked-in demo configuration
(two deterministic mock backends that always find the planted answers)
and shows everything the knowledge store would persist: the selected
value, its confidence, and each supporting answer with its weighted
score.

Usage:
    python scripts/extract_demo.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from vespa.backends import parse_backends_file
from vespa.docmodel import ingest_plain
from vespa.ensemble import load_weight_table
from vespa.foi import parse_profile
from vespa.pipeline import extract_document

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    profile = parse_profile((CONFIG_DIR / "profile.yaml").read_text(encoding="utf-8"))
    backends = parse_backends_file(str(CONFIG_DIR / "backends.yaml"))
    weights = load_weight_table(str(CONFIG_DIR / "weights.json"))
    raw = (CONFIG_DIR / "sample_invoice.txt").read_bytes()
    document = ingest_plain(raw, doc_id="sample-invoice")

    records = extract_document(document, profile, backends, weights)
    for record in records:
        value = record.value if record.value is not None else "<abstained>"
        source = record.provenance.get("source", "ensemble")
        print(f"{record.field_name}: {value}  (confidence {record.confidence:.4f}, "
              f"source {source})")
        supporters = record.provenance.get("supporters", [])
        for supporter in supporters:
            print(f"  {supporter['model']:>6}  {supporter['qclass']:<6}  "
                  f"raw {supporter['raw_confidence']:.2f}  "
                  f"weighted {supporter['weighted_confidence']:.4f}  "
                  f"q: {supporter['question']}")
        dropped = sum(record.rejected.values())
        print(f"  supporters {len(supporters)}, rejected {dropped}, "
              f"total score {record.provenance.get('total_score', 0.0):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
