"""Measure abstention on absent fields and recall on present ones.

Builds a synthetic invoice corpus where the due-date line is removed
from a chosen fraction of documents. A well-calibrated extractor should
abstain (record no value) when the field is absent and still recover
the value when it is present. Prints the two-by-two outcome table.

Usage:
    python scripts/run_rejection_study.py --docs 100 --absent 50 --seed 0
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import synthworld


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=100, help="documents in the corpus")
    parser.add_argument(
        "--absent", type=int, default=50,
        help="documents with the due-date line removed",
    )
    parser.add_argument("--seed", type=int, default=0, help="corpus seed")
    args = parser.parse_args()
    if not 0 <= args.absent <= args.docs:
        parser.error("--absent must be between 0 and --docs")

    world = synthworld.build_world(args.docs, args.seed, due_absent=args.absent)
    records = synthworld.run_extraction(world, synthworld.BACKEND_NAMES)
    absent_ids = {doc.doc_id for doc in world.docs if doc.due_absent}

    abstained = recalled = false_value = missed = 0
    for record in records:
        if record.field_name != "due_date":
            continue
        if record.doc_id in absent_ids:
            if record.value is None:
                abstained += 1
            else:
                false_value += 1
        else:
            if record.value is not None:
                recalled += 1
            else:
                missed += 1

    present = args.docs - args.absent
    print("outcome\tcount\tof")
    print(f"abstained on absent field\t{abstained}\t{args.absent}")
    print(f"hallucinated a value\t{false_value}\t{args.absent}")
    print(f"recalled present field\t{recalled}\t{present}")
    print(f"missed present field\t{missed}\t{present}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
