#!/usr/bin/env python3
"""Offline demo of the verification pipeline on a scripted backend.

Authors a four-claim dataset and a regex response script in a working
directory, evaluates the full pipeline, then runs the complete ablation
matrix. No network access or API key is needed; every completion comes
from the script, so the output is deterministic.

Usage:
    python3 scripts/run_scripted_demo.py [--work-dir DIR]
"""
from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from claimpipe.cli import main as cli_main

SCRIPT_ENTRIES = [
    {
        "regex": "such as important verbs",
        "response": "spam, canned meat, luncheon.",
    },
    {
        "regex": "based on specified keywords",
        "response": "Spam is a canned meat sold as a luncheon staple.",
    },
    {
        "regex": "based on a given claim",
        "response": "Spam is a canned luncheon meat from Hormel.",
    },
    {
        "regex": "Dissect a given claim",
        "response": "\\n #1 Spam is a canned meat. \\n #2 Spam is served as luncheon meat.",
    },
    # Entries are tried in order, so the specific rule wins over the catch-all.
    {"regex": r"Is it true that .*seafood", "response": "No."},
    {"regex": r"\(Yes or No\)", "response": "Yes."},
]

DATASET = [
    {
        "id": "demo-1",
        "claim": "Spam is a canned meat served as luncheon meat.",
        "label": True,
        "evidence": [
            {"title": "Spam", "text": "Spam is a canned cooked meat."},
            {"title": "Luncheon meat", "text": "Spam is a popular luncheon meat."},
        ],
    },
    {
        "id": "demo-2",
        "claim": "Spam is a canned meat product.",
        "label": True,
        "evidence": [{"text": "Spam is a canned meat sold worldwide."}],
    },
    {
        "id": "demo-3",
        "claim": "Spam is a canned meat made from seafood.",
        "label": False,
        "evidence": [{"text": "Spam is a canned meat made chiefly from pork."}],
    },
    {
        "id": "demo-4",
        "claim": "Spam is a canned meat introduced as luncheon fare.",
        "label": False,
        "evidence": [{"text": "Spam is a canned meat and luncheon staple."}],
    },
]


def write_inputs(work_dir: Path) -> tuple[Path, Path]:
    work_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = work_dir / "demo_claims.jsonl"
    dataset_path.write_text(
        "".join(json.dumps(row) + "\n" for row in DATASET), encoding="utf-8"
    )
    script_path = work_dir / "demo_script.json"
    script_path.write_text(json.dumps(SCRIPT_ENTRIES, indent=2), encoding="utf-8")
    return dataset_path, script_path


def run(work_dir: Path) -> int:
    dataset_path, script_path = write_inputs(work_dir)
    common = [
        "--backend", "scripted",
        "--script", str(script_path),
        "--data-path", str(dataset_path),
        "--cache-dir", str(work_dir / "cache"),
        "--workers", "2",
    ]
    print(f"work dir: {work_dir}\n")
    print("== eval ==")
    code = cli_main(["eval", *common, "--out", str(work_dir / "eval")])
    if code != 0:
        return code
    print("\n== ablate ==")
    return cli_main(["ablate", *common, "--out", str(work_dir / "ablate")])


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--work-dir",
        help="directory for generated inputs and reports (default: a temp dir)",
    )
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    work_dir = Path(args.work_dir) if args.work_dir else Path(
        tempfile.mkdtemp(prefix="claimpipe-demo-")
    )
    sys.exit(run(work_dir))
