"""Report assembly: exact-text JSON and CSV with reproducibility metadata."""
from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .lemmas import LemmaRow
from .rules import DiameterRule
from .verifier import VerificationReport, _fraction_text

TOOL = "snowcircle"


def metadata(rules: Sequence[DiameterRule], depth: int, **extra) -> dict:
    """Fields embedded in every output: tool version, depth, rule hashes and seeds."""
    return {
        "tool": TOOL,
        "version": __version__,
        "depth": depth,
        "rule_hashes": [r.hash for r in rules],
        "seeds": [r.seed_info.get("seed") for r in rules],
        **extra,
    }


def dumps(document: dict) -> str:
    """Deterministic JSON text (sorted keys, no floats are ever produced upstream)."""
    return json.dumps(document, indent=1, sort_keys=True) + "\n"


def write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(text)


def verification_document(reports: Sequence[VerificationReport], config: dict,
                          detail: str = "worst") -> dict:
    """One JSON document for a sweep, rule reports in input order."""
    rules = [r.rule for r in reports]
    depth = reports[0].depth if reports else config.get("depth")
    doc = metadata(rules, depth, config=config)
    doc["reports"] = [r.to_dict(detail) for r in reports]
    if reports:
        doc["global_max_ratio"] = _fraction_text(max(r.global_max_ratio for r in reports))
        doc["global_max_delta_ratio"] = _fraction_text(max(r.global_max_delta_ratio for r in reports))
        composite = [r.composite.constant for r in reports if r.composite is not None]
        doc["composite_constant"] = _fraction_text(max(composite)) if composite else None
        doc["bound"] = reports[0].bound
    doc["pass"] = all(r.passed for r in reports)
    return doc


def lemma_document(rule: DiameterRule, depth: int, rows: Sequence[LemmaRow]) -> dict:
    doc = metadata([rule], depth)
    doc["rows"] = [row.to_dict() for row in rows]
    doc["pass"] = all(row.status != "fail" for row in rows)
    return doc


def lemma_table(rows: Iterable[LemmaRow]) -> str:
    """Plain-text table: name, status, instance count, worst margin."""
    lines = [f"{'lemma':<30} {'status':<6} {'instances':>10}  worst margin"]
    for row in rows:
        d = row.to_dict()
        margin = "-" if d["worst_margin"] is None else d["worst_margin"]
        lines.append(f"{row.name:<30} {row.status:<6} {row.instances:>10}  {margin}")
    return "\n".join(lines) + "\n"


def targets_csv(report: VerificationReport) -> str:
    """Per-target rows of a rule report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rule_hash", "depth", "M_star", "H", "delta_choice", "delta", "components",
                "max_ratio", "max_delta_ratio"])
    for t in report.targets:
        d = t.to_dict(report.depth, detail="none")
        w.writerow([report.rule.hash, report.depth, t.M_star, " ".join(t.H), t.delta_name, d["delta"],
                    len(t.components), d["max_ratio"], d["max_delta_ratio"]])
    return buf.getvalue()


__all__ = ["dumps", "lemma_document", "lemma_table", "metadata", "targets_csv",
           "verification_document", "write_text"]
