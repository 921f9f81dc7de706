"""Estimate reports and artifact writers (JSON manifest, CSV tables)."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, model_validator

from fracspde_lab import __version__

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1

ParamValue = float | int | str | bool | None


class EstimateReport(BaseModel):
    """Outcome of one verified inequality or identity.

    ``samples`` are the tested ratios (or errors); ``supremum`` is their max on
    the base sweep and ``refined_supremum`` the max on the refined sweep.
    """

    inequality: str
    parameters: dict[str, ParamValue] = Field(default_factory=dict)
    samples: list[float] = Field(default_factory=list)
    supremum: float = 0.0
    refined_supremum: float | None = None
    drift: float | None = None
    threshold: float = 0.10
    passed: bool = False
    notes: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_supremum(self) -> EstimateReport:
        finite = [s for s in self.samples if math.isfinite(s)]
        if finite and math.isfinite(self.supremum):
            worst = max(finite)
            if worst > self.supremum * (1 + 1e-12) + 1e-300:
                raise ValueError(
                    f"supremum {self.supremum!r} is below sample maximum {worst!r}"
                )
        return self


def _sup(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    if not np.all(np.isfinite(values)):
        return math.inf
    return float(np.max(values))


def ratio_report(
    inequality: str,
    coarse: Sequence[float] | np.ndarray,
    refined: Sequence[float] | np.ndarray | None = None,
    *,
    threshold: float = 0.10,
    parameters: dict[str, ParamValue] | None = None,
    notes: Iterable[str] = (),
) -> EstimateReport:
    """Report for a bound ratio: finite supremum, stable under refinement.

    Drift is ``|sup_refined - sup_coarse| / sup_coarse``; a zero supremum on
    both sweeps (e.g. zero forcing) counts as stable.
    """
    base = np.abs(np.asarray(coarse, dtype=float).ravel())
    sup = _sup(base)
    notes_list = list(notes)
    refined_sup: float | None = None
    drift: float | None = None
    passed = math.isfinite(sup)
    if refined is not None:
        fine = np.abs(np.asarray(refined, dtype=float).ravel())
        refined_sup = _sup(fine)
        if sup == 0.0 and refined_sup == 0.0:
            drift = 0.0
        elif sup == 0.0 or not math.isfinite(refined_sup) or not math.isfinite(sup):
            drift = math.inf
        else:
            drift = abs(refined_sup - sup) / sup
        passed = passed and math.isfinite(refined_sup) and drift <= threshold
    if not passed:
        logger.info("%s: supremum=%s refined=%s drift=%s", inequality, sup, refined_sup, drift)
    return EstimateReport(
        inequality=inequality,
        parameters=dict(parameters or {}),
        samples=[float(s) for s in base],
        supremum=sup,
        refined_supremum=refined_sup,
        drift=drift,
        threshold=threshold,
        passed=passed,
        notes=notes_list,
    )


def tolerance_report(
    inequality: str,
    errors: Sequence[float] | np.ndarray,
    tolerance: float,
    *,
    parameters: dict[str, ParamValue] | None = None,
    notes: Iterable[str] = (),
) -> EstimateReport:
    """Report for an identity: every error must be at most ``tolerance``."""
    errs = np.abs(np.asarray(errors, dtype=float).ravel())
    sup = _sup(errs)
    return EstimateReport(
        inequality=inequality,
        parameters=dict(parameters or {}),
        samples=[float(e) for e in errs],
        supremum=sup,
        threshold=tolerance,
        passed=math.isfinite(sup) and sup <= tolerance,
        notes=list(notes),
    )


def artifact_header(config_hash: str, seed: int) -> str:
    return f"# fracspde-lab version={__version__} config_hash={config_hash} seed={seed}"


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    config_hash: str,
    seed: int,
) -> Path:
    """Write a CSV artifact with the provenance comment line first."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(artifact_header(config_hash, seed) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    return path


def _format_cell(value: Any) -> Any:
    if isinstance(value, float | np.floating):
        # repr round-trips doubles, so reruns are bitwise identical
        return repr(float(value))
    return value


def write_report_samples(
    path: Path, reports: Sequence[EstimateReport], *, config_hash: str, seed: int
) -> Path:
    rows = (
        (report.inequality, index, sample)
        for report in reports
        for index, sample in enumerate(report.samples)
    )
    return write_csv(
        path, ["inequality", "index", "ratio"], rows, config_hash=config_hash, seed=seed
    )


def write_manifest(
    path: Path,
    *,
    subcommand: str,
    config: dict[str, Any],
    config_hash: str,
    seed: int,
    reports: Sequence[EstimateReport],
    artifacts: Sequence[Path],
) -> Path:
    """Write the JSON manifest. No timestamps: reruns reproduce it bitwise."""
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "fracspde-lab",
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": config_hash,
        "seed": seed,
        "config": config,
        "passed": all(r.passed for r in reports),
        "reports": [r.model_dump(mode="json", exclude={"samples"}) for r in reports],
        "artifacts": [a.name for a in artifacts],
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    return path
