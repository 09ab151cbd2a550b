"""Report assembly: tolerance gates, JSON and CSV emission.

Every output embeds the config hash, seed and package version, carries no
timestamps, and formats floats by shortest round-trip repr, so reruns with
an identical config are byte-identical.  Gates are three-state: a criterion
that fails inside its own noise band is INCONCLUSIVE (budget too small to
decide), not FAILED.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"

EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3


@dataclass
class Gate:
    name: str
    status: str
    observed: float
    threshold: float
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "observed": self.observed,
            "threshold": self.threshold,
            "detail": self.detail,
        }


def bounded_gate(name, observed, threshold, noise=0.0, detail="") -> Gate:
    """PASS if observed < threshold; a miss inside ``noise`` is INCONCLUSIVE."""
    if observed < threshold:
        status = PASS
    elif observed < threshold + noise:
        status = INCONCLUSIVE
        detail = (detail + " " if detail else "") + "within noise of the threshold"
    else:
        status = FAIL
    return Gate(name, status, float(observed), float(threshold), detail)


def exit_code(gates) -> int:
    if any(g.status == FAIL for g in gates):
        return EXIT_GATE_FAILURE
    if any(g.status == INCONCLUSIVE for g in gates):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def write_json(obj: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return repr(v)
    return str(v)


def write_csv(rows, path, header) -> None:
    """UTF-8, comma-separated, header row; floats as round-trip repr."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def sanitize(obj):
    """Replace non-finite floats for strict JSON emission."""
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj
