"""Canonical JSON documents with fixed float precision and atomic writes."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

__all__ = ["canonical", "dumps_canonical", "write_atomic",
           "caustic_document", "portrait_document", "diagram_document"]

_PRECISION = 12  # significant digits kept in emitted floats


def canonical(obj):
    """Recursively convert to plain JSON types with rounded floats."""
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if v == 0.0:
            return 0.0
        return float(f"{v:.{_PRECISION}e}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_canonical(doc) -> str:
    return json.dumps(canonical(doc), sort_keys=True, indent=1) + "\n"


def write_atomic(path, text: str):
    """Write via a temp file in the same directory plus rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def caustic_document(curve, locus=None, function=None):
    doc = {
        "components": [c.tolist() for c in curve.components],
        "closed": list(curve.closed),
        "labels": curve.labels if curve.labels is not None else None,
        "cusps": curve.cusp_points,
        "cusp_fiber_points": curve.cusp_fiber_points,
        "degenerate_points": curve.non_morse_points,
        "warnings": list(curve.warnings),
    }
    if locus is not None:
        doc["critical_locus"] = {
            "components": [c.tolist() for c in locus.components],
            "closed": list(locus.closed),
            "degenerate_points": locus.degenerate_points,
        }
    if function is not None:
        doc["function"] = function
    return doc


def portrait_document(p, function=None):
    doc = {
        "x": p.x,
        "flags": list(p.flags),
        "signature": p.signature,
        "connections": [list(c) for c in p.connections],
        "critical_points": [
            {
                "id": c.id,
                "position": c.position,
                "eigenvalues": list(c.hessian_eigenvalues),
                "morse_index": c.morse_index,
                "kind": c.kind,
            }
            for c in p.critical_points
        ],
        "separatrices": [
            {
                "saddle": s.saddle_id,
                "branch": s.branch,
                "limit": [str(v) for v in s.limit],
                "points": s.trajectory,
            }
            for s in p.separatrices
        ],
    }
    if function is not None:
        doc["function"] = function
    return doc


def diagram_document(d, function=None):
    doc = {
        "label": d.label,
        "base_window": {"center": d.base_window.center,
                        "half_widths": d.base_window.half_widths},
        "fiber_window": {"center": d.fiber_window.center,
                         "half_widths": d.fiber_window.half_widths,
                         "resolution": d.fiber_window.resolution},
        "caustic": caustic_document(d.caustic),
        "strata": [
            {
                "pair": list(c.pair),
                "points": c.points,
                "psi_residuals": c.psi_residuals,
                "endpoints": list(c.endpoints),
                "branch_selection": list(c.branch_selection) if c.branch_selection else None,
                "seed_point": c.seed_point,
                "pair_positions": c.pair_positions,
                "engaged_dirs": c.engaged_dirs,
            }
            for c in d.strata
        ],
        "codim2_points": [
            {"point": p, "pairs": [list(a), list(b)]} for p, a, b in d.codim2_points
        ],
        "regions": [
            {
                "id": r.id,
                "sample": r.sample_x,
                "signature": r.signature,
                "sample_count": r.sample_count,
                "signature_consistent": r.signature_consistent,
            }
            for r in d.regions
        ],
        "validation": [
            {"name": c.name, "passed": c.passed, "details": c.details,
             "witnesses": c.witnesses}
            for c in d.report
        ],
        "unresolved_edges": d.unresolved_edges,
        "meta": d.meta,
    }
    if function is not None:
        doc["function"] = function
    return doc
