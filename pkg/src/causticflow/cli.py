"""Command-line front end: caustic, portrait, diagram, slices, validate.

Exit codes: 0 success, 2 config or input error, 3 on-caustic portrait query,
4 diagram validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bifurcation import (BifurcationDiagram, BifurcationOptions, ExclusionError,
                          assemble_diagram, validate_diagram)
from .caustic import CausticCurve, classify_caustic, critical_locus, pyramid_slices
from .config import ConfigError, RunConfig, parse_config
from .field import GeneratingFunction, parse_poly
from .flow import FlowOptions, portrait
from .geometry import Window
from .jsonio import (caustic_document, diagram_document, dumps_canonical,
                     portrait_document, write_atomic)
from .svg import render_caustic, render_diagram, render_portrait

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ON_CAUSTIC = 3
EXIT_VALIDATION = 4


def _load_config(args) -> RunConfig:
    if args.config:
        with open(args.config) as fh:
            return parse_config(fh.read())
    return parse_config("")


def _flow_options(cfg: RunConfig) -> FlowOptions:
    return FlowOptions(
        tol_root=cfg.get("tolerances", "tol_root"),
        tol_degenerate=cfg.get("tolerances", "tol_degenerate"),
        tol_capture=cfg.get("tolerances", "tol_capture"),
        tol_align_deg=cfg.get("tolerances", "tol_align_deg"),
    )


def _bif_options(cfg: RunConfig, seed: int, workers: int) -> BifurcationOptions:
    return BifurcationOptions(
        tol_psi=cfg.get("tolerances", "tol_psi"),
        caustic_standoff=cfg.get("tolerances", "caustic_standoff"),
        grid=cfg.get("diagram", "grid"),
        jitter=cfg.get("diagram", "jitter"),
        seed=seed,
        flow=_flow_options(cfg),
    )


def _function_manifest(f: GeneratingFunction) -> dict:
    return {"label": f.label, "poly": str(f.poly)}


def _write_manifest(out_dir, command, cfg: RunConfig, args):
    manifest = {
        "tool": "causticflow",
        "version": __version__,
        "command": command,
        "seed": args.seed,
        "workers": args.workers,
        "config": cfg.resolved(),
    }
    write_atomic(os.path.join(out_dir, "manifest.json"), dumps_canonical(manifest))


def cmd_caustic(args) -> int:
    cfg = _load_config(args)
    f = cfg.function()
    w = cfg.fiber_window()
    locus = critical_locus(f, w, cfg.get("tolerances", "tol_locus"))
    curve = classify_caustic(f, locus)
    doc = caustic_document(curve, locus, _function_manifest(f))
    write_atomic(os.path.join(args.out, "caustic.json"), dumps_canonical(doc))
    write_atomic(os.path.join(args.out, "caustic.svg"), render_caustic(curve))
    _write_manifest(args.out, "caustic", cfg, args)
    return EXIT_OK


def cmd_portrait(args) -> int:
    cfg = _load_config(args)
    f = cfg.function()
    x = cfg.get("portrait", "x")
    if x is None:
        raise ConfigError("portrait requires [portrait] x = <x1 x2>")
    w = cfg.fiber_window()
    p = portrait(f, x, w, _flow_options(cfg), record=True)
    doc = portrait_document(p, _function_manifest(f))
    write_atomic(os.path.join(args.out, "portrait.json"), dumps_canonical(doc))
    write_atomic(os.path.join(args.out, "portrait.svg"), render_portrait(p, w))
    write_atomic(os.path.join(args.out, "trajectories.csv"), _trajectories_csv(p))
    _write_manifest(args.out, "portrait", cfg, args)
    if p.on_caustic:
        print("portrait: base point is on or near the caustic", file=sys.stderr)
        return EXIT_ON_CAUSTIC
    return EXIT_OK


def _trajectories_csv(p) -> str:
    lines = ["saddle,branch,step,y1,y2"]
    for s in p.separatrices:
        for k, (y1, y2) in enumerate(s.trajectory):
            lines.append(f"{s.saddle_id},{s.branch},{k},{y1:.12e},{y2:.12e}")
    return "\n".join(lines) + "\n"


def _report_text(diagram: BifurcationDiagram) -> str:
    lines = [f"validation report for {diagram.label}"]
    for c in diagram.report:
        lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.details}")
        for wtn in c.witnesses:
            lines.append(f"    witness: {wtn}")
    if diagram.unresolved_edges:
        lines.append(f"note: {len(diagram.unresolved_edges)} unresolved region "
                     "boundaries; rerun with a finer grid to resolve them")
    lines.append("all checks passed" if diagram.all_checks_passed
                 else "validation FAILED")
    return "\n".join(lines) + "\n"


def cmd_diagram(args) -> int:
    cfg = _load_config(args)
    f = cfg.function()
    bw = cfg.base_window()
    fw = cfg.fiber_window(auto_from=bw)
    opts = _bif_options(cfg, args.seed, args.workers)
    d = assemble_diagram(f, bw, opts, fiber_window=fw)
    doc = diagram_document(d, _function_manifest(f))
    write_atomic(os.path.join(args.out, "diagram.json"), dumps_canonical(doc))
    write_atomic(os.path.join(args.out, "diagram.svg"), render_diagram(d))
    write_atomic(os.path.join(args.out, "report.txt"), _report_text(d))
    _write_manifest(args.out, "diagram", cfg, args)
    if not d.all_checks_passed:
        print("diagram: validation failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_slices(args) -> int:
    cfg = _load_config(args)
    t_values = cfg.get("slices", "t_values")
    res = cfg.get("slices", "resolution")
    curves = pyramid_slices(t_values, res)
    for t, curve in zip(t_values, curves):
        tag = f"{t:+.6g}".replace("+", "p").replace("-", "m").replace(".", "_")
        doc = caustic_document(curve)
        doc["t"] = t
        write_atomic(os.path.join(args.out, f"slice_{tag}.json"), dumps_canonical(doc))
        write_atomic(os.path.join(args.out, f"slice_{tag}.svg"), render_caustic(curve))
    summary = {"t_values": list(t_values),
               "cusp_counts": [len(c.cusp_points) for c in curves],
               "degenerate_counts": [len(c.non_morse_points) for c in curves]}
    write_atomic(os.path.join(args.out, "slices.json"), dumps_canonical(summary))
    _write_manifest(args.out, "slices", cfg, args)
    return EXIT_OK


def _diagram_from_document(doc) -> BifurcationDiagram:
    from .bifurcation import BifurcationCurve, RegionInfo

    def arr(v):
        return np.asarray(v, dtype=float)

    caustic = CausticCurve(
        components=[arr(c) for c in doc["caustic"]["components"]],
        closed=list(doc["caustic"]["closed"]),
        labels=doc["caustic"].get("labels"),
        cusp_points=arr(doc["caustic"]["cusps"]).reshape(-1, 2),
        non_morse_points=arr(doc["caustic"]["degenerate_points"]).reshape(-1, 2),
    )
    strata = [
        BifurcationCurve(
            pair=tuple(s["pair"]),
            points=arr(s["points"]).reshape(-1, 2),
            psi_residuals=arr(s["psi_residuals"]),
            endpoints=tuple(s["endpoints"]),
            branch_selection=tuple(s["branch_selection"]) if s.get("branch_selection") else None,
            seed_point=arr(s["seed_point"]) if s.get("seed_point") is not None else None,
            pair_positions=arr(s["pair_positions"]).reshape(-1, 2)
            if s.get("pair_positions") is not None else None,
            engaged_dirs=arr(s["engaged_dirs"]).reshape(-1, 2)
            if s.get("engaged_dirs") is not None else None,
        )
        for s in doc["strata"]
    ]
    codim2 = [(arr(c["point"]), tuple(c["pairs"][0]), tuple(c["pairs"][1]))
              for c in doc["codim2_points"]]
    regions = [RegionInfo(id=r["id"], sample_x=arr(r["sample"]), signature=r["signature"],
                          sample_count=r["sample_count"],
                          signature_consistent=r["signature_consistent"])
               for r in doc["regions"]]
    bwd = doc["base_window"]
    fwd = doc["fiber_window"]
    return BifurcationDiagram(
        label=doc["label"],
        base_window=Window(tuple(bwd["center"]), tuple(bwd["half_widths"]), (64, 64)),
        fiber_window=Window(tuple(fwd["center"]), tuple(fwd["half_widths"]),
                            tuple(fwd["resolution"])),
        caustic=caustic, strata=strata, codim2_points=codim2, regions=regions,
        unresolved_edges=doc.get("unresolved_edges", []),
        meta=doc.get("meta", {}),
    )


def cmd_validate(args) -> int:
    import json
    with open(args.diagram) as fh:
        doc = json.load(fh)
    d = _diagram_from_document(doc)
    f = None
    if "function" in doc and doc["function"] and doc["function"].get("poly"):
        f = GeneratingFunction(parse_poly(doc["function"]["poly"]),
                               doc["function"].get("label", "custom"))
    d.report = validate_diagram(d, f=f)
    text = _report_text(d)
    sys.stdout.write(text)
    if args.out:
        write_atomic(os.path.join(args.out, "report.txt"), text)
    return EXIT_OK if d.all_checks_passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causticflow",
                                 description="Caustics and gradient-line bifurcation "
                                             "diagrams of planar Lagrangian maps")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("caustic", cmd_caustic), ("portrait", cmd_portrait),
                     ("diagram", cmd_diagram), ("slices", cmd_slices)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="run configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(fn=fn)
    pv = sub.add_parser("validate")
    pv.add_argument("diagram", help="path to an existing diagram.json")
    pv.add_argument("--out", default=None)
    pv.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ExclusionError as e:
        print(f"exclusion violation: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
