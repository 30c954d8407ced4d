"""Command-line entry point: ``nsaudit``.

Exit status is 0 whenever the requested claims produced verdicts (a FAILS
verdict is a successful audit) and non-zero on execution errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from . import __version__
from .claims_audit import (
    DEFAULT_SEEDS,
    audit_decay,
    audit_energy_identity,
    audit_eq12_consistency,
    audit_poiseuille,
    audit_theorem1,
    audit_vector_line,
    render_report,
    sink_tubes,
    taylor_green_series,
)
from .config import load_config
from .density_structure import DensityStructure, extract_density_structure, write_tubes_csv
from .errors import AuditError
from .fields import read_field
from .parametric_solution import (
    RegimeThresholds,
    classify_regime,
    params_from_config,
    split_velocity,
    thresholds_from_config,
)
from .reference_solver import SolverConfig, config_from, initial_state, run, taylor_green_state

log = logging.getLogger("nsaudit")

CLAIMS = ("theorem1", "vector-line", "poiseuille", "decay", "eq12")


def _settings(args) -> tuple:
    text = Path(args.config).read_text() if args.config else ""
    cfg = load_config(args.config) if args.config else {}
    return cfg, text


def _thresholds(cfg, args) -> RegimeThresholds:
    th = thresholds_from_config(cfg)
    return RegimeThresholds(
        args.threshold_rho_L if args.threshold_rho_L is not None else th.rho_L,
        args.threshold_rho_S if args.threshold_rho_S is not None else th.rho_S,
    )


def _run_claim(name: str, cfg: dict, args) -> list:
    audit = cfg.get("audit", {})
    refinements = args.refinements or audit.get("refinements")
    grid = args.grid or audit.get("grid")
    if name == "theorem1":
        nodes = (grid or 16) + 1
        return [
            audit_theorem1(nodes=nodes, refinements=refinements or 3),
            audit_theorem1(lambda x, y: (y, 0 * x, 0 * x), nodes=nodes, refinements=refinements or 3,
                           label="u=(y,0,0)", claim_id="theorem1-shear"),
        ]
    if name == "vector-line":
        n = grid or 32
        series = [taylor_green_series(n * 2**k) for k in range(refinements or 3)]
        return [audit_vector_line(series, label="Taylor-Green, nu=0.1")]
    if name == "poiseuille":
        sc = dict(cfg.get("solver", {}))
        if sc.get("case", "channel") != "channel":
            sc = {}
        sc["case"] = "channel"
        conf, _, _ = config_from({"solver": sc})
        return [audit_poiseuille(conf)]
    if name == "decay":
        sc = dict(cfg.get("solver", {}))
        if sc.get("case", "taylor-green") != "taylor-green":
            sc = {}
        sc["case"] = "taylor-green"
        sc.setdefault("n", grid or 32)
        conf, _, _ = config_from({"solver": sc})
        p = params_from_config(cfg) if "omega0" in cfg.get("solution", {}) else None
        threshold = args.threshold_stop if args.threshold_stop is not None else audit.get("stop_threshold", 1e-6)
        t0 = args.t0 if args.t0 is not None else audit.get("t0")
        return [audit_decay(conf, p, stop_threshold=threshold, t0=t0, k_gh=audit.get("k_gh", 0.0),
                            refinements=refinements or 2, amplitude=sc.get("amplitude", 1.0))]
    if name == "eq12":
        n = grid or 128
        seeds = audit.get("seeds", DEFAULT_SEEDS)
        flux = audit.get("flux", 0.05)
        p = params_from_config(cfg) if "omega0" in cfg.get("solution", {}) else None
        return [
            audit_eq12_consistency(
                sink_tubes(n, seeds, flux), p, thresholds=_thresholds(cfg, args),
                tubes_refined=sink_tubes(2 * n, seeds, flux) if (refinements or 1) > 1 else None,
                label=f"converging sink flow, {n}x{n}",
            )
        ]
    raise AuditError(f"unknown claim {name!r}")


def cmd_audit(args) -> int:
    cfg, text = _settings(args)
    names = CLAIMS if args.claim == "all" else (args.claim,)
    results = []
    for name in names:
        log.info("auditing %s", name)
        results.extend(_run_claim(name, cfg, args))
    if args.claim == "all":
        results.append(audit_energy_identity())
    path = render_report(results, args.out, text)
    for r in results:
        print(f"{r.claim_id:<16} {r.verdict.value}")
    print(f"report: {path}")
    return 0


def cmd_simulate(args) -> int:
    cfg, _ = _settings(args)
    conf, case, extra = config_from(cfg)
    if args.grid and case == "taylor-green":
        conf = SolverConfig.periodic(args.grid, conf.nu, conf.dt, conf.rho)
    t_end = args.t_end or extra.get("t_end", 1.0)
    state = taylor_green_state(conf, extra.get("amplitude", 1.0)) if case == "taylor-green" else initial_state(conf)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run(conf, t_end, probes=extra.get("probes", ()), state=state,
              snapshot_dir=out / "snapshots", snapshot_every=extra.get("snapshot_every", 0))
    res.write_csv(out / "series.csv")
    print(f"{case}: {res.state.step} steps to t={res.state.t:.6g}, energy {res.energy[0]:.6g} -> {res.energy[-1]:.6g}")
    return 0


def _parse_points(text: str):
    return [tuple(float(c) for c in p.split(",")) for p in text.split(";") if p.strip()]


def cmd_tube_extract(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = _parse_points(args.seeds) if args.seeds else DEFAULT_SEEDS
    if args.field:
        v = read_field(args.field)
        P = read_field(args.pressure) if args.pressure else None
        tubes = extract_density_structure(v, args.rho, seeds, args.flux, pressure=P)
    else:
        tubes = sink_tubes(args.grid or 128, seeds, args.flux)
    write_tubes_csv(tubes, out / "tubes.csv")
    for i, t in enumerate(tubes):
        print(f"tube {i}: {t.n_stations} stations, stop: {t.reason}")
    return 0


def cmd_eval(args) -> int:
    cfg, _ = _settings(args)
    p = params_from_config(cfg)
    rho_L = [float(x) for x in args.rho_L.split(",")]
    ds = DensityStructure(rho_L, args.rho_S, args.rho)
    th = _thresholds(cfg, args)
    verdict = classify_regime(ds, th)
    doc = {"regime": verdict.regime.value}
    if verdict.laminar:
        u_L, u_0 = split_velocity(p, ds, th)
        doc.update(u=list(map(float, u_L + u_0)), u_L=list(map(float, u_L)), u_0=list(map(float, u_0)))
    else:
        doc.update(quantity=verdict.quantity, value=verdict.value)
    print(json.dumps(doc, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsaudit", description="Numerical audit of closed-form flow claims.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="key-value configuration file")
        p.add_argument("--grid", type=int, help="base grid resolution")
        p.add_argument("--out", default=out_default, help="output directory")

    def thresholds(p):
        p.add_argument("--threshold-rho-L", dest="threshold_rho_L", type=float)
        p.add_argument("--threshold-rho-S", dest="threshold_rho_S", type=float)

    a = sub.add_parser("audit", help="run claim audits and write a report")
    a.add_argument("claim", choices=("all",) + CLAIMS)
    common(a, "audit-report")
    a.add_argument("--refinements", type=int, help="number of grid levels")
    a.add_argument("--threshold-stop", dest="threshold_stop", type=float, help="stop threshold for the decay claim")
    a.add_argument("--t0", type=float, help="override the computed stop time")
    thresholds(a)
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("simulate", help="run the reference solver")
    common(s, "simulation")
    s.add_argument("--t-end", dest="t_end", type=float)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tube-extract", help="extract stream tubes and density structures")
    common(t, "tubes")
    t.add_argument("--field", help="velocity field file (default: analytic sink flow)")
    t.add_argument("--pressure", help="pressure field file")
    t.add_argument("--seeds", help="seed points 'x,y;x,y'")
    t.add_argument("--flux", type=float, default=0.05)
    t.add_argument("--rho", type=float, default=1.0)
    t.set_defaults(func=cmd_tube_extract)

    e = sub.add_parser("eval-eq12", help="evaluate the parametric velocity formula")
    e.add_argument("--config", required=True)
    e.add_argument("--rho-L", dest="rho_L", required=True, help="linear density vector 'a,b,c' (kg/m)")
    e.add_argument("--rho-S", dest="rho_S", type=float, required=True, help="surface density (kg/m^2)")
    e.add_argument("--rho", type=float, default=1.0)
    thresholds(e)
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (AuditError, OSError) as exc:
        print(f"nsaudit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
