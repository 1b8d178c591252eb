"""Command-line front end: ``mra-grant-sim <command> [options]``.

Commands
  optimize  design parameters for one Ka (JSON result + text table)
  analyze   closed-form error budget of a design
  simulate  Monte Carlo per-user error rate of a design
  sweep     CSV of Eb/N0 against Ka
  table     text table of designs

Exit status: 0 on success, 1 when a design is infeasible or a numeric
routine fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import error_model, fbl, optimizer, sim
from .catalog import NotInCatalog
from .op_phase import Scheme
from .params import REFERENCE_TABLE, SchemeParams, SessionConfig, reference_design

CSV_TAG = "# mra-grant-sim v1"
DEFAULT_SEED = 1
SWEEP_KA = tuple(REFERENCE_TABLE)


class UsageError(Exception):
    pass


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _session_config(args, base: dict | None = None) -> SessionConfig:
    cfg = dict(base or {})
    for key, val in (("Ka", args.ka), ("k", args.k), ("N", args.N), ("eps_target", args.eps)):
        if val is not None:
            cfg[key] = val
    if "Ka" not in cfg:
        raise UsageError("Ka is required (--ka or config)")
    try:
        return SessionConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad session config: {exc}") from None


def _flags(args, params: SchemeParams) -> SchemeParams:
    import dataclasses

    return dataclasses.replace(
        params,
        icr=params.icr and not args.no_icr,
        omt=params.omt and not args.no_omt,
    )


def _design_from(args) -> tuple[SchemeParams | Scheme, SessionConfig]:
    """Design from --config (design result, scheme or params document) or the reference table."""
    doc = _load_json(args.config)
    if doc:
        config = _session_config(args, doc.get("config"))
        try:
            if "inner_generator" in doc:
                scheme = Scheme.from_dict(doc)
                return Scheme(_flags(args, scheme.params), scheme.inner, scheme.aux, scheme.seed), config
            params = SchemeParams.from_dict(doc["params"] if "params" in doc else doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad design document: {exc}") from None
        return _flags(args, params), config
    config = _session_config(args)
    if config.Ka not in REFERENCE_TABLE:
        raise UsageError(f"no reference design for Ka={config.Ka}; pass --config")
    return _flags(args, reference_design(config.Ka)), config


def cmd_optimize(args) -> int:
    doc = _load_json(args.config)
    cfg = _session_config(args, doc.get("config") or {k: doc[k] for k in ("Ka", "k", "N", "eps_target") if k in doc})
    extra = {k: doc[k] for k in ("k_p_max", "n_p_max", "n_c1_min") if k in doc}
    problem = optimizer.DesignProblem(
        cfg, icr=doc.get("icr", True) and not args.no_icr, omt=doc.get("omt", True) and not args.no_omt, **extra
    )
    progress = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    result = optimizer.design(problem, progress=progress)
    out = result.to_dict()
    out["problem"] = problem.to_dict()
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    print(optimizer.format_table([result]), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_analyze(args) -> int:
    design, config = _design_from(args)
    params = design.params if isinstance(design, Scheme) else design
    b = error_model.budget(params, config)
    out = {
        "params": params.to_dict(),
        "config": config.to_dict(),
        "budget": b.to_dict(),
        "eb_n0_db": optimizer.eb_n0(params.P1, config.N, config.k),
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def _scheme(design, seed: int) -> Scheme:
    return design if isinstance(design, Scheme) else Scheme.build(design, seed)


def _sim_options(args) -> sim.SimOptions:
    return sim.SimOptions(feedback_model=args.feedback_model, error_policy=args.error_policy)


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    design, config = _design_from(args)
    scheme = _scheme(design, args.seed)
    report = sim.estimate_pupe(
        scheme, config, args.trials, args.seed, _sim_options(args), progress=args.verbose
    )
    out = report.to_dict()
    out["seed"] = args.seed
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    ka_values = [args.ka] if args.ka is not None else list(SWEEP_KA)
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be positive")
    simulate = not args.analytic_only
    trials = args.trials or 1000
    terms = ("eps1", "eps2", "eps3", "eps4", "eps_f", "eps_f2", "total")
    header = ["Ka", "k_p", "n_p", "d", "n_c1", "n_c2", "V", "N_f", "P", "EbN0_dB", *terms]
    if simulate:
        header += ["pupe", "ci95", "trials"]
    buf = io.StringIO()
    run = {
        "source": "optimize" if args.optimize else "reference",
        "seed": args.seed,
        "icr": not args.no_icr,
        "omt": not args.no_omt,
        "feedback_model": args.feedback_model,
        "trials": trials if simulate else 0,
    }
    buf.write(CSV_TAG + "\n")
    buf.write("# run " + json.dumps(run, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for Ka in ka_values:
        cfg = SessionConfig(Ka, **{k: v for k, v in (("k", args.k), ("N", args.N), ("eps_target", args.eps)) if v is not None})
        if args.optimize:
            problem = optimizer.DesignProblem(cfg, icr=not args.no_icr, omt=not args.no_omt)
            params = optimizer.design(problem).params
        else:
            if Ka not in REFERENCE_TABLE:
                raise UsageError(f"no reference design for Ka={Ka}; use --optimize")
            params = _flags(args, reference_design(Ka))
        b = error_model.budget(params, cfg)
        row = [Ka, params.k_p, params.n_p, params.d, int(params.n_c1), int(params.n_c2), int(params.V),
               int(params.N_f), f"{params.P1:.6g}", f"{optimizer.eb_n0(params.P1, cfg.N, cfg.k):.4f}"]
        row += [f"{getattr(b, t):.6g}" for t in terms]
        if simulate:
            rep = sim.estimate_pupe(Scheme.build(params, args.seed), cfg, trials, args.seed, _sim_options(args))
            row += [f"{rep.pupe:.6g}", f"{rep.ci95:.3g}", trials]
        writer.writerow(row)
        if args.verbose:
            print(f"Ka={Ka} done", file=sys.stderr)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_table(args) -> int:
    doc = _load_json(args.config)
    results = []
    if doc:
        entries = doc.get("designs", [doc])
        for e in entries:
            try:
                params = SchemeParams.from_dict(e["params"])
                cfg = SessionConfig(**e["config"])
            except (KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"bad design entry: {exc}") from None
            results.append(_as_result(params, cfg))
    else:
        kas = [args.ka] if args.ka is not None else list(SWEEP_KA)
        for Ka in kas:
            if Ka not in REFERENCE_TABLE:
                raise UsageError(f"no reference design for Ka={Ka}")
            results.append(_as_result(reference_design(Ka), SessionConfig(Ka)))
    _emit(optimizer.format_table(results) + "\n", args.out)
    return 0


def _as_result(params: SchemeParams, cfg: SessionConfig) -> optimizer.DesignResult:
    P = params.P1
    return optimizer.DesignResult(
        params, P, optimizer.eb_n0(P, cfg.N, cfg.k), P, error_model.budget(params, cfg), cfg
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mra-grant-sim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON input document")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--ka", type=int, help="number of active users")
        p.add_argument("--k", type=int, help="payload bits (default 100)")
        p.add_argument("--N", type=int, help="channel uses per session (default 30000)")
        p.add_argument("--eps", type=float, help="target per-user error (default 0.05)")
        p.add_argument("--no-icr", action="store_true", help="disable index collision resolution")
        p.add_argument("--no-omt", action="store_true", help="disable opportunistic message transmission")
        p.add_argument("--feedback-model", choices=sim.FEEDBACK_MODELS, default="pessimistic")
        p.add_argument("--error-policy", choices=("empty", "exclude"), default="empty",
                       help="how failed user-count hypotheses enter the residual test")
        p.add_argument("-v", "--verbose", action="store_true")

    for name, fn, helptext in (
        ("optimize", cmd_optimize, "design parameters"),
        ("analyze", cmd_analyze, "closed-form error budget"),
        ("simulate", cmd_simulate, "Monte Carlo simulation"),
        ("sweep", cmd_sweep, "Eb/N0 versus Ka as CSV"),
        ("table", cmd_table, "text table of designs"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.set_defaults(func=fn)
        if name == "simulate":
            p.add_argument("--trials", type=int, default=1000, help="sessions to simulate")
        if name == "sweep":
            p.add_argument("--trials", type=int, help="sessions per Ka (default 1000)")
            p.add_argument("--analytic-only", action="store_true", help="skip simulation columns")
            p.add_argument("--optimize", action="store_true", help="optimize each Ka instead of using reference designs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (optimizer.Infeasible, fbl.NumericError, NotInCatalog) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
