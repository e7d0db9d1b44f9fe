"""Command line interface.

Subcommands: table, contour, line, did, semiparam, simulate, verify.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
degeneracy. The PLM_SEED environment variable overrides the configured
bootstrap seed for table/contour/line runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .adjust import ROLES
from .did import DIDAssumption, GroupMeans, att, dim, m_to_w, \
    parallel_trends_gap
from .engine import run_contour, run_line, run_table
from .errors import ConfigError, DataError, NumericError, PlmError
from .io import RunConfig, emit_outputs, load_csv, parse_run_config, \
    write_dataset_csv
from .selfcheck import run_selfcheck
from .semiparam import SemiparamInputs, adjust_partially_linear
from .simulate import GRAPH_EDGES, SCMRecipe, simulate_scm

# Flags that define the analysis itself; they clash with --config, which
# owns the same information.
_CONFIG_OWNED = (
    ("data", "--data"),
    ("outcome", "--outcome"),
    ("treatment", "--treatment"),
    ("placebo", "--placebo"),
    ("role", "--role"),
    ("covariates", "--covariates"),
    ("edge_d_to_p", "--edge-d-to-p"),
    ("edge_p_to_y", "--edge-p-to-y"),
    ("edge_p_to_d", "--edge-p-to-d"),
    ("edge_y_to_p", "--edge-y-to-p"),
    ("k", "--k"),
    ("direct", "--direct"),
    ("grid", "--grid"),
    ("reps", "--reps"),
    ("seed", "--seed"),
    ("ci_level", "--ci-level"),
    ("out", "--out"),
    ("svg", "--svg"),
)


def _env_seed() -> int | None:
    raw = os.environ.get("PLM_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(
            f"PLM_SEED must be an integer, got {raw!r}"
        ) from None


def _analysis_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    data = parent.add_argument_group("analysis (use --config or flags)")
    data.add_argument("--config", metavar="PATH",
                      help="JSON run config; excludes the flags below")
    data.add_argument("--data", metavar="PATH", help="input CSV")
    data.add_argument("--outcome", metavar="COL")
    data.add_argument("--treatment", metavar="COL")
    data.add_argument("--placebo", metavar="COL")
    data.add_argument("--role", choices=ROLES)
    data.add_argument("--covariates", metavar="COL,COL",
                      help="comma separated covariate columns")
    data.add_argument("--edge-d-to-p", action="store_true", default=False,
                      help="treatment affects the placebo")
    data.add_argument("--edge-p-to-y", action="store_true", default=False,
                      help="placebo affects the outcome")
    data.add_argument("--edge-p-to-d", action="store_true", default=False,
                      help="placebo affects the treatment "
                           "(observed_confounder_2 only)")
    data.add_argument("--edge-y-to-p", action="store_true", default=False,
                      help="outcome affects the placebo (post_outcome only)")
    data.add_argument("--k", nargs=2, type=float, metavar=("MIN", "MAX"))
    data.add_argument("--direct", nargs=2, type=float,
                      metavar=("MIN", "MAX"))
    data.add_argument("--grid", type=int)
    data.add_argument("--reps", type=int, help="bootstrap replicates")
    data.add_argument("--seed", type=int)
    data.add_argument("--ci-level", type=float)
    data.add_argument("--out", metavar="PATH", help="output file")
    data.add_argument("--svg", metavar="PATH", help="also render an SVG")
    run = parent.add_argument_group("execution")
    run.add_argument("--workers", type=int, default=1,
                     help="bootstrap worker threads (results are "
                          "identical at any count)")
    run.add_argument("--freeze-sf", action="store_true", default=False,
                     help="hold the scale factor at its full-sample value "
                          "inside the bootstrap")
    run.add_argument("--cluster", metavar="COL",
                     help="cluster bootstrap on this column")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plm",
        description="Sensitivity analysis for linear treatment effects "
                    "using imperfect placebos.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _analysis_parent()

    p_table = sub.add_parser(
        "table", parents=[parent],
        help="benchmark rows plus a grid of adjusted estimates",
    )
    p_table.set_defaults(func=lambda args: _run_analysis("table", args))

    p_contour = sub.add_parser(
        "contour", parents=[parent],
        help="estimate surface over the (k, direct) rectangle",
    )
    p_contour.set_defaults(func=lambda args: _run_analysis("contour", args))

    p_line = sub.add_parser(
        "line", parents=[parent],
        help="one-dimensional slices with bootstrap bands",
    )
    p_line.add_argument("--vary", choices=("k", "direct"), default="k")
    p_line.add_argument("--at", nargs="+", type=float, metavar="FRACTION",
                        help="fixed-axis positions as range fractions")
    p_line.set_defaults(func=lambda args: _run_analysis("line", args))

    p_did = sub.add_parser(
        "did", help="difference-in-differences with a pre-period outcome",
    )
    p_did.add_argument("--data", required=True, metavar="PATH")
    p_did.add_argument("--outcome", required=True, metavar="COL")
    p_did.add_argument("--placebo", required=True, metavar="COL",
                       help="pre-period outcome column")
    p_did.add_argument("--group", required=True, metavar="COL",
                       help="0/1 treatment group column")
    p_did.add_argument("--att-n", type=float, default=0.0,
                       help="assumed treatment effect on the pre-period "
                            "outcome")
    p_did.add_argument("--out", metavar="PATH",
                       help="write JSON here instead of stdout")
    p_did.set_defaults(func=_run_did)

    p_semi = sub.add_parser(
        "semiparam",
        help="adjust a flexible-model estimate from summary statistics",
    )
    p_semi.add_argument("--theta-s-y", type=float, required=True,
                        help="short-model effect on the outcome")
    p_semi.add_argument("--theta-s-n", type=float, required=True,
                        help="short-model effect on the placebo")
    p_semi.add_argument("--theta-l-n", type=float, default=0.0,
                        help="assumed true effect on the placebo")
    p_semi.add_argument("--k", type=float, required=True)
    p_semi.add_argument("--gamma", type=float, default=1.0)
    p_semi.add_argument("--s2-y", type=float, default=1.0)
    p_semi.add_argument("--s2-n", type=float, default=1.0)
    p_semi.add_argument("--sign-m", type=int, choices=(-1, 1), default=1)
    p_semi.add_argument("--out", metavar="PATH")
    p_semi.set_defaults(func=_run_semiparam)

    p_sim = sub.add_parser(
        "simulate", help="draw a synthetic dataset from a linear SCM",
    )
    p_sim.add_argument("--case", required=True,
                       choices=sorted(GRAPH_EDGES))
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--z-dim", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--coef", action="append", default=[],
                       metavar="EDGE=VALUE",
                       help="e.g. --coef 'z->y=0.5' or 'z->y=0.5,0.2'; "
                            "repeatable")
    p_sim.add_argument("--noise-sd", action="append", default=[],
                       metavar="NODE=VALUE",
                       help="e.g. --noise-sd y=0.8; repeatable")
    p_sim.add_argument("--out", required=True, metavar="PATH")
    p_sim.set_defaults(func=_run_simulate)

    p_verify = sub.add_parser(
        "verify", help="run randomized internal consistency checks",
    )
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--draws", type=int, default=25)
    p_verify.set_defaults(func=_run_verify)

    return parser


def _given_config_owned(args) -> list[str]:
    given = []
    for dest, flag in _CONFIG_OWNED:
        value = getattr(args, dest)
        if value not in (None, False):
            given.append(flag)
    return given


def _run_config_from_flags(kind: str, args) -> RunConfig:
    required = [("data", "--data"), ("outcome", "--outcome"),
                ("treatment", "--treatment"), ("placebo", "--placebo"),
                ("role", "--role"), ("out", "--out")]
    missing = [flag for dest, flag in required if getattr(args, dest) is None]
    if missing:
        raise ConfigError(
            f"missing {', '.join(missing)} (or use --config)"
        )
    covariates = []
    if args.covariates:
        covariates = [c.strip() for c in args.covariates.split(",")
                      if c.strip()]
    edges = {}
    for key, flag in (("d_to_p", args.edge_d_to_p),
                      ("p_to_y", args.edge_p_to_y),
                      ("p_to_d", args.edge_p_to_d),
                      ("y_to_p", args.edge_y_to_p)):
        if flag:
            edges[key] = True
    outputs = {kind: args.out}
    if args.svg:
        outputs["svg"] = args.svg
    return RunConfig(
        data_path=args.data,
        outcome=args.outcome,
        treatment=args.treatment,
        placebo=args.placebo,
        role=args.role,
        edges=edges,
        covariates=covariates,
        k=tuple(args.k) if args.k else (-2.0, 2.0),
        direct=tuple(args.direct) if args.direct else (0.0, 0.0),
        grid=args.grid,
        bootstrap={"reps": args.reps if args.reps is not None else 1000,
                   "seed": args.seed if args.seed is not None else 0},
        ci_level=args.ci_level if args.ci_level is not None else 0.95,
        outputs=outputs,
    )


def _run_analysis(kind: str, args) -> int:
    if args.config is not None:
        clashing = _given_config_owned(args)
        if clashing:
            raise ConfigError(
                f"--config cannot be combined with {', '.join(clashing)}"
            )
        cfg = parse_run_config(args.config)
        if kind not in cfg.outputs:
            raise ConfigError(f"config does not set outputs.{kind}")
    else:
        cfg = _run_config_from_flags(kind, args)
    engine_cfg = cfg.analysis_config(
        workers=args.workers,
        freeze_sf=args.freeze_sf,
        cluster_col=args.cluster,
        seed=_env_seed(),
    )
    data = load_csv(cfg.data_path)
    results = {}
    if kind == "table":
        results["table"] = run_table(data, engine_cfg)
    elif kind == "contour":
        results["contour"] = run_contour(data, engine_cfg)
    else:
        fixed = tuple(args.at) if args.at else (0.5,)
        results["line"] = run_line(data, engine_cfg, varying=args.vary,
                                   fixed_percentiles=fixed)
    for path in emit_outputs(results, cfg):
        print(path)
    return 0


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")
        print(out)


def _run_did(args) -> int:
    data = load_csv(args.data)
    means = GroupMeans.from_data(data, outcome=args.outcome,
                                 placebo=args.placebo, group=args.group)
    payload = dim(means)
    payload["att_at_m"] = {
        f"{m:g}": att(means, DIDAssumption(m=m, att_n=args.att_n))
        for m in (0.0, 0.5, 1.0, 1.5)
    }
    payload["trends"] = parallel_trends_gap(means)
    payload["w_for_m_1"] = m_to_w(1.0, means, att_n=args.att_n)
    _emit_json(payload, args.out)
    return 0


def _run_semiparam(args) -> int:
    inputs = SemiparamInputs(
        theta_s_y=args.theta_s_y,
        theta_s_n=args.theta_s_n,
        theta_l_n=args.theta_l_n,
        k=args.k,
        gamma=args.gamma,
        s2_y=args.s2_y,
        s2_n=args.s2_n,
        sign_m=args.sign_m,
    )
    _emit_json({"estimate": adjust_partially_linear(inputs)}, args.out)
    return 0


def _parse_pairs(items, what: str) -> dict:
    parsed = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{what} must look like NAME=VALUE: {item!r}")
        try:
            if "," in value:
                parsed[key] = tuple(float(v) for v in value.split(","))
            else:
                parsed[key] = float(value)
        except ValueError:
            raise ConfigError(
                f"{what} value is not numeric: {item!r}"
            ) from None
    return parsed


def _run_simulate(args) -> int:
    noise = _parse_pairs(args.noise_sd, "--noise-sd")
    env_seed = _env_seed()
    recipe = SCMRecipe(
        n=args.n,
        graph_case=args.case,
        coefficients=_parse_pairs(args.coef, "--coef"),
        z_dim=args.z_dim,
        noise_sd=noise if noise else 1.0,
        seed=args.seed if env_seed is None else env_seed,
    )
    print(write_dataset_csv(simulate_scm(recipe), args.out))
    return 0


def _run_verify(args) -> int:
    report = run_selfcheck(seed=args.seed, draws=args.draws)
    print(f"draws per case: {report.draws}")
    print(f"single-placebo recovery, max abs error: "
          f"{report.max_recovery_error:.3e}")
    print(f"double-placebo recovery, max abs error: "
          f"{report.max_double_error:.3e}")
    print(f"bias factorization, max abs residual: "
          f"{report.max_identity_residual:.3e}")
    if report.ok:
        print("all checks passed (tolerance 1e-8)")
        return 0
    print("CHECKS FAILED", file=sys.stderr)
    return 4


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 for --help, matching the
        # exit code contract.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"plm: configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"plm: data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"plm: numeric degeneracy: {exc}", file=sys.stderr)
        return 4
    except PlmError as exc:
        print(f"plm: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
