"""Command-line entry point.

Subcommands: estimate, csg, fit, simulate, verify-variance, reproduce.
Exit codes: 0 success, 1 numeric failure, 2 usage/input error. Output is
human-readable by default; --format structured switches to JSON. The
--threads default is the TEMPDET_THREADS environment variable when set,
otherwise the available core count; results never depend on the thread
count, only wall time does.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .coefficients import (
    COEFFICIENT_VARIANTS,
    VARIANTS,
    TaskDescriptor,
    TemperatureCoefficients,
    coefficients_from_document,
    coefficients_to_document,
    default_coefficients,
    estimate_temperature,
    estimate_temperature_detail,
    load_coefficients,
)
from .csg import (
    CsgConfig,
    compute_csg,
    csg_result_to_document,
    load_labeled_features,
)
from .errors import InputError, NumericError
from .fitting import (
    DifferentialEvolutionSettings,
    FitSpec,
    fit,
    read_grid_file,
)
from .losses import loss_response_curve, max_prob_simulation
from .tables import Table
from .variance import (
    DistributionSpec,
    LinearHeadScenario,
    mc_logit_moments,
    uniform_correlation,
    variance_report_to_document,
)


def _default_threads() -> int:
    env = os.environ.get("TEMPDET_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise InputError(f"TEMPDET_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise InputError(f"TEMPDET_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _sweep_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected LOW:HIGH:COUNT, got {text!r}"
        )
    try:
        low, high, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH:COUNT, got {text!r}")
    if count < 1:
        raise argparse.ArgumentTypeError("sweep COUNT must be >= 1")
    return np.linspace(low, high, count)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("human", "structured"),
                        default="human",
                        help="human-readable text or JSON (default: human)")


def _add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: TEMPDET_THREADS or core count)")


def _threads(args: argparse.Namespace) -> int:
    return args.threads if args.threads is not None else _default_threads()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempdet",
        description="Training-free softmax temperature determination toolkit",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_est = sub.add_parser("estimate", help="closed-form temperature for a task")
    p_est.add_argument("--m", type=_positive_int, required=True,
                       help="feature width feeding the output layer")
    p_est.add_argument("--cn", type=int, default=None, help="class count")
    p_est.add_argument("--csg", type=float, default=None,
                       help="dataset difficulty score")
    p_est.add_argument("--variant", choices=VARIANTS, required=True)
    p_est.add_argument("--coeffs-file", default=None,
                       help="coefficient JSON document (default: shipped table)")
    _add_format(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_csg = sub.add_parser("csg", help="dataset difficulty score from features")
    p_csg.add_argument("--input", required=True,
                       help="labeled feature file (text or binary container)")
    p_csg.add_argument("--k", type=_positive_int, default=3)
    p_csg.add_argument("--samples-per-class", type=_positive_int, default=100)
    p_csg.add_argument("--seed", type=int, default=0)
    p_csg.add_argument("--laplacian",
                       choices=("unnormalized", "symmetric-normalized"),
                       default="unnormalized")
    p_csg.add_argument("--out", default=None, help="write output here instead of stdout")
    _add_format(p_csg)
    _add_threads(p_csg)
    p_csg.set_defaults(func=cmd_csg)

    p_fit = sub.add_parser("fit", help="fit temperature coefficients to a grid")
    p_fit.add_argument("--grid", required=True, help="swept-grid table file")
    p_fit.add_argument("--variant", choices=COEFFICIENT_VARIANTS, required=True)
    p_fit.add_argument("--mode", choices=("global", "cross-validated"),
                       default="global")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--aggregate", choices=("mean", "median"), default="mean")
    p_fit.add_argument("--out", required=True,
                       help="coefficient document destination")
    _add_format(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="softmax Monte Carlo and loss curves")
    sim_sub = p_sim.add_subparsers(dest="kind", required=True)

    p_max = sim_sub.add_parser("max-prob",
                               help="max softmax probability vs class count")
    p_max.add_argument("--classes", type=_int_list, required=True,
                       help="comma-separated class counts")
    p_max.add_argument("--trials", type=_positive_int, required=True)
    p_max.add_argument("--temperature", type=float, default=1.0)
    p_max.add_argument("--seed", type=int, default=0)
    p_max.add_argument("--out", default=None)
    _add_format(p_max)
    _add_threads(p_max)
    p_max.set_defaults(func=cmd_simulate_max_prob)

    p_loss = sim_sub.add_parser("loss-response",
                                help="loss vs one swept logit")
    p_loss.add_argument("--sweep", type=_sweep_range, default="-5:15:81",
                        help="swept logit range LOW:HIGH:COUNT")
    group = p_loss.add_mutually_exclusive_group()
    group.add_argument("--classes", type=_positive_int, default=None,
                       help="class count; the other classes sit at logit 0")
    group.add_argument("--others", type=_float_list, default=None,
                       help="explicit fixed logits for the other classes")
    p_loss.add_argument("--temperature", type=float, default=1.0)
    p_loss.add_argument("--eps", type=float, default=0.0,
                        help="label smoothing strength")
    p_loss.add_argument("--out", default=None)
    _add_format(p_loss)
    p_loss.set_defaults(func=cmd_simulate_loss_response)

    p_var = sub.add_parser("verify-variance",
                           help="analytic vs Monte-Carlo logit moments")
    p_var.add_argument("--m", type=_positive_int, required=True)
    p_var.add_argument("--trials", type=_positive_int, default=100_000)
    p_var.add_argument("--seed", type=int, default=0)
    p_var.add_argument("--weight-mode", choices=("frozen", "random"),
                       default="frozen")
    p_var.add_argument("--weight-seed", type=int, default=0)
    p_var.add_argument("--weight-family", choices=("normal", "uniform"),
                       default="normal")
    p_var.add_argument("--weight-mean", type=float, default=0.0)
    p_var.add_argument("--weight-variance", type=float, default=1.0)
    p_var.add_argument("--feature-family", choices=("normal", "uniform"),
                       default="normal")
    p_var.add_argument("--feature-mean", type=float, default=0.0)
    p_var.add_argument("--feature-variance", type=float, default=1.0)
    p_var.add_argument("--lecun", action="store_true",
                       help="weight variance 1/m, mean 0 (overrides weight flags)")
    p_var.add_argument("--rho", type=float, default=None,
                       help="equicorrelated feature correlation level")
    p_var.add_argument("--normalized", action="store_true",
                       help="declare features normalized (mean 0, variance 1)")
    p_var.add_argument("--bias", type=float, default=0.0)
    p_var.add_argument("--out", default=None)
    _add_format(p_var)
    _add_threads(p_var)
    p_var.set_defaults(func=cmd_verify_variance)

    p_rep = sub.add_parser("reproduce",
                           help="self-test against the shipped reference fixture")
    _add_format(p_rep)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def cmd_estimate(args: argparse.Namespace) -> int:
    coeffs = None
    if args.coeffs_file:
        file_variant, coeffs = load_coefficients(args.coeffs_file)
        if args.variant != file_variant:
            raise InputError(
                f"--variant {args.variant} does not match the coefficient "
                f"document's variant {file_variant!r}"
            )
    task = TaskDescriptor(m=args.m, cn=args.cn, csg=args.csg)
    temperature, detail = estimate_temperature_detail(task, args.variant, coeffs)
    used = coeffs
    if used is None and args.variant in COEFFICIENT_VARIANTS:
        used = default_coefficients(args.variant)
    record = {
        "temperature": temperature,
        "variant": args.variant,
        "task": {"m": args.m, "cn": args.cn, "csg": args.csg},
        "raw": detail["raw"],
        "clipped": detail["clipped"],
        "coefficients": coefficients_to_document(args.variant, used)
        if used is not None else None,
    }
    if args.format == "structured":
        print(json.dumps(record, indent=2))
        return 0
    print(f"{temperature:.6g}")
    parts = [f"variant={args.variant}", f"m={args.m}"]
    if args.cn is not None:
        parts.append(f"cn={args.cn}")
    if args.csg is not None:
        parts.append(f"csg={args.csg!r}")
    parts.append(f"raw={detail['raw']!r}")
    parts.append(f"clipped={'yes' if detail['clipped'] else 'no'}")
    if used is not None:
        parts.append(
            f"alpha={used.alpha!r} beta={used.beta!r} gamma={used.gamma!r} "
            f"delta={used.delta!r} clip=[{used.clip_lo!r}, {used.clip_hi!r}]"
        )
    print(" ".join(parts))
    return 0


def cmd_csg(args: argparse.Namespace) -> int:
    data = load_labeled_features(args.input)
    cfg = CsgConfig(k=args.k, samples_per_class=args.samples_per_class,
                    seed=args.seed, laplacian=args.laplacian)
    result = compute_csg(data, cfg, threads=_threads(args))
    doc = csg_result_to_document(result, cfg)
    if args.format == "structured":
        _emit(json.dumps(doc, indent=2), args.out)
        return 0
    lines = [
        f"csg = {result.csg!r}",
        f"config: k={cfg.k} samples_per_class={cfg.samples_per_class} "
        f"seed={cfg.seed} laplacian={cfg.laplacian}",
        "similarity:",
    ]
    for row in result.similarity:
        lines.append("  " + " ".join(repr(float(v)) for v in row))
    lines.append("eigenvalues: "
                 + " ".join(repr(float(v)) for v in result.eigenvalues))
    _emit("\n".join(lines), args.out)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    grids = read_grid_file(args.grid)
    spec = FitSpec(
        variant=args.variant,
        mode=args.mode,
        aggregate=args.aggregate,
        de=DifferentialEvolutionSettings(seed=args.seed),
    )
    result = fit(grids, spec)
    doc = coefficients_to_document(result.variant, result.coefficients)
    doc["objective"] = result.objective_value
    doc["diagnostics"] = result.diagnostics
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if args.format == "structured":
        print(json.dumps(doc, indent=2))
        return 0
    diag = result.diagnostics
    coeffs = result.coefficients
    print(f"objective = {result.objective_value!r} "
          f"({len(grids)} conditions, {diag['generations']} generations, "
          f"{'converged' if diag['converged'] else 'not converged'})")
    print(f"coefficients: alpha={coeffs.alpha!r} beta={coeffs.beta!r} "
          f"gamma={coeffs.gamma!r} delta={coeffs.delta!r}")
    print(f"written to {args.out}")
    return 0


def _emit_table(table: Table, args: argparse.Namespace) -> int:
    if args.format == "structured":
        _emit(json.dumps(table.to_document(), indent=2), args.out)
    else:
        _emit(table.to_text(), args.out)
    return 0


def cmd_simulate_max_prob(args: argparse.Namespace) -> int:
    table = max_prob_simulation(args.classes, args.trials,
                                temperature=args.temperature, seed=args.seed,
                                threads=_threads(args))
    return _emit_table(table, args)


def cmd_simulate_loss_response(args: argparse.Namespace) -> int:
    if args.others is not None:
        others = args.others
    else:
        n_classes = args.classes if args.classes is not None else 10
        others = [0.0] * (n_classes - 1)
    table = loss_response_curve(args.sweep, others,
                                temperature=args.temperature, eps=args.eps)
    return _emit_table(table, args)


def cmd_verify_variance(args: argparse.Namespace) -> int:
    if args.lecun:
        weight_dist = DistributionSpec(family=args.weight_family, mean=0.0,
                                       variance=1.0 / args.m)
    else:
        weight_dist = DistributionSpec(family=args.weight_family,
                                       mean=args.weight_mean,
                                       variance=args.weight_variance)
    correlation = None
    if args.rho is not None:
        correlation = uniform_correlation(args.m, args.rho)
    scenario = LinearHeadScenario(
        m=args.m,
        weight_dist=weight_dist,
        feature_dist=DistributionSpec(family=args.feature_family,
                                      mean=args.feature_mean,
                                      variance=args.feature_variance),
        feature_correlation=correlation,
        bias=args.bias,
        normalized_features=args.normalized,
        weight_mode=args.weight_mode,
        weight_seed=args.weight_seed,
    )
    report = mc_logit_moments(scenario, args.trials, seed=args.seed,
                              threads=_threads(args))
    gap = abs(report.mc_variance - report.analytic_variance)
    threshold = max(3.0 * report.mc_stderr,
                    0.03 * abs(report.analytic_variance))
    agrees = gap <= threshold
    doc = variance_report_to_document(report)
    doc["agreement"] = bool(agrees)
    doc["gap"] = gap
    doc["threshold"] = threshold
    if args.format == "structured":
        _emit(json.dumps(doc, indent=2), args.out)
    else:
        lines = [f"{name} = {doc[name]!r}" for name in
                 ("analytic_mean", "analytic_variance", "mc_mean",
                  "mc_variance", "mc_stderr", "trials")]
        lines.append(
            f"agreement = {'yes' if agrees else 'no'} "
            f"(|gap| {gap!r} vs threshold {threshold!r})"
        )
        _emit("\n".join(lines), args.out)
    return 0 if agrees else 1


def cmd_reproduce(args: argparse.Namespace) -> int:
    fixture = json.loads(
        resources.files("tempdet").joinpath("reproduce/defaults.json")
        .read_text(encoding="utf-8")
    )
    checks: list[tuple[str, bool, str]] = []
    for doc in fixture["coefficients"]:
        variant, expected = coefficients_from_document(doc)
        actual = default_coefficients(variant)
        ok = actual == expected
        checks.append((
            f"default coefficients [{variant}]", ok,
            f"alpha={actual.alpha!r} beta={actual.beta!r} "
            f"gamma={actual.gamma!r} delta={actual.delta!r}",
        ))
    anchor = fixture["anchor"]
    task = TaskDescriptor(m=int(anchor["m"]), cn=int(anchor["cn"]),
                          csg=float(anchor["csg"]))
    value = estimate_temperature(task, anchor["variant"])
    ok = abs(value - float(anchor["expected"])) <= float(anchor["tolerance"])
    checks.append((
        f"anchor temperature [{anchor['variant']}, m={anchor['m']}, "
        f"csg={anchor['csg']}, cn={anchor['cn']}]", ok,
        f"got {value!r}, expected {anchor['expected']} "
        f"+/- {anchor['tolerance']}",
    ))
    all_ok = all(ok for _, ok, _ in checks)
    if args.format == "structured":
        print(json.dumps({
            "checks": [{"name": name, "ok": ok, "detail": detail}
                       for name, ok, detail in checks],
            "ok": all_ok,
        }, indent=2))
    else:
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})")
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code in (0, None):
            return 0
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
