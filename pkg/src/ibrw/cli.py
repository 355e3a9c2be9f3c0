"""Command-line front end.

Every command is a pure function of its flags: outputs are byte-identical
across reruns and thread counts (the manifest timestamp lives in a sidecar
or a dedicated field and is excluded from that contract).  Floats in CSV
cells carry 17 significant digits so they round-trip exactly.

Exit codes: 2 unreadable/malformed input, 3 validation failure, 4 particle
capacity exceeded, 0 otherwise.
"""

from __future__ import annotations

import csv
import datetime
import functools
import io
import json
import os
import sys

import click

from . import __version__
from .bridge import (
    BridgeError,
    BridgeSpec,
    LogBarrier,
    bridge_barrier_survival,
    walk_barrier_survival,
)
from .experiments import (
    AssumptionViolated,
    make_lower_bound_setup,
    paley_zygmund_ratio,
    slope_ratios,
    tightness_study,
)
from .prediction import (
    BarrierUndefined,
    RestrictionViolated,
    barrier,
    optimal_path,
    predict_max,
)
from .profile import (
    NonIntegralTime,
    ProfileError,
    VarianceProfile,
    concave_hull,
    effective_times,
    load_profile,
)
from .simulate import BrwConfig, CapacityExceeded, monte_carlo_max

_EXIT_INPUT = 2
_EXIT_VALIDATION = 3
_EXIT_CAPACITY = 4

_VALIDATION_ERRORS = (
    ProfileError,
    NonIntegralTime,
    RestrictionViolated,
    BarrierUndefined,
    BridgeError,
    AssumptionViolated,
    ValueError,
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _stage(msg: str) -> None:
    click.echo(msg, err=True)


def _manifest(command: str, config: dict) -> dict:
    return {
        "command": command,
        "config": config,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _write_json(path, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_manifest(out_path, manifest: dict) -> None:
    if out_path is None or out_path == "-":
        return
    stem, _ = os.path.splitext(out_path)
    _write_json(stem + ".manifest.json", manifest)


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) if not isinstance(x, str) else x for x in row])
    if path is None or path == "-":
        click.echo(buf.getvalue(), nl=False)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def _load_profile_arg(path) -> VarianceProfile:
    try:
        return load_profile(path)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        _stage(f"error: cannot read profile {path}: {exc}")
        sys.exit(_EXIT_INPUT)


def _trap(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CapacityExceeded as exc:
            _stage(f"error: {exc}")
            sys.exit(_EXIT_CAPACITY)
        except _VALIDATION_ERRORS as exc:
            _stage(f"error: {exc}")
            sys.exit(_EXIT_VALIDATION)

    return wrapper


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--threads",
    type=int,
    default=None,
    help="Worker threads for trial batches (default all cores; never affects outputs).",
)
@click.pass_context
def main(ctx, threads):
    """Branching random walks with piecewise constant variance."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads if threads is not None else os.cpu_count()


@main.command()
@click.option("--profile", "profile_path", required=True, help="Profile JSON file.")
@click.option("--tol", type=float, default=1e-9, show_default=True,
              help="Relative tolerance for coincidence tests.")
@click.option("--out", default=None, help="Output path (default stdout).")
@_trap
def hull(profile_path, tol, out):
    """Reduce a profile to its effective (concave hull) parameters."""
    profile = _load_profile_arg(profile_path)
    _stage("stage: computing concave hull")
    eff = concave_hull(profile, tol)
    doc = eff.to_dict()
    doc["manifest"] = _manifest("hull", {"profile": profile.to_dict(), "tol": tol})
    _write_json(out, doc)


@main.command()
@click.option("--profile", "profile_path", required=True, help="Profile JSON file.")
@click.option("--n", type=int, required=True, help="Time horizon.")
@click.option("--mode", type=click.Choice(["restricted", "unrestricted"]),
              default="restricted", show_default=True)
@click.option("--branching", type=int, default=2, show_default=True)
@click.option("--out-json", default=None, help="Report JSON path (default stdout).")
@click.option("--out-csv", default=None, help="Per-time table CSV path.")
@_trap
def predict(profile_path, n, mode, branching, out_json, out_csv):
    """Second-order prediction for the maximum, plus the per-time path table."""
    profile = _load_profile_arg(profile_path)
    eff = concave_hull(profile)
    _stage("stage: evaluating prediction")
    report = predict_max(eff, n, mode=mode, branching=branching)
    config = {
        "profile": profile.to_dict(),
        "n": n,
        "mode": mode,
        "branching": branching,
    }
    doc = report.to_dict()
    doc["manifest"] = _manifest("predict", config)
    _write_json(out_json, doc)
    if out_csv is not None:
        _stage("stage: writing path/barrier table")
        rows = []
        for k in range(n + 1):
            try:
                b = _fmt(barrier(eff, n, k, branching=branching))
            except BarrierUndefined:
                b = ""
            rows.append((k, optimal_path(eff, n, k, branching=branching), b))
        _write_csv(out_csv, ("k", "path", "barrier"), rows)
        _write_manifest(out_csv, _manifest("predict", config))


@main.command()
@click.option("--profile", "profile_path", required=True, help="Profile JSON file.")
@click.option("--n", type=int, required=True, help="Time horizon.")
@click.option("--b", "branching", type=int, default=2, show_default=True,
              help="Branching factor.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, required=True)
@click.option("--out-csv", default=None, help="Sample CSV path (default stdout).")
@click.option("--out-json", default=None, help="Summary JSON path.")
@click.pass_context
@_trap
def simulate(ctx, profile_path, n, branching, seed, trials, out_csv, out_json):
    """Simulate the walk and record the maximum of every trial."""
    profile = _load_profile_arg(profile_path)
    config = BrwConfig(
        profile=profile, n=n, branching=branching, seed=seed, trials=trials
    )
    _stage(f"stage: running {trials} trials at n={n}")
    summary = monte_carlo_max(config, threads=ctx.obj["threads"])
    manifest = _manifest(
        "simulate",
        {
            "profile": profile.to_dict(),
            "n": n,
            "branching": branching,
            "seed": seed,
            "trials": trials,
        },
    )
    rows = [
        (t, summary.max_values[t], summary.recentered[t]) for t in range(trials)
    ]
    _write_csv(out_csv, ("trial", "max", "recentered"), rows)
    _write_manifest(out_csv, manifest)
    if out_json is not None:
        doc = summary.to_dict()
        doc["manifest"] = manifest
        _write_json(out_json, doc)


def _parse_lengths(text):
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ProfileError(f"cannot parse lengths {text!r}")
    if not values:
        raise ProfileError("need at least one length")
    return values


@main.command("verify-bridge")
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--d-coef", "dcoef", type=float, required=True,
              help="Barrier coefficient D.")
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--lengths", required=True, help="Comma-separated interval lengths.")
@click.option("--trials", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="CSV path (default stdout).")
@click.pass_context
@_trap
def verify_bridge(ctx, sigma, dcoef, z, lengths, trials, seed, out):
    """Estimate bridge survival below the log barrier; scaled = p*n/(1+z)^2."""
    rows = []
    for length in _parse_lengths(lengths):
        _stage(f"stage: bridge survival at length {length}")
        spec = BridgeSpec(start=0, end=length, sigma=sigma)
        bar = LogBarrier(D=dcoef, z=z, interval=(0, length))
        est = bridge_barrier_survival(
            spec, bar, trials, seed, threads=ctx.obj["threads"]
        )
        rows.append(
            (length, est.p_hat, est.ci_low, est.ci_high,
             est.p_hat * length / (1.0 + z) ** 2)
        )
    _write_csv(out, ("length", "p_hat", "ci_low", "ci_high", "scaled"), rows)
    _write_manifest(
        out,
        _manifest(
            "verify-bridge",
            {"sigma": sigma, "D": dcoef, "z": z, "lengths": lengths,
             "trials": trials, "seed": seed},
        ),
    )


@main.command("verify-walk")
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--d-coef", "dcoef", type=float, default=0.0, show_default=True,
              help="Barrier coefficient D (0 gives the plain running-maximum bound).")
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--lengths", required=True, help="Comma-separated horizons.")
@click.option("--trials", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="CSV path (default stdout).")
@click.pass_context
@_trap
def verify_walk(ctx, sigma, dcoef, z, lengths, trials, seed, out):
    """Estimate walk survival below D*log(k)+z; scaled = p*sqrt(t)/(1+z)."""
    rows = []
    for t in _parse_lengths(lengths):
        _stage(f"stage: walk survival at t={t}")
        est = walk_barrier_survival(
            sigma, dcoef, z, t, trials, seed, threads=ctx.obj["threads"]
        )
        rows.append(
            (t, est.p_hat, est.ci_low, est.ci_high,
             est.p_hat * t ** 0.5 / (1.0 + z))
        )
    _write_csv(out, ("length", "p_hat", "ci_low", "ci_high", "scaled"), rows)
    _write_manifest(
        out,
        _manifest(
            "verify-walk",
            {"sigma": sigma, "D": dcoef, "z": z, "lengths": lengths,
             "trials": trials, "seed": seed},
        ),
    )


def _load_plan(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _stage(f"error: cannot read plan {path}: {exc}")
        sys.exit(_EXIT_INPUT)


def _plan_profile(plan: dict) -> VarianceProfile:
    try:
        return VarianceProfile.from_dict(plan["profile"])
    except (KeyError, TypeError) as exc:
        _stage(f"error: malformed plan profile: {exc}")
        sys.exit(_EXIT_INPUT)


@main.command()
@click.argument("case", type=click.Choice(["lower-bound", "tightness", "slopes"]))
@click.option("--plan", "plan_path", required=True, help="Experiment plan JSON.")
@click.option("--out-csv", default=None, help="CSV path (default stdout).")
@click.option("--out-meta", default=None, help="Metadata JSON path.")
@click.pass_context
@_trap
def experiment(ctx, case, plan_path, out_csv, out_meta):
    """Run a higher-level experiment described by a JSON plan."""
    plan = _load_plan(plan_path)
    profile = _plan_profile(plan)
    meta = {"case": case, "manifest": _manifest(f"experiment {case}", plan)}

    if case == "slopes":
        _stage("stage: computing slope ratios")
        ratios = slope_ratios(profile)
        lam1 = concave_hull(profile).eff_lambdas[0]
        from .profile import integral_J  # local import avoids cli-level cycle

        avg = integral_J(profile, 0.0, lam1) / lam1
        rows = [
            (r, (integral_J(profile, r, lam1) / (lam1 - r)) / avg)
            for r in profile.lambdas
            if 0.0 < r < lam1
        ]
        meta.update({"eta1": ratios.eta1, "eta2": ratios.eta2})
        _write_csv(out_csv, ("r", "ratio"), rows)

    elif case == "tightness":
        ns = plan.get("ns") or [plan["n"]]
        trials = int(plan.get("trials", 500))
        seed = int(plan.get("seed", 0))
        branching = int(plan.get("branching", 2))
        configs = [
            BrwConfig(profile=profile, n=int(n), branching=branching,
                      seed=seed, trials=trials)
            for n in ns
        ]
        _stage(f"stage: tightness study over n={list(ns)}")
        rows = [
            (row.n, row.median_offset, row.iqr)
            for row in tightness_study(configs, threads=ctx.obj["threads"])
        ]
        _write_csv(out_csv, ("n", "median_offset", "iqr"), rows)

    else:  # lower-bound
        ns = plan.get("ns") or [plan["n"]]
        trials = int(plan.get("trials", 1000))
        seed = int(plan.get("seed", 0))
        cf = float(plan.get("cf", 3.0))
        branching = int(plan.get("branching", 2))
        rows = []
        for n in ns:
            _stage(f"stage: lower-bound counting at n={n}")
            setup = make_lower_bound_setup(profile, int(n), cf=cf,
                                           branching=branching)
            res = paley_zygmund_ratio(setup, trials, seed, branching=branching)
            rows.append(
                (n, res.mean_count, res.mean_square, res.ratio,
                 int(res.degenerate))
            )
        _write_csv(
            out_csv,
            ("n", "mean_count", "mean_square", "pz_ratio", "degenerate"),
            rows,
        )

    if out_meta is not None:
        _write_json(out_meta, meta)
    _write_manifest(out_csv, meta["manifest"])


if __name__ == "__main__":
    main()
