"""Command-line entry point: ``llrdetect {validate,predict,mc,sweep,repro}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import detectability, exact_output_cov
from .detector import hypothesis_covariances
from .errors import (
    DeviationTooLargeError,
    DomainError,
    LlrDetectError,
    ModelFileError,
    NumericalError,
    StructuralError,
)
from .model import as_weights, compose, spectral_radius, validate
from .model_io import load_model
from .montecarlo import THREADS_ENV, default_checkpoints, default_threads, error_rate_curve, theoretical_curves
from .observer import (
    ObserverConfig,
    ObserverMode,
    augment,
    evaluate_gain,
    gain_sweep,
    kalman_gain,
    lift_deviation,
)
from .presets import PRESETS, get_preset
from .theory import corrected_positive_probability, positive_probability, quadratic_llr_moments

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 4

DEFAULT_GRID = "-0.2:1.2:61,-0.4:0.6:61"

SCHEMAS = """\
model files (YAML or JSON):
  A, C, Q, R as row-major nested lists; optional `deviations:` list of
  mappings with any of dA, dC, dQ, dR (missing blocks are zero) and `name`.
  MODEL may also be `preset:NAME` with NAME in {presets}.

weights:
  comma-separated, one per deviation (`--alpha=0.03,0,0.01`); a single
  value is broadcast. Use the `=` form when the first value is negative.

CSV outputs (17 significant digits):
  predict       k,theoretical,corrected
  mc            k,empirical,stderr,theoretical,corrected
  LLR paths     k,trial0,trial1,...
  sweep         l1,l2,stable,trace_sigma_y,lambda   (empty fields when unstable)
  detectability i,j,lambda,r
  observers     label,l1,l2,stable,trace_sigma_y,lambda,rate
                (labels zero, kalman, lambda_max, reference)
Every file-writing command also writes a JSON run manifest with the command,
resolved configuration and its digest, seed, version, duration and outputs.

exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 usage error.
environment: {env} sets the default thread count.
""".format(presets=", ".join(sorted(PRESETS)), env=THREADS_ENV)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)

    @property
    def config_digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def write(self, path) -> None:
        missing = [p for p in self.outputs if not Path(p).is_file() or Path(p).stat().st_size == 0]
        if missing:
            raise RuntimeError(f"manifest lists missing or empty outputs: {missing}")
        doc = asdict(self)
        doc["config_digest"] = self.config_digest
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(ref: str):
    """Return ``(model, basis, preset_or_None)`` for a path or ``preset:NAME``."""
    if ref.startswith("preset:"):
        try:
            pre = get_preset(ref.split(":", 1)[1])
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        return pre.model, list(pre.basis), pre
    try:
        model, basis = load_model(ref)
    except OSError as exc:
        raise UsageError(f"cannot read model file {ref!r}: {exc.strerror or exc}") from None
    return model, basis, None


def _require_stable(model, allow_unstable: bool) -> None:
    rep = validate(model)
    if rep.stable:
        return
    msg = f"nominal plant is unstable (spectral radius {rep.spectral_radius:.6g})"
    if not allow_unstable:
        raise StructuralError(msg + "; pass --allow-unstable to proceed")
    _log("warning: " + msg)


def _weights(text, size, name):
    if text is None:
        return None
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if len(vals) == 1 and size > 1:
        vals = vals * size
    try:
        return as_weights(vals, size, name)
    except StructuralError as exc:
        raise UsageError(str(exc)) from None


def _axis(text):
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return np.linspace(lo, hi, n)
    except ValueError:
        pass
    raise UsageError(f"bad grid axis {text!r}; expected LO:HI:COUNT or a single value")


def _grid(text):
    axes = text.split(",")
    if len(axes) != 2:
        raise UsageError(f"--grid needs two comma-separated axes, got {text!r}")
    return _axis(axes[0]), _axis(axes[1])


def _threads(args) -> int:
    return default_threads() if args.threads is None else max(1, args.threads)


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _write_rows(path_or_none, header, rows) -> None:
    fh = open(path_or_none, "w", newline="") if path_or_none else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path_or_none:
            fh.close()


def _g(v) -> str:
    return f"{v:.17g}"


# commands


def cmd_validate(args) -> int:
    model, basis, pre = _load(args.model)
    rep = validate(model)
    print(f"model: {model.name or args.model} (n={model.n}, p={model.p}, deviations={len(basis)})")
    for line in rep.lines():
        print(line)
    if pre is not None and pre.notes:
        print(f"note: {pre.notes}")
    if not rep.noise_ok:
        print("FAIL: noise covariances are not symmetric positive semidefinite")
        return EXIT_VALIDATION
    if not rep.stable:
        if args.allow_unstable:
            print("warning: plant is unstable (allowed by --allow-unstable)")
            return EXIT_OK
        print("FAIL: plant is unstable")
        return EXIT_VALIDATION
    print("OK")
    return EXIT_OK


def cmd_predict(args) -> int:
    model, basis, _ = _load(args.model)
    _require_stable(model, args.allow_unstable)
    k = len(basis)
    if k == 0:
        raise StructuralError("model defines no deviations")
    alpha = _weights(args.alpha, k, "alpha")
    beta = _weights(args.beta, k, "beta")
    gamma = _weights(args.gamma, k, "gamma")
    if args.steps < 1 or args.points < 1:
        raise UsageError("--steps and --points must be positive")
    lam_max = spectral_radius(model.A) if args.lambda_max is None else args.lambda_max
    cps = default_checkpoints(args.steps, args.points)
    if gamma is not None:
        sa, sb = hypothesis_covariances(model, basis, alpha, beta)
        sg = exact_output_cov(model, basis, gamma)
        base, theo, corr = theoretical_curves(sa, sb, sg, cps, lam_max)
        kind = "exact"
    else:
        lam = detectability(model, basis)
        base = quadratic_llr_moments(lam, alpha, beta, beta, 1)
        theo = [positive_probability(base.scaled(int(n))) for n in cps]
        corr = [corrected_positive_probability(base.scaled(int(n)), lam_max) for n in cps]
        kind = "quadratic (truth = beta)"
    factor = np.sqrt((1 - lam_max**2) / (1 + lam_max**2))
    _log(f"moments: {kind}; lambda_max = {lam_max:.6g}")
    _log(f"rate: Phi({base.rate:.6g} sqrt(N)); corrected: Phi({base.rate * factor:.6g} sqrt(N))")
    out = Path(args.out) if args.out else None
    _write_rows(out, ["k", "theoretical", "corrected"],
                ([int(n), _g(a), _g(b)] for n, a, b in zip(cps, theo, corr)))
    if out:
        RunManifest(
            "predict",
            dict(model=args.model, alpha=alpha.tolist(), beta=beta.tolist(),
                 gamma=None if gamma is None else gamma.tolist(), steps=args.steps,
                 points=args.points, lambda_max=lam_max),
            None,
            outputs=[str(out)],
        ).write(_manifest_path(out))
    return EXIT_OK


def cmd_mc(args) -> int:
    t0 = time.perf_counter()
    model, basis, _ = _load(args.model)
    _require_stable(model, args.allow_unstable)
    k = len(basis)
    if k == 0:
        raise StructuralError("model defines no deviations")
    gamma = _weights(args.truth_gamma, k, "truth-gamma")
    alpha = _weights(args.alpha, k, "alpha")
    beta = _weights(args.beta, k, "beta")
    truth = compose(model, basis, gamma)
    if args.trials < 1 or args.steps < 1:
        raise UsageError("--trials and --steps must be positive")
    curve = error_rate_curve(
        truth, model, basis, alpha, beta, args.trials, args.steps,
        default_checkpoints(args.steps, args.points), args.seed,
        lam_max=args.lambda_max, keep_paths=args.paths, threads=_threads(args),
    )
    out = Path(args.out)
    curve.write_csv(out)
    outputs = [str(out)]
    if args.paths:
        paths = out.with_name(out.stem + "_paths.csv")
        curve.write_paths_csv(paths)
        outputs.append(str(paths))
    _log(f"final empirical = {curve.empirical[-1]:.4g} at k = {curve.checkpoints[-1]}; "
         f"theoretical = {curve.theoretical[-1]:.4g}, corrected = {curve.corrected[-1]:.4g}")
    RunManifest(
        "mc",
        dict(model=args.model, truth_gamma=gamma.tolist(), alpha=alpha.tolist(), beta=beta.tolist(),
             trials=args.trials, steps=args.steps, points=args.points, paths=args.paths,
             lambda_max=curve.lam_max, model_digest=model.digest(), truth_digest=truth.digest()),
        args.seed,
        duration_s=time.perf_counter() - t0,
        outputs=outputs,
    ).write(_manifest_path(out))
    return EXIT_OK


def _sweep_summary(plant, dev, table, mode, c_hat):
    lines = []
    if not table.stable.any():
        lines.append("warning: no stable gains in the grid window")
    else:
        i = table.argmax_lambda()
        lines.append(f"argmax lambda: L = [{table.l1[i]:.6g}, {table.l2[i]:.6g}], "
                     f"lambda = {table.lambda_scalar[i]:.6g}, trace = {table.trace_sigma_y[i]:.6g}")
    try:
        L = kalman_gain(plant)
        ev = evaluate_gain(plant, dev, L, mode, c_hat)
        if ev.stable:
            lines.append(f"kalman gain: L = [{L[0, 0]:.6g}, {L[1, 0]:.6g}], "
                         f"lambda = {ev.lambda_scalar:.6g}, trace = {ev.trace_sigma_y:.6g}")
        else:
            lines.append(f"kalman gain: L = [{L[0, 0]:.6g}, {L[1, 0]:.6g}] (augmented system unstable)")
    except NumericalError as exc:
        lines.append(f"kalman gain: unavailable ({exc})")
    return lines


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    model, basis, _ = _load(args.model)
    _require_stable(model, args.allow_unstable)
    if not 0 <= args.deviation < len(basis):
        raise UsageError(f"deviation index {args.deviation} out of range (model has {len(basis)})")
    dev = basis[args.deviation]
    g1, g2 = _grid(args.grid)
    table = gain_sweep(model, dev, g1, g2, args.mode, None, _threads(args))
    summary = _sweep_summary(model, dev, table, ObserverMode(args.mode), None)
    for line in summary:
        _log(line)
    out = Path(args.out) if args.out else None
    _write_rows(out, table.HEADER, table.rows())
    if out:
        RunManifest(
            "sweep",
            dict(model=args.model, deviation=args.deviation, grid=args.grid, mode=args.mode,
                 model_digest=model.digest()),
            None,
            duration_s=time.perf_counter() - t0,
            outputs=[str(out)],
        ).write(_manifest_path(out))
    return EXIT_OK


REPRO_SCALE = {
    "pendulum": {"full": (2000, 50000), "desk": (200, 20000)},
    "friction": {"full": (2000, 20000), "desk": (200, 2000)},
}


def _repro_pendulum(out: Path, trials, steps, seed, threads, n_paths):
    pre = get_preset("pendulum")
    d = pre.defaults
    truth = compose(pre.model, pre.basis, d["gamma"])
    curve = error_rate_curve(
        truth, pre.model, pre.basis, d["alpha"], d["beta"], trials, steps,
        default_checkpoints(steps), seed, lam_max=d["lam_max"], keep_paths=n_paths, threads=threads,
    )
    files = [out / "error_rate.csv", out / "llr_paths.csv", out / "detectability.csv"]
    curve.write_csv(files[0])
    curve.write_paths_csv(files[1])
    det = detectability(pre.model, pre.basis)
    k = det.size
    _write_rows(files[2], ["i", "j", "lambda", "r"],
                ([i, j, _g(det.lambda_[i, j]), _g(det.r[i, j])] for i in range(k) for j in range(k)))
    factor = np.sqrt((1 - d["lam_max"] ** 2) / (1 + d["lam_max"] ** 2))
    _log(f"rate: Phi({curve.rate:.6g} sqrt(N)); corrected: Phi({curve.rate * factor:.6g} sqrt(N))")
    _log(f"final empirical = {curve.empirical[-1]:.4g} at k = {steps}")
    config = dict(preset="pendulum", gamma=d["gamma"], alpha=d["alpha"], beta=d["beta"],
                  lambda_max=d["lam_max"], model_digest=pre.model.digest(), truth_digest=truth.digest(),
                  note=pre.notes)
    return files, config


def _repro_friction(out: Path, trials, steps, seed, threads, n_paths):
    pre = get_preset("friction")
    plant, dev = pre.model, pre.basis[0]
    d = pre.defaults
    g1, g2 = _grid(DEFAULT_GRID)
    table = gain_sweep(plant, dev, g1, g2, ObserverMode.LUENBERGER, None, threads)
    files = [out / "sweep.csv", out / "observers.csv"]
    table.write_csv(files[0])
    i = table.argmax_lambda()
    gains = {
        "zero": np.zeros((2, 1)),
        "kalman": kalman_gain(plant),
        "lambda_max": np.array([[table.l1[i]], [table.l2[i]]]),
        # interior reference gain; the grid argmax hugs the stability boundary
        "reference": np.array(d["reference_gain"], dtype=float).reshape(2, 1),
    }
    rows = []
    for label, L in gains.items():
        obs = ObserverConfig(L)
        aug = augment(plant, obs)
        lifted = [lift_deviation(plant, obs, dev)]
        truth = compose(aug, lifted, d["gamma"])
        curve = error_rate_curve(
            truth, aug, lifted, d["alpha"], d["beta"], trials, steps,
            default_checkpoints(steps), seed, keep_paths=n_paths, threads=threads,
        )
        path = out / f"error_rate_{label}.csv"
        curve.write_csv(path)
        files.append(path)
        ev = evaluate_gain(plant, dev, L)
        rows.append([label, _g(L[0, 0]), _g(L[1, 0]), "true" if ev.stable else "false",
                     _g(ev.trace_sigma_y), _g(ev.lambda_scalar), _g(curve.rate)])
        _log(f"{label}: L = [{L[0, 0]:.4g}, {L[1, 0]:.4g}], trace = {ev.trace_sigma_y:.4g}, "
             f"lambda = {ev.lambda_scalar:.4g}, rate = {curve.rate:.4g}, final empirical = {curve.empirical[-1]:.4g}")
    _write_rows(files[1], ["label", "l1", "l2", "stable", "trace_sigma_y", "lambda", "rate"], rows)
    config = dict(preset="friction", gamma=d["gamma"], alpha=d["alpha"], beta=d["beta"], grid=DEFAULT_GRID,
                  mode="luenberger", model_digest=plant.digest(), note=pre.notes)
    return files, config


def cmd_repro(args) -> int:
    t0 = time.perf_counter()
    trials, steps = REPRO_SCALE[args.experiment][args.scale]
    if args.trials is not None:
        trials = args.trials
    if args.steps is not None:
        steps = args.steps
    out = Path(args.out or f"repro-{args.experiment}-{args.scale}")
    out.mkdir(parents=True, exist_ok=True)
    run = _repro_pendulum if args.experiment == "pendulum" else _repro_friction
    files, config = run(out, trials, steps, args.seed, _threads(args), min(args.paths, trials))
    config.update(experiment=args.experiment, scale=args.scale, trials=trials, steps=steps, paths=args.paths)
    RunManifest("repro", config, args.seed, duration_s=time.perf_counter() - t0,
                outputs=[str(f) for f in files]).write(out / "manifest.json")
    _log(f"wrote {len(files)} files and manifest.json to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    p = _Parser(prog="llrdetect", description=__doc__, epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, threads=False):
        sp.add_argument("model", help="model file path or preset:NAME")
        sp.add_argument("--allow-unstable", action="store_true", help="continue with an unstable nominal plant")
        if threads:
            sp.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or CPU count)")

    sp = sub.add_parser("validate", help="check stability and noise structure", epilog=SCHEMAS, formatter_class=fmt)
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("predict", help="theoretical error-rate curves", epilog=SCHEMAS, formatter_class=fmt)
    common(sp)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--gamma", help="true weights; exact moments when given, quadratic (truth = beta) otherwise")
    sp.add_argument("--steps", "-N", type=int, required=True, help="largest sample count")
    sp.add_argument("--points", type=int, default=50, help="number of log-spaced checkpoints")
    sp.add_argument("--lambda-max", type=float, default=None, help="correlation decay (default spectral radius of A)")
    sp.add_argument("--out", help="CSV path (stdout when omitted)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("mc", help="Monte Carlo error-rate curve", epilog=SCHEMAS, formatter_class=fmt)
    common(sp, threads=True)
    sp.add_argument("--truth-gamma", required=True)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--steps", type=int, default=20000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--paths", type=int, default=0, help="also write this many LLR sample paths")
    sp.add_argument("--lambda-max", type=float, default=None)
    sp.add_argument("--out", required=True, help="CSV path; manifest goes to OUT.manifest.json")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("sweep", help="observer gain sweep (n = 2, p = 1)", epilog=SCHEMAS, formatter_class=fmt)
    common(sp, threads=True)
    sp.add_argument("--deviation", type=int, default=0, help="index into the deviation list")
    sp.add_argument("--grid", default=DEFAULT_GRID, help="L1LO:L1HI:N1,L2LO:L2HI:N2 (use --grid=...)")
    sp.add_argument("--mode", choices=[m.value for m in ObserverMode], default="luenberger")
    sp.add_argument("--out", help="CSV path (stdout when omitted)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("repro", help="reproduce a built-in experiment", epilog=SCHEMAS, formatter_class=fmt)
    sp.add_argument("experiment", choices=sorted(REPRO_SCALE))
    sp.add_argument("--scale", choices=["full", "desk"], default="desk")
    sp.add_argument("--trials", type=int, default=None, help="override the scale's trial count")
    sp.add_argument("--steps", type=int, default=None, help="override the scale's step count")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--paths", type=int, default=20, help="LLR sample paths to keep")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", help="output directory (default repro-EXPERIMENT-SCALE)")
    sp.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except ModelFileError as exc:
        _log(f"model file error: {exc}")
        return EXIT_VALIDATION
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (StructuralError, DomainError, DeviationTooLargeError) as exc:
        _log(f"validation failure: {exc}")
        return EXIT_VALIDATION
    except LlrDetectError as exc:
        _log(f"error: {exc}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
