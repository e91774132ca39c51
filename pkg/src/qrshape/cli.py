"""Command-line interface: shape extraction, model fitting, model comparison,
mean-shape testing and self-verification, with machine-readable output.

Input format (landmark CSV): a header line ``N,K`` followed by one record
per specimen: ``id,group,v1,...,v(N*K)`` with the landmark matrix flattened
row-major.  Lines starting with ``#`` are ignored.  Results are written as
JSON (versioned schema); extraction writes CSV.

Exit codes: 0 success, 1 numerical non-convergence or failed verification,
2 input/parse errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .densities import ModelSpec, gaussian_model, kotz_model, shape_logdensity
from .errors import QRShapeError
from .generators import GeneratorSpec
from .geometry import (LandmarkConfiguration, ReflectionMode, ShapeCoordinates,
                       angle_domains, helmert_submatrix, landmark_shape,
                       shape_dims)
from .inference import (MODEL_KINDS, FitOptions, Sample, evidence_grade,
                        fit_mle, lr_test_equal_mean_shape)
from .simulate import mc_density_check, mc_stiefel_moment, sample_shapes_from_model, \
    stiefel_moment_closed_form, stiefel_volume
from .zonal import (SeriesControl, gen_pochhammer, partitions_of,
                    weighted_zonal_series, zonal_polynomial)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2


class InputError(QRShapeError):
    """Raised for malformed input files; maps to exit code 2."""


@dataclass
class LandmarkDataset:
    N: int
    K: int
    ids: list[str]
    groups: list[str]
    matrices: list[np.ndarray]

    def by_group(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for i, g in enumerate(self.groups):
            out.setdefault(g, []).append(i)
        return out


def read_landmark_dataset(path: str) -> LandmarkDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    header = None
    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            parts = line.split(",")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: header must be 'N,K', got {line!r}")
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: header must be two integers") from exc
            if header[0] < 2 or header[1] < 1:
                raise InputError(f"{path}:{lineno}: need N >= 2 and K >= 1")
            continue
        records.append((lineno, line))
    if header is None:
        raise InputError(f"{path}: empty file (no 'N,K' header)")
    N, K = header
    ids, groups, matrices = [], [], []
    for lineno, line in records:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 + N * K:
            raise InputError(
                f"{path}:{lineno}: expected id,group plus {N * K} values, got "
                f"{len(parts)} fields")
        try:
            values = np.array([float(v) for v in parts[2:]]).reshape(N, K)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: non-numeric landmark value") from exc
        if not np.all(np.isfinite(values)):
            raise InputError(f"{path}:{lineno}: non-finite landmark value")
        ids.append(parts[0])
        groups.append(parts[1])
        matrices.append(values)
    if not ids:
        raise InputError(f"{path}: no specimen records")
    return LandmarkDataset(N=N, K=K, ids=ids, groups=groups, matrices=matrices)


def read_square_matrix(path: str, size: int) -> np.ndarray:
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: malformed matrix: {exc}") from exc
    if rows.shape != (size, size):
        raise InputError(f"{path}: expected a {size}x{size} matrix, got {rows.shape}")
    return rows


def _mode_from_flag(flag: str) -> ReflectionMode:
    return (ReflectionMode.INCLUDES_REFLECTION if flag == "reflect"
            else ReflectionMode.EXCLUDES_REFLECTION)


def _extract_sample(dataset: LandmarkDataset, theta: np.ndarray | None,
                    mode: ReflectionMode, indices: list[int]) -> Sample:
    obs = []
    for i in indices:
        cfg = LandmarkConfiguration(dataset.matrices[i])
        obs.append(landmark_shape(cfg, theta, mode))
    return Sample(obs)


def _ctrl_from_args(args) -> SeriesControl:
    return SeriesControl(max_degree=args.max_degree, rel_tol=args.rel_tol)


def _dump(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    dataset = read_landmark_dataset(args.input)
    theta = read_square_matrix(args.theta, dataset.K) if args.theta else None
    mode = _mode_from_flag(args.mode)
    n, M, n_coords, m = shape_dims(dataset.N, dataset.K)
    header = (["id", "group", "r"]
              + [f"u{i+1}" for i in range(m)]
              + [f"w{i+1}" for i in range(n_coords)])
    lines = [",".join(header)]
    for i, ident in enumerate(dataset.ids):
        cfg = LandmarkConfiguration(dataset.matrices[i])
        shape = landmark_shape(cfg, theta, mode)
        fields = ([ident, dataset.groups[i], repr(float(shape.r))]
                  + [repr(float(v)) for v in shape.u]
                  + [repr(float(v)) for v in shape.coords()])
        lines.append(",".join(fields))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _select_group(dataset: LandmarkDataset, group: str | None) -> list[int]:
    if group is None:
        return list(range(len(dataset.ids)))
    byg = dataset.by_group()
    if group not in byg:
        raise InputError(f"group {group!r} not present (have {sorted(byg)})")
    return byg[group]


def cmd_fit(args) -> int:
    dataset = read_landmark_dataset(args.input)
    theta = read_square_matrix(args.theta, dataset.K) if args.theta else None
    sample = _extract_sample(dataset, theta, _mode_from_flag(args.mode),
                             _select_group(dataset, args.group))
    ctrl = _ctrl_from_args(args)
    opts = FitOptions(seed=args.seed, restarts=args.restarts)
    fit = fit_mle(args.model, sample, opts, ctrl)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "package_version": __version__,
        "input": args.input,
        "group": args.group,
        "seed": args.seed,
        "series": {"max_degree": ctrl.max_degree, "rel_tol": ctrl.rel_tol},
        "fit": fit.to_dict(),
    }
    _dump(payload, args.output)
    return EXIT_OK if (fit.converged and fit.series_converged) else EXIT_NUMERIC


def cmd_compare(args) -> int:
    dataset = read_landmark_dataset(args.input)
    theta = read_square_matrix(args.theta, dataset.K) if args.theta else None
    sample = _extract_sample(dataset, theta, _mode_from_flag(args.mode),
                             _select_group(dataset, args.group))
    ctrl = _ctrl_from_args(args)
    opts = FitOptions(seed=args.seed, restarts=args.restarts)
    fits = [fit_mle(model, sample, opts, ctrl) for model in args.models]
    fits.sort(key=lambda f: f.bic_star)
    best = fits[0].bic_star
    table = []
    for f in fits:
        diff = f.bic_star - best
        table.append({
            "model": f.model,
            "bic_star": f.bic_star,
            "delta": diff,
            "evidence_vs_best": evidence_grade(diff).value,
            "loglik": f.loglik,
            "converged": f.converged,
        })
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "compare",
        "package_version": __version__,
        "input": args.input,
        "group": args.group,
        "seed": args.seed,
        "ranking": table,
        "fits": {f.model: f.to_dict() for f in fits},
    }
    _dump(payload, args.output)
    width = max(len(r["model"]) for r in table)
    print(f"{'model':<{width}}  {'BIC*':>14}  {'delta':>10}  evidence", file=sys.stderr)
    for r in table:
        print(f"{r['model']:<{width}}  {r['bic_star']:>14.4f}  {r['delta']:>10.4f}  "
              f"{r['evidence_vs_best']}", file=sys.stderr)
    ok = all(r["converged"] for r in table)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_test_meanshape(args) -> int:
    dataset = read_landmark_dataset(args.input)
    theta = read_square_matrix(args.theta, dataset.K) if args.theta else None
    byg = dataset.by_group()
    if args.groups:
        names = args.groups
        for g in names:
            if g not in byg:
                raise InputError(f"group {g!r} not present (have {sorted(byg)})")
    else:
        names = sorted(byg)
        if len(names) != 2:
            raise InputError(f"need exactly two groups, found {names}; use --groups")
    mode = _mode_from_flag(args.mode)
    s1 = _extract_sample(dataset, theta, mode, byg[names[0]])
    s2 = _extract_sample(dataset, theta, mode, byg[names[1]])
    ctrl = _ctrl_from_args(args)
    opts = FitOptions(seed=args.seed, restarts=args.restarts)
    res = lr_test_equal_mean_shape(s1, s2, args.model, opts, ctrl,
                                   pooled_sigma=args.pooled_sigma)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "test-meanshape",
        "package_version": __version__,
        "input": args.input,
        "groups": names,
        "model": args.model,
        "seed": args.seed,
        "statistic": res.statistic,
        "df": res.df,
        "p_value": res.p_value,
        "loglik_null": res.loglik_null,
        "loglik_alt": res.loglik_alt,
        "converged": res.converged,
    }
    _dump(payload, args.output)
    return EXIT_OK if res.converged else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------

def _verify_zonal(seed: int, checks: list) -> None:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    A = (A + A.T) / 2.0
    eigs = np.linalg.eigvalsh(A)
    worst = 0.0
    for t in range(0, 9):
        total = sum(zonal_polynomial(p, eigs) for p in partitions_of(t))
        worst = max(worst, abs(total - np.trace(A) ** t) / abs(np.trace(A)) ** t)
    checks.append(("zonal degree-sum identity", worst < 1e-9, f"worst rel {worst:.2e}"))
    scale_ok = all(
        abs(zonal_polynomial(p, 1.7 * eigs) - 1.7 ** 5 * zonal_polynomial(p, eigs))
        <= 1e-10 * abs(1.7 ** 5 * zonal_polynomial(p, eigs)) for p in partitions_of(5))
    checks.append(("zonal homogeneity", scale_ok, "degree 5"))
    X = 0.12 * A
    val, diag = weighted_zonal_series(
        X, lambda t, k: gen_pochhammer(1.9, k) / math.factorial(t),
        SeriesControl(max_degree=60, rel_tol=1e-13))
    ref = float(np.linalg.det(np.eye(3) - X) ** -1.9)
    checks.append(("binomial determinant identity", abs(val - ref) < 1e-10 * abs(ref),
                   f"value {val:.12f} vs {ref:.12f}, converged={diag.converged}"))


def _verify_stiefel(seed: int, count: int, checks: list) -> None:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 2))
    for t in (1, 2):
        est = mc_stiefel_moment(A, t, 3, count=count, seed=seed + t)
        ref = stiefel_moment_closed_form(A, t, 3)
        z = est.z_against(ref)
        checks.append((f"frame moment t={t} vs closed form", abs(z) < 3.0, f"z = {z:+.2f}"))
    odd = mc_stiefel_moment(A, 1, 3, count=count, seed=seed + 9, power=3)
    z = odd.z_against(0.0)
    checks.append(("odd frame moment is zero", abs(z) < 3.0, f"z = {z:+.2f}"))
    est0 = mc_stiefel_moment(A, 0, 3, count=10, seed=seed)
    vol = stiefel_volume(2, 3)
    checks.append(("t=0 reproduces the frame volume", abs(est0.value - vol) < 1e-9,
                   f"{est0.value:.9f} vs {vol:.9f}"))


def _grid_integral(spec: ModelSpec, ngrid: int, ctrl: SeriesControl) -> float:
    from .densities import shape_logdensity_batch
    from .geometry import from_polar
    domains = angle_domains(spec.N, spec.K, spec.reflection_mode)
    (a0, a1), (b0, b1) = domains
    tt = (np.arange(ngrid) + 0.5) / ngrid
    th1 = a0 + (a1 - a0) * tt
    th2 = b0 + (b1 - b0) * tt
    shapes = []
    ref = np.zeros((spec.N - 1, spec.n))
    ref[0, 0] = 1.0
    for x in th1:
        for y in th2:
            u = np.array([x, y])
            tri = from_polar(ShapeCoordinates(W=ref, u=u, r=1.0,
                                              reflection_mode=spec.reflection_mode, K=spec.K))
            shapes.append(ShapeCoordinates(W=tri.T, u=u, r=1.0,
                                           reflection_mode=spec.reflection_mode, K=spec.K))
    vals = shape_logdensity_batch(spec, shapes, ctrl)
    cell = (a1 - a0) * (b1 - b0) / ngrid ** 2
    return float(np.exp(vals).sum() * cell)


def _verify_normalization(seed: int, ngrid: int, checks: list) -> None:
    rng = np.random.default_rng(seed)
    mu = 0.4 * rng.standard_normal((2, 2))
    ctrl = SeriesControl()
    cases = [
        ("gaussian central", gaussian_model(np.zeros((2, 2)), 1.0)),
        ("gaussian noncentral", gaussian_model(mu, 1.2)),
        ("kotz tau=2 central", kotz_model(np.zeros((2, 2)), 1.0, tau=2)),
        ("kotz tau=2 noncentral", kotz_model(mu, 1.2, tau=2)),
    ]
    for name, spec in cases:
        total = _grid_integral(spec, ngrid, ctrl)
        checks.append((f"normalization: {name}", abs(total - 1.0) < 1e-3,
                       f"integral = {total:.6f} on a {ngrid}x{ngrid} grid"))


def _verify_invariance(seed: int, checks: list) -> None:
    rng = np.random.default_rng(seed)
    from .geometry import qr_size_and_shape, to_polar
    N, K = 5, 2
    worst = 0.0
    g = gaussian_model(np.zeros((N - 1, K)), 1.0)
    k2 = kotz_model(np.zeros((N - 1, K)), 1.0, tau=2)
    k3 = kotz_model(np.zeros((N - 1, K)), 1.0, tau=3)
    for _ in range(50):
        Y = rng.standard_normal((N - 1, K))
        shape = to_polar(qr_size_and_shape(Y)[0])
        v = [shape_logdensity(m, shape) for m in (g, k2, k3)]
        worst = max(worst, abs(v[0] - v[1]), abs(v[0] - v[2]))
    checks.append(("central generator invariance", worst < 1e-9, f"worst |diff| {worst:.2e}"))
    X = rng.standard_normal((6, 2))
    cfg = LandmarkConfiguration(X)
    shape1 = landmark_shape(cfg)
    shift = landmark_shape(LandmarkConfiguration(X + np.ones((6, 1)) @ rng.standard_normal((1, 2))))
    worst = float(np.abs(shape1.coords() - shift.coords()).max())
    checks.append(("translation invariance", worst < 1e-10, f"worst coord diff {worst:.2e}"))
    th = rng.uniform(0, 2 * math.pi)
    Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    rot = landmark_shape(LandmarkConfiguration(X @ Q))
    worst = float(np.abs(shape1.coords() - rot.coords()).max())
    checks.append(("rotation invariance", worst < 1e-8, f"worst coord diff {worst:.2e}"))


def cmd_verify(args) -> int:
    checks: list[tuple[str, bool, str]] = []
    suites = args.suite or ["zonal", "stiefel", "normalization", "invariance"]
    for suite in suites:
        if suite == "zonal":
            _verify_zonal(args.seed, checks)
        elif suite == "stiefel":
            _verify_stiefel(args.seed, args.count, checks)
        elif suite == "normalization":
            _verify_normalization(args.seed, args.grid, checks)
        elif suite == "invariance":
            _verify_invariance(args.seed, checks)
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok = ok and passed
    print(f"{'all checks passed' if ok else 'SOME CHECKS FAILED'} "
          f"({sum(p for _, p, _ in checks)}/{len(checks)})")
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", help="CSV file with a K x K column covariance to whiten by")
    p.add_argument("--mode", choices=["reflect", "noreflect"], default="reflect",
                   help="whether shape identifies mirror images (default: reflect)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-degree", type=int, default=120, dest="max_degree")
    p.add_argument("--rel-tol", type=float, default=1e-10, dest="rel_tol")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrshape",
        description="Triangular-coordinate shape analysis under elliptical models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="landmarks -> size, angles, direction coordinates")
    p.add_argument("input")
    p.add_argument("--theta", help="CSV file with a K x K column covariance to whiten by")
    p.add_argument("--mode", choices=["reflect", "noreflect"], default="reflect")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="maximum-likelihood fit of one model")
    p.add_argument("input")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--group", help="fit only this group (default: all specimens)")
    _add_common_model_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="fit several models and rank by BIC*")
    p.add_argument("input")
    p.add_argument("--models", nargs="+", choices=MODEL_KINDS,
                   default=list(MODEL_KINDS))
    p.add_argument("--group")
    _add_common_model_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("test-meanshape", help="likelihood-ratio test of equal mean shape")
    p.add_argument("input")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--groups", nargs=2, metavar=("G1", "G2"))
    p.add_argument("--pooled-sigma", action="store_true",
                   help="share sigma^2 between groups under the null")
    _add_common_model_args(p)
    p.set_defaults(func=cmd_test_meanshape)

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("--suite", action="append",
                   choices=["zonal", "stiefel", "normalization", "invariance"],
                   help="repeatable; default runs all suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=400, help="normalization grid per angle")
    p.add_argument("--count", type=int, default=200_000, help="Monte Carlo sample count")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QRShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
