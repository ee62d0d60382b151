"""Command-line front end.

Subcommands: ``gen`` (synthetic data), ``solve`` (coefficient matrix),
``cluster`` (spectral segmentation), ``bench`` (angle/density sweep),
``check`` (geometry and recovery-condition report). Every command writes
a ``manifest.json`` next to its outputs so a run can be reproduced from
the manifest alone.

Exit codes: 0 success, 1 I/O error, 2 usage error, 3 solver did not
converge, 4 precondition failure. The environment variable ``SSC_SEED``
overrides ``--seed`` when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import dataio, spectral, synth, theory
from .core import (
    CoefficientMatrix,
    DataMatrix,
    ProblemSpec,
    SubspaceArrangement,
    Variant,
    normalize_unit_columns,
    validate,
)
from .solver import AdmmConfig, solve
from .theory import RankDeficientError

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_PRECONDITION = 4


def _resolve_seed(args) -> int:
    env = os.environ.get("SSC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(EXIT_USAGE)
    return int(getattr(args, "seed", 0))


def _write_manifest(out_dir, command: str, args: argparse.Namespace, seed: int,
                    artifacts: list[str], wall_time_s: float) -> None:
    params = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")
    }
    manifest = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "parameters": params,
        "seed": seed,
        "artifact_paths": artifacts,
        "wall_time_s": wall_time_s,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    t0 = time.time()
    spec = synth.SynthSpec(
        theta_deg=args.theta_deg,
        ng=args.points_per_subspace,
        ambient_dim=args.ambient_dim,
        subspace_dim=args.d,
        n_subspaces=args.n,
        seed=seed,
        noise_sigma=args.noise_sigma,
        outlier_fraction=args.outlier_frac,
        outlier_magnitude=args.outlier_magnitude,
    )
    arr = synth.generate_arrangement(spec)
    data, arr = synth.sample_points(arr, spec.ng, seed)
    if spec.noise_sigma > 0 or spec.outlier_fraction > 0:
        data = synth.corrupt(data, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    data_path = os.path.join(args.out_dir, "data.csv")
    labels_path = os.path.join(args.out_dir, "labels.txt")
    bases_path = os.path.join(args.out_dir, "bases.csv")
    dataio.write_matrix(data, data_path)
    dataio.write_labels(arr.labels, labels_path)
    dataio.write_matrix(np.hstack(arr.bases), bases_path)
    _write_manifest(args.out_dir, "gen", args, seed,
                    [data_path, labels_path, bases_path], time.time() - t0)
    return EXIT_OK


def cmd_solve(args) -> int:
    seed = _resolve_seed(args)
    t0 = time.time()
    data = dataio.read_matrix(args.input)
    if args.masks:
        masks = dataio.read_masks(args.masks, n_points=data.n_points)
        data = DataMatrix(data.values, masks=masks)
        if args.missing == "common-rows":
            data, _rows = dataio.project_common_rows(data)
        else:
            data = dataio.fill_missing_random(data, seed=seed)
    spec = ProblemSpec(
        variant=Variant(args.variant),
        affine=args.affine,
        alpha_z=args.alpha_z,
        alpha_e=args.alpha_e,
        lambda_r=args.lambda_r,
        normalize_columns=args.normalize,
    )
    cfg = AdmmConfig(
        rho=args.rho,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        seed=seed,
        rho_equality=args.rho_equality,
    )
    result = solve(data, spec, cfg)
    out_dir = os.path.dirname(os.path.abspath(args.out_coeffs)) or "."
    os.makedirs(out_dir, exist_ok=True)
    dataio.write_matrix(result.coefficients.values, args.out_coeffs)
    artifacts = [args.out_coeffs]
    if args.out_errors:
        if result.outliers is None:
            print("no sparse-error matrix for this variant", file=sys.stderr)
            return EXIT_USAGE
        dataio.write_matrix(result.outliers, args.out_errors)
        artifacts.append(args.out_errors)
    diag = result.diagnostics
    col_l1 = np.abs(result.coefficients.values).sum(axis=0)
    diag_path = os.path.join(out_dir, "diagnostics.json")
    with open(diag_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "format_version": FORMAT_VERSION,
                "iterations": diag.iterations,
                "converged": diag.converged,
                "objective": diag.objective,
                "primal_residual_consensus": diag.primal_residual_consensus,
                "primal_residual_affine": diag.primal_residual_affine,
                "primal_residual_equality": diag.primal_residual_equality,
                "dual_residuals": list(diag.dual_residuals),
                "zero_columns": [int(i) for i in np.flatnonzero(col_l1 == 0.0)],
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    artifacts.append(diag_path)
    _write_manifest(out_dir, "solve", args, seed, artifacts, time.time() - t0)
    if not diag.converged and not args.allow_nonconverged:
        print(
            f"did not converge in {diag.iterations} iterations",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_cluster(args) -> int:
    seed = _resolve_seed(args)
    t0 = time.time()
    C = CoefficientMatrix(dataio.read_matrix(args.coeffs).values)
    if args.n is None and not args.estimate_n:
        print("need --n or --estimate-n", file=sys.stderr)
        return EXIT_USAGE
    if args.n is not None and args.n > C.n_points:
        print("--n exceeds the number of points", file=sys.stderr)
        return EXIT_USAGE
    if not args.no_normalize:
        C = spectral.normalize_coefficients(C)
    graph = spectral.build_graph(C)
    n = args.n
    if args.estimate_n:
        n = spectral.estimate_num_subspaces(graph, min(args.n_max, C.n_points))
    result = spectral.spectral_cluster(graph, n, seed=seed, restarts=args.restarts)
    out_dir = os.path.dirname(os.path.abspath(args.out_labels)) or "."
    os.makedirs(out_dir, exist_ok=True)
    dataio.write_labels(result.labels, args.out_labels)
    spectrum_path = os.path.join(out_dir, "spectrum.csv")
    with open(spectrum_path, "w", encoding="utf-8") as fh:
        fh.write("index,eigenvalue\n")
        for i, v in enumerate(result.eigengap_spectrum):
            fh.write(f"{i},{v!r}\n")
    _write_manifest(out_dir, "cluster", args, seed,
                    [args.out_labels, spectrum_path], time.time() - t0)
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    t0 = time.time()
    thetas = _float_list(args.theta_list)
    ngs = _int_list(args.ng_list)
    grid = [(theta, ng) for theta in thetas for ng in ngs]
    base = synth.SynthSpec(
        theta_deg=thetas[0],
        ng=max(ngs),
        ambient_dim=args.ambient_dim,
        subspace_dim=args.d,
        n_subspaces=args.n,
        seed=seed,
        noise_sigma=args.noise_sigma,
        outlier_fraction=args.outlier_frac,
    )
    spec = ProblemSpec(
        variant=Variant(args.variant),
        affine=args.affine,
        alpha_z=args.alpha_z,
        alpha_e=args.alpha_e,
    )
    cfg = AdmmConfig(rho=args.rho, epsilon=args.epsilon, max_iter=args.max_iter)
    result = synth.run_sweep(grid, args.trials, base, spec, cfg, jobs=args.jobs)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    result.to_csv(args.out)
    stem, ext = os.path.splitext(args.out)
    mean_path = f"{stem}_mean{ext or '.csv'}"
    with open(mean_path, "w", encoding="utf-8") as fh:
        fh.write("theta_deg,ng,mean_ssr_error,mean_clustering_error,converged_fraction\n")
        for theta, ng, ssr, cerr, conv in result.cell_means():
            fh.write(f"{theta!r},{ng},{ssr!r},{cerr!r},{conv!r}\n")
    _write_manifest(out_dir, "bench", args, seed, [args.out, mean_path],
                    time.time() - t0)
    return EXIT_OK


def cmd_check(args) -> int:
    seed = _resolve_seed(args)
    t0 = time.time()
    data = validate(dataio.read_matrix(args.input))
    labels = dataio.read_labels(args.labels)
    if labels.size != data.n_points:
        print("labels length does not match the data", file=sys.stderr)
        return EXIT_USAGE
    if args.normalize:
        data = normalize_unit_columns(data)
    n_groups = int(labels.max()) + 1
    if args.bases is not None:
        stacked = dataio.read_matrix(args.bases).values
        if args.d is None or stacked.shape[1] != n_groups * args.d:
            print("--bases needs --d with d * n_groups stacked columns",
                  file=sys.stderr)
            return EXIT_USAGE
        bases = [stacked[:, k * args.d : (k + 1) * args.d] for k in range(n_groups)]
    else:
        bases = []
        for k in range(n_groups):
            block = data.values[:, labels == k]
            basis = theory._orthonormal_range(block, rel_tol=args.rank_tol)
            if basis.shape[1] == 0:
                print(f"group {k + 1} has no usable data", file=sys.stderr)
                return EXIT_PRECONDITION
            bases.append(basis)
    arr = SubspaceArrangement(tuple(bases), labels=labels)
    angles = theory.angle_report(arr)
    report = {
        "format_version": FORMAT_VERSION,
        "classification": theory.classify_arrangement(arr),
        "subspace_dims": list(arr.dims),
        "pairwise_cos": angles.pairwise_cos.tolist(),
        "smallest_angle_deg": angles.smallest_angle_deg.tolist(),
    }
    try:
        if args.submatrix_condition:
            cond = theory.check_submatrix_condition(
                data, arr, submatrix_budget=args.submatrix_budget, seed=seed
            )
            report["submatrix_condition"] = {
                "lhs": cond.lhs.tolist(),
                "rhs": cond.rhs.tolist(),
                "holds": cond.holds.tolist(),
                "exhaustive": cond.exhaustive.tolist(),
            }
        if args.margin_samples > 0:
            margins = []
            for i in range(arr.n_subspaces):
                margin, tested = theory.check_intersection_margin(
                    data, arr, i, num_samples=args.margin_samples, seed=seed
                )
                margins.append(
                    {
                        "subspace": i + 1,
                        "min_margin": None if tested == 0 else margin,
                        "samples": tested,
                        "note": "trivial intersection" if tested == 0 else (
                            "evidence" if margin > 0 else "counterexample"
                        ),
                    }
                )
            report["intersection_margins"] = margins
    except RankDeficientError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out_dir, "check", args, seed, [args.out], time.time() - t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssc",
        description="Sparse self-expressive subspace clustering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic arrangement and samples")
    p.add_argument("--d", type=int, default=4, help="subspace dimension")
    p.add_argument("--ambient-dim", type=int, default=50)
    p.add_argument("--theta-deg", type=float, required=True,
                   help="smallest principal angle between neighboring subspaces")
    p.add_argument("--points-per-subspace", type=int, required=True)
    p.add_argument("--n", type=int, default=3, help="number of subspaces")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--outlier-frac", type=float, default=0.0)
    p.add_argument("--outlier-magnitude", type=float, default=1.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve the self-expressive sparse program")
    p.add_argument("--input", required=True, help="data matrix CSV (points as columns)")
    p.add_argument("--variant", choices=[v.value for v in Variant], default="noise")
    p.add_argument("--affine", action="store_true")
    p.add_argument("--alpha-z", type=float, default=800.0)
    p.add_argument("--alpha-e", type=float, default=20.0)
    p.add_argument("--lambda-r", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--rho-equality", type=float, default=None)
    p.add_argument("--normalize", action="store_true",
                   help="unit-normalize columns before solving")
    p.add_argument("--masks", default=None, help="known-entry index file")
    p.add_argument("--missing", choices=["common-rows", "fill"], default="common-rows",
                   help="how to handle masked data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-nonconverged", action="store_true")
    p.add_argument("--out-coeffs", required=True)
    p.add_argument("--out-errors", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cluster", help="spectral clustering of a coefficient matrix")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--estimate-n", action="store_true")
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--no-normalize", action="store_true",
                   help="skip max-abs column normalization of the coefficients")
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bench", help="run the angle/density sweep")
    p.add_argument("--theta-list", required=True, help="comma-separated degrees")
    p.add_argument("--ng-list", required=True, help="comma-separated points per subspace")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--ambient-dim", type=int, default=50)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="exact")
    p.add_argument("--affine", action="store_true")
    p.add_argument("--alpha-z", type=float, default=800.0)
    p.add_argument("--alpha-e", type=float, default=20.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--outlier-frac", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="geometry and recovery-condition report")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--bases", default=None,
                   help="stacked ground-truth bases CSV (else inferred from data)")
    p.add_argument("--d", type=int, default=None,
                   help="per-group dimension when --bases is given")
    p.add_argument("--normalize", action="store_true", default=True)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--submatrix-condition", action="store_true",
                   help="run the singular-value recovery-condition check")
    p.add_argument("--submatrix-budget", type=int, default=2000)
    p.add_argument("--margin-samples", type=int, default=0,
                   help="sampled intersection-margin checks per subspace (0 = skip)")
    p.add_argument("--rank-tol", type=float, default=theory.RANK_REL_TOL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except dataio.ParseError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except (dataio.EmptyCommonSupportError, RankDeficientError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
