"""Command-line front end.

Subcommands: fit-susceptibility, witness, qfi, spinon, synth. Every
command writes its numeric results to CSV/JSON next to the figures, so
the SVGs are never the only record. Exit codes: 0 success, 2 input or
configuration error, 3 numerical failure, 4 domain-policy error; errors
are emitted as JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dynamics, pipeline_io, qfi, spinon, suscept
from .core import ChainParameters, EnergyCut, kelvin_to_mev
from .dynamics import StarykhParams
from .errors import (
    BoseFactorPole,
    ChainQfiError,
    CutoffDomainError,
    DomainError,
    DuplicateAbscissa,
    ElasticWindowMissing,
    EmptyFile,
    FitDiverged,
    GridTooCoarse,
    IncompleteGrid,
    NoInteriorMaximum,
    NonPositiveValue,
    ParseError,
    SingularJacobian,
    WindowOutsideGrid,
)
from .fitter import FitResult
from .svgplot import Figure

_CONFIG_ERRORS = (
    ParseError,
    DuplicateAbscissa,
    EmptyFile,
    IncompleteGrid,
    WindowOutsideGrid,
    ElasticWindowMissing,
    FileNotFoundError,
    ValueError,
)
_NUMERIC_ERRORS = (
    FitDiverged,
    SingularJacobian,
    NoInteriorMaximum,
    GridTooCoarse,
    NonPositiveValue,
)
_POLICY_ERRORS = (CutoffDomainError, BoseFactorPole, DomainError)

J_FROM_TMAX_NOTE = (
    "J/k_B is reported as the unrounded quotient T_max / 0.640851; for "
    "T_max = 1.95 K this gives 3.043 K, about 0.2% below the commonly "
    "quoted rounded value of 3.05 K."
)


def _timestamp(args) -> str | None:
    if args.deterministic:
        return None
    return datetime.now(timezone.utc).isoformat()


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _input_record(*paths) -> list[dict]:
    return [
        {"path": str(p), "sha256": pipeline_io.sha256_of(p)} for p in paths
    ]


def _fit_result_dict(result: FitResult) -> dict:
    return {
        "parameters": result.parameters,
        "errors": result.errors,
        "covariance": np.asarray(result.covariance).tolist(),
        "free_names": list(result.free_names),
        "residual_norm": result.residual_norm,
        "reduced_chi2": result.reduced_chi2,
        "iterations": result.iterations,
        "converged": result.converged,
        "frozen_mask": result.frozen_mask,
        "message": result.message,
    }


def _parse_freeze(fragments) -> dict[str, float]:
    frozen = {}
    for frag in fragments or []:
        if "=" not in frag:
            raise ValueError(f"--freeze expects NAME=VALUE, got {frag!r}")
        name, _, value = frag.partition("=")
        frozen[name.strip()] = float(value)
    return frozen


def _policy_from_flag(flag: str) -> str:
    return {"strict": "strict", "absolute-value": "absolute_value"}[flag]


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_fit_susceptibility(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    curve = pipeline_io.read_susceptibility_csv(args.chi_csv)

    freeze_values = _parse_freeze(args.freeze)
    name_map = {"J": "j_over_kb", "g": "g_factor", "C0": "c0", "C1": "c1"}
    frozen = set()
    start = {"j_over_kb": args.j0, "g_factor": args.g0, "c0": args.c00, "c1": args.c10}
    for key, value in freeze_values.items():
        param = name_map.get(key, key)
        if param not in start:
            raise ValueError(f"unknown parameter {key!r} in --freeze")
        start[param] = value
        frozen.add(param)
    if not args.fit_c1:
        frozen.add("c1")

    initial = ChainParameters(
        j_over_kb=start["j_over_kb"],
        g_factor=start["g_factor"],
        c0=start["c0"],
        c1=min(start["c1"], 0.0),
    )
    result = suscept.fit_susceptibility(
        curve, initial, frozen=frozen, impurity_curie=args.impurity_curie
    )
    if not result.converged:
        raise FitDiverged("susceptibility fit did not converge: " + result.message)

    fitted = ChainParameters(
        j_over_kb=result.parameters["j_over_kb"],
        g_factor=result.parameters["g_factor"],
        c0=result.parameters["c0"],
        c1=min(result.parameters["c1"], 0.0),
    )
    t_max_model, t_max_model_unc = suscept.find_tmax_model(fitted)
    try:
        t_max_data, t_max_data_unc = suscept.find_tmax(curve.temperatures, curve.chi)
        j_from_data = suscept.j_from_tmax(t_max_data)
    except (NoInteriorMaximum, ValueError):
        t_max_data = t_max_data_unc = j_from_data = None

    report = {
        "fit": _fit_result_dict(result),
        "t_max_model_K": t_max_model,
        "t_max_model_uncertainty_K": t_max_model_unc,
        "j_from_t_max_model_K": suscept.j_from_tmax(t_max_model),
        "t_max_data_K": t_max_data,
        "t_max_data_uncertainty_K": t_max_data_unc,
        "j_from_t_max_data_K": j_from_data,
        "j_from_t_max_note": J_FROM_TMAX_NOTE,
        "impurity_curie": args.impurity_curie,
        "inputs": _input_record(args.chi_csv),
    }
    _write_json(outdir / "fit_report.json", report)

    fig = Figure(title="susceptibility fit", xlabel="T (K)", ylabel="chi (emu/mol)", xlog=True)
    fig.points(curve.temperatures, curve.chi, color="#000000", label="data")
    t_model = np.geomspace(curve.temperatures[0], curve.temperatures[-1], 400)
    fig.line(
        t_model,
        suscept.chi_full(t_model, fitted, impurity_curie=args.impurity_curie),
        color="#d62728",
        label="model",
    )
    fig.vline(t_max_model, label=f"T_max = {t_max_model:.4g} K")
    fig.render(outdir / "chi_fit.svg", timestamp=_timestamp(args))
    return 0


def cmd_witness(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    curve = pipeline_io.read_susceptibility_csv(args.chi_csv)
    params = ChainParameters(j_over_kb=args.j_kelvin, g_factor=args.g)
    series = suscept.witness_mwse(curve, params)

    with open(outdir / "witness.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("T_K,MW_SE\n")
        for t, v in zip(series.temperatures, series.mw_se):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    _write_json(
        outdir / "witness_report.json",
        {
            "t_se_K": series.t_se,
            "g_factor": args.g,
            "spin": params.spin,
            "inputs": _input_record(args.chi_csv),
        },
    )

    fig = Figure(title="entanglement witness", xlabel="T (K)", ylabel="MW_SE")
    fig.hline(0.0)
    fig.points(series.temperatures, series.mw_se, color="#1f77b4", label="MW_SE")
    if series.t_se is not None:
        fig.vline(series.t_se, color="#d62728", label=f"T_SE = {series.t_se:.4g} K")
    fig.render(outdir / "witness.svg", timestamp=_timestamp(args))
    return 0


def _model_params(args, policy: str) -> StarykhParams:
    t0 = args.t0_kelvin if args.t0_kelvin is not None else math.pi * args.j_kelvin / 8.0
    return StarykhParams(
        a_starykh=args.a_starykh,
        t0_kelvin=t0,
        j_over_kb=args.j_kelvin,
        negative_log_policy=policy,
    )


def _write_qfi_points(path, points) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("T_K,F_Q,err\n")
        for p in points:
            fh.write(
                f"{float(p.temperature)!r},{float(p.f_q)!r},"
                f"{float(p.quadrature_error_estimate)!r}\n"
            )


def cmd_qfi(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    policy = _policy_from_flag(args.policy) if args.policy else None
    omega_max = args.omega_max
    if omega_max is None:
        omega_max = math.pi * kelvin_to_mev(args.j_kelvin)

    collected_warnings: list[str] = []
    report: dict = {"omega_max_meV": omega_max, "z": args.z}

    if args.model:
        policy = policy or "strict"
        params = _model_params(args, policy)
        temps = [float(s) for s in args.temps.split(",")]
        points = []
        model_curves = []
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            for t in temps:
                point = qfi.compute_qfi(
                    lambda w, t=t: dynamics.chi_imag_starykh(w, t, params),
                    t=t,
                    omega_max=omega_max,
                )
                points.append(point)
                grid = np.linspace(0.0, omega_max, 241)
                chi_curve = dynamics.chi_imag_starykh(grid, t, params)
                model_curves.append((t, grid, chi_curve))
            collected_warnings = [str(w.message) for w in caught]
        report["mode"] = "model"
        report["model"] = {
            "a_starykh": params.a_starykh,
            "t0_kelvin": params.t0_kelvin,
            "j_over_kb": params.j_over_kb,
            "negative_log_policy": params.negative_log_policy,
        }
        report["inputs"] = []
        data_points_by_t = {}
    else:
        manifests = [pipeline_io.DatasetManifest.load(p) for p in args.data]
        manifest_policies = {m.policies.get("negative_log_policy", "strict") for m in manifests}
        if policy is None:
            if len(manifest_policies) > 1:
                raise ValueError(
                    f"manifests disagree on negative_log_policy {sorted(manifest_policies)}; "
                    "pass --policy explicitly"
                )
            policy = manifest_policies.pop()
        params = _model_params(args, policy)

        cuts = []
        elastic_records = []
        input_files = list(args.data)
        for manifest_path, manifest in zip(args.data, manifests):
            base = Path(manifest_path).parent
            sqe_path = base / manifest.inputs[0]["path"]
            if pipeline_io.sha256_of(sqe_path) != manifest.inputs[0]["sha256"]:
                raise ParseError(
                    f"{sqe_path} does not match the sha256 recorded in {manifest_path}"
                )
            input_files.append(sqe_path)
            grid = pipeline_io.read_spectrum_csv(sqe_path, manifest)
            cut = pipeline_io.integrate_q_window(grid, *manifest.q_window)
            rec: dict = {"temperature_K": manifest.temperature_K}
            cut = pipeline_io.subtract_elastic_line(
                cut, manifest.resolution_fwhm_meV, record=rec
            )
            elastic_records.append(rec)
            cut = pipeline_io.apply_fluctuation_dissipation(cut)
            cut = EnergyCut(
                e_axis=cut.e_axis,
                values=cut.values / manifest.calibration,
                errors=cut.errors / manifest.calibration,
                temperature=cut.temperature,
            )
            cuts.append(cut)

        fit_result = dynamics.fit_starykh(cuts, params)
        fitted = StarykhParams(
            a_starykh=fit_result.parameters["a_starykh"],
            t0_kelvin=fit_result.parameters["t0_kelvin"],
            j_over_kb=args.j_kelvin,
            negative_log_policy=policy,
        )
        points = []
        model_curves = []
        data_points_by_t = {}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            for cut in cuts:
                points.append(qfi.compute_qfi(cut, omega_max=omega_max))
                grid_w = np.linspace(0.0, omega_max, 241)
                model_curves.append(
                    (cut.temperature, grid_w, dynamics.chi_imag_starykh(grid_w, cut.temperature, fitted))
                )
                data_points_by_t[cut.temperature] = cut
            collected_warnings = [str(w.message) for w in caught]
        report["mode"] = "data"
        report["starykh_fit"] = _fit_result_dict(fit_result)
        report["elastic_subtraction"] = elastic_records
        report["inputs"] = _input_record(*input_files)
        _write_json(outdir / "fit_report.json", _fit_result_dict(fit_result))

    _write_qfi_points(outdir / "qfi_points.csv", points)

    scaling = None
    if len(points) >= 3:
        scaling = qfi.fit_scaling(points, z=args.z)
        report["scaling"] = {
            "delta_q_over_z": scaling.delta_q_over_z,
            "delta_q": scaling.delta_q,
            "amplitude": scaling.amplitude,
            "r_squared": scaling.r_squared,
            "z": scaling.z,
            "covariance": np.asarray(scaling.covariance).tolist(),
        }
    else:
        report["scaling"] = None
        report["scaling_skipped_reason"] = (
            f"power-law fit needs at least 3 temperatures, got {len(points)}"
        )
    report["points"] = [
        {
            "T_K": p.temperature,
            "F_Q": p.f_q,
            "err": p.quadrature_error_estimate,
            "clipped_count": p.clipped_count,
            "tail_fraction": p.tail_fraction,
        }
        for p in points
    ]
    report["negative_log_policy"] = policy
    report["warnings"] = collected_warnings
    _write_json(outdir / "qfi_report.json", report)

    # chi'' panels: model curve, tanh-weighted area, data points when present
    fig = Figure(title="dynamic susceptibility", xlabel="E (meV)", ylabel="chi'' (arb.)")
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")
    for k, (t, grid_w, chi_curve) in enumerate(model_curves):
        color = palette[k % len(palette)]
        weighted = qfi.qfi_integrand(grid_w, t, chi_curve)
        fig.fill_under(grid_w, weighted, color=color, opacity=0.25)
        fig.line(grid_w, chi_curve, color=color, label=f"T = {t:g} K")
        if data_points_by_t.get(t) is not None:
            cut = data_points_by_t[t]
            mask = (cut.e_axis >= 0) & (cut.e_axis <= omega_max)
            fig.points(cut.e_axis[mask], cut.values[mask], color=color, radius=1.8)
    fig.render(outdir / "chi_imag.svg", timestamp=_timestamp(args))

    fig = Figure(
        title="QFI scaling", xlabel="T (K)", ylabel="F_Q (arb.)", xlog=True, ylog=True
    )
    temps = np.array([p.temperature for p in points])
    values = np.array([p.f_q for p in points])
    fig.points(temps, values, color="#000000", label="F_Q(T)")
    if scaling is not None:
        t_line = np.geomspace(temps.min(), temps.max(), 100)
        fig.line(
            t_line,
            scaling.amplitude * t_line ** (-scaling.delta_q_over_z),
            color="#d62728",
            label=f"slope = -{scaling.delta_q_over_z:.3g}",
        )
    fig.render(outdir / "qfi_scaling.svg", timestamp=_timestamp(args))
    return 0


def cmd_spinon(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = pipeline_io.DatasetManifest.load(args.data)
    if manifest.lattice_c_A is None:
        raise ValueError(
            f"manifest {args.data} has no lattice_c_A; the chain lattice parameter "
            "is required for the continuum bounds"
        )
    base = Path(args.data).parent
    sqe_path = base / manifest.inputs[0]["path"]
    grid = pipeline_io.read_spectrum_csv(sqe_path, manifest)

    converted = spinon.powder_to_1d(grid)
    pipeline_io.write_spectrum_csv(outdir / "s1d.csv", converted)

    j_mev = kelvin_to_mev(args.j_kelvin)
    bounds = spinon.continuum_bounds(converted.q_axis, j_mev, manifest.lattice_c_A)
    zone_center_q = math.pi / manifest.lattice_c_A
    e_upper_max = float(spinon.two_spinon_bounds(zone_center_q, j_mev, manifest.lattice_c_A)[1])

    _write_json(
        outdir / "spinon_report.json",
        {
            "j_over_kb_K": args.j_kelvin,
            "j_meV": j_mev,
            "lattice_c_A": manifest.lattice_c_A,
            "zone_center_q_invA": zone_center_q,
            "upper_bound_at_zone_center_meV": e_upper_max,
            "inputs": _input_record(args.data, sqe_path),
        },
    )

    fig = Figure(title="spinon continuum", xlabel="Q (1/A)", ylabel="E (meV)")
    positive = converted.e_axis >= 0
    fig.cells(converted.q_axis, converted.e_axis[positive], converted.intensity[positive])
    fig.line(bounds.q_axis, bounds.lower, color="#d62728", label="lower bound")
    fig.line(bounds.q_axis, bounds.upper, color="#000000", label="upper bound")
    fig.annotate(
        f"E_u(pi/c) = {e_upper_max:.4g} meV", zone_center_q, e_upper_max
    )
    fig.render(outdir / "spinon_overlay.svg", timestamp=_timestamp(args))
    return 0


def cmd_synth(args) -> int:
    policy = _policy_from_flag(args.policy) if args.policy else "strict"
    chain = ChainParameters(
        j_over_kb=args.j_kelvin,
        g_factor=args.g,
        c0=args.c0,
        c1=args.c1,
        lattice_c=args.lattice_c,
    )
    t0 = args.t0_kelvin if args.t0_kelvin is not None else math.pi * args.j_kelvin / 8.0
    starykh = StarykhParams(
        a_starykh=args.a_starykh,
        t0_kelvin=t0,
        j_over_kb=args.j_kelvin,
        negative_log_policy=policy,
    )
    config = pipeline_io.SynthConfig(
        sample=args.sample,
        seed=args.seed,
        noise_level=args.noise,
        chi_noise_level=args.chi_noise,
        elastic_amplitude=args.elastic_amp,
        flat_background=args.flat_bg,
    )
    temps = [float(s) for s in args.temps.split(",")]
    written = pipeline_io.generate_synthetic_dataset(
        chain, starykh, temps, args.out, config=config
    )
    print(json.dumps(written, indent=2, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument(
        "--deterministic",
        action="store_true",
        help="suppress timestamps so outputs are byte-identical across runs",
    )
    common.add_argument(
        "--policy",
        choices=("strict", "absolute-value"),
        default=None,
        help="negative-log policy for temperatures above the cutoff",
    )
    common.add_argument(
        "--omega-max",
        type=float,
        default=None,
        help="upper integration limit in meV (default: pi * J)",
    )
    common.add_argument("--z", type=float, default=1.0, help="dynamic critical exponent")
    common.add_argument("--j-kelvin", type=float, default=3.1, help="exchange J/k_B in K")

    parser = argparse.ArgumentParser(
        prog="chainqfi",
        description="Spin-1/2 chain analysis: susceptibility fits, entanglement "
        "witness, dynamic susceptibility, and quantum Fisher information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "fit-susceptibility", parents=[common], help="fit chi(T) and extract J, g"
    )
    p.add_argument("chi_csv", help="input chi.csv")
    p.add_argument("--j0", type=float, default=3.0, help="initial J/k_B (K)")
    p.add_argument("--g0", type=float, default=2.0, help="initial g factor")
    p.add_argument("--c00", type=float, default=0.0, help="initial impurity constant")
    p.add_argument("--c10", type=float, default=0.0, help="initial diamagnetic constant")
    p.add_argument(
        "--freeze",
        action="append",
        metavar="NAME=VALUE",
        help="freeze a parameter (J, g, C0, C1) at the given value; repeatable",
    )
    p.add_argument(
        "--fit-c1",
        action="store_true",
        help="free the diamagnetic constant (degenerate with C0 unless --impurity-curie)",
    )
    p.add_argument(
        "--impurity-curie",
        action="store_true",
        help="model the impurity term as c0/T instead of a constant",
    )
    p.set_defaults(func=cmd_fit_susceptibility)

    p = sub.add_parser("witness", parents=[common], help="entanglement witness from chi(T)")
    p.add_argument("chi_csv", help="input chi.csv")
    p.add_argument("--g", type=float, required=True, help="Lande g factor")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser(
        "qfi", parents=[common], help="quantum Fisher information and scaling fit"
    )
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", action="store_true", help="pure-model evaluation")
    group.add_argument("--data", nargs="+", metavar="MANIFEST", help="dataset manifests")
    p.add_argument("--a-starykh", type=float, default=0.00065, help="line-shape amplitude")
    p.add_argument(
        "--t0-kelvin", type=float, default=None, help="high-energy cutoff (default pi*J/8)"
    )
    p.add_argument(
        "--temps", default="0.04,0.5,3,6.7", help="comma-separated temperatures (model mode)"
    )
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser(
        "spinon", parents=[common], help="powder-to-1D conversion with continuum bounds"
    )
    p.add_argument("--data", required=True, metavar="MANIFEST", help="dataset manifest")
    p.set_defaults(func=cmd_spinon)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--g", type=float, default=2.1)
    p.add_argument("--c0", type=float, default=0.0)
    p.add_argument("--c1", type=float, default=0.0)
    p.add_argument("--lattice-c", type=float, default=5.32)
    p.add_argument("--a-starykh", type=float, default=0.00065)
    p.add_argument("--t0-kelvin", type=float, default=None)
    p.add_argument("--temps", default="0.04,0.5")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="counting-noise scale")
    p.add_argument("--chi-noise", type=float, default=0.0, help="relative chi noise")
    p.add_argument("--elastic-amp", type=float, default=0.0)
    p.add_argument("--flat-bg", type=float, default=0.0)
    p.add_argument("--sample", default="synthetic-chain")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _POLICY_ERRORS as exc:
        _emit_error(exc)
        return 4
    except _NUMERIC_ERRORS as exc:
        _emit_error(exc)
        return 3
    except _CONFIG_ERRORS + (ChainQfiError,) as exc:
        _emit_error(exc)
        return 2


def _emit_error(exc: Exception) -> None:
    print(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
