"""Command-line interface.

Subcommands: simulate, fit, two-step, effects, map, grid, replicate-paper,
replay.  Every run writes its artifacts plus a ``manifest.json`` recording
the exact argv, seed, kernel backend, and versions, from which ``replay``
reproduces the outputs bit-identically.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from ._backend import BACKEND
from . import dataio, diagnostics, simharness
from .effects import closed_form_effects, mc_effects, posterior_effects
from .errors import ConfigError, MatmedError
from .gibbs import SamplerConfig, run_chain
from .mediation_map import build_map, default_kappa_grid, mediation_quantities, true_active_set
from .tensor import unvec
from .model import MatrixDataset, ModelParams, Priors, paper_truth_params, simulate_dataset
from .rngutil import substream, substream_seed

_FMT = ".17g"


def _fmt(x) -> str:
    return format(float(x), _FMT)


def _resolve_seed(value: str) -> int:
    if value == "auto":
        return int(np.random.SeedSequence().entropy % (2 ** 63))
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"--seed must be an integer or 'auto', got {value!r}") from exc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, argv, seed, timings, extra=None):
    manifest = {
        "tool": "matmed",
        "version": __version__,
        "backend": BACKEND,
        "versions": {"numpy": np.__version__, "pandas": pd.__version__},
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "timings": timings,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def _write_effects_csv(path, eff):
    with open(path, "w") as fh:
        fh.write("effect,mean,lo,hi\n")
        for name in ("nie", "nde", "te"):
            lo, hi = eff.ci.get(name, (float("nan"), float("nan")))
            fh.write(f"{name.upper()},{_fmt(getattr(eff, name))},{_fmt(lo)},{_fmt(hi)}\n")
        for j, v in enumerate(eff.nie_j, start=1):
            fh.write(f"NIE_{j},{_fmt(v)},nan,nan\n")


def _write_matrix_csv(path, M, value_name="quantity"):
    p, q = M.shape
    with open(path, "w") as fh:
        fh.write(f"row,col,{value_name}\n")
        for r in range(p):
            for c in range(q):
                fh.write(f"{r},{c},{_fmt(M[r, c])}\n")


def _write_map_outputs(out: Path, mmap, prefix=""):
    _write_matrix_csv(out / f"{prefix}mediation_map.csv", mmap.matrix)
    for kappa, P in mmap.prob_maps.items():
        _write_matrix_csv(out / f"{prefix}prob_map_{kappa:g}.csv", P, "probability")
    with open(out / f"{prefix}map_metadata.json", "w") as fh:
        json.dump({"kappa_list": list(mmap.kappa_list), "kappa_rule": mmap.kappa_rule},
                  fh, indent=2, sort_keys=True)


def _theta_to_json(theta: ModelParams) -> dict:
    return {
        "A": theta.A.tolist(), "B": theta.B.tolist(), "mu": theta.mu.tolist(),
        "beta_ET": theta.beta_ET.tolist(), "Omega_ZT": theta.Omega_ZT.tolist(),
        "alpha_Y": theta.alpha_Y, "beta_EY": theta.beta_EY,
        "beta_TY": theta.beta_TY.tolist(), "beta_ZY": theta.beta_ZY.tolist(),
        "phi": theta.phi,
    }


def _theta_from_json(d: dict) -> ModelParams:
    return ModelParams(
        A=np.array(d["A"]), B=np.array(d["B"]), mu=np.array(d["mu"]),
        beta_ET=np.array(d["beta_ET"]), Omega_ZT=np.array(d["Omega_ZT"]).reshape(
            len(d["beta_ET"]), -1),
        alpha_Y=float(d["alpha_Y"]), beta_EY=float(d["beta_EY"]),
        beta_TY=np.array(d["beta_TY"]), beta_ZY=np.array(d["beta_ZY"]),
        phi=float(d["phi"]),
    )


def _load_dataset(args) -> MatrixDataset:
    data, _ = dataio.ingest(args.matrix, args.subjects)
    if args.preprocess != "none":
        data = dataio.preprocess(data, args.preprocess)
    return data


def _sampler_config(args, seed) -> SamplerConfig:
    return SamplerConfig(
        iterations=args.iters, burn_in=args.burnin, thin=args.thin, seed=seed,
        varimax_enabled=not args.no_varimax,
        priors=Priors(mu_mode=args.mu_mode),
    )


def cmd_simulate(args, argv):
    out = _outdir(args)
    seed = _resolve_seed(args.seed)
    t0 = time.perf_counter()
    truth = paper_truth_params(args.scenario, substream(seed, "truth", args.scenario))
    data, _ = simulate_dataset(truth, args.n, substream(seed, "dataset"))
    dataio.export_dataset(data, out / "matrix.csv", out / "subjects.csv")
    with open(out / "truth.json", "w") as fh:
        json.dump(_theta_to_json(truth), fh, indent=2, sort_keys=True)
    _write_manifest(out, "simulate", argv, seed,
                    {"total_s": time.perf_counter() - t0},
                    {"scenario": args.scenario, "n": args.n})
    return 0


def cmd_fit(args, argv):
    out = _outdir(args)
    seed = _resolve_seed(args.seed)
    t0 = time.perf_counter()
    data = _load_dataset(args)
    cfg = _sampler_config(args, seed)
    draws = run_chain(data, data.dims(args.p0, args.q0), cfg)
    t_chain = time.perf_counter() - t0

    eff = posterior_effects(draws, level=args.ci_level,
                            z_ref=data.Z.mean(axis=0) if data.K else None)
    _write_effects_csv(out / "effects.csv", eff)

    mean_q = draws.quantities.mean(axis=0)
    kappas = args.kappa if args.kappa else default_kappa_grid(mean_q, args.kappa_rule)
    rule = "explicit" if args.kappa else args.kappa_rule
    mmap = build_map(draws, kappas, kappa_rule=rule)
    _write_map_outputs(out, mmap)

    dic_val, p_d = diagnostics.dic(draws, data)
    ve = diagnostics.variance_explained(draws, data)
    with open(out / "fit_summary.json", "w") as fh:
        json.dump({
            "dic": dic_val, "p_d": p_d, "ve": ve,
            "dic_variant": "DIC (complete-data, plug-in T)",
            "R": draws.R, "phi_mean": float(draws.phi.mean()),
        }, fh, indent=2, sort_keys=True)
    _write_manifest(out, "fit", argv, seed,
                    {"chain_s": t_chain, "total_s": time.perf_counter() - t0},
                    {"p0": args.p0, "q0": args.q0})
    return 0


def cmd_two_step(args, argv):
    from .twostep import two_step_fit

    out = _outdir(args)
    t0 = time.perf_counter()
    data = _load_dataset(args)
    fit = two_step_fit(data, args.p0, args.q0)
    eff = closed_form_effects(fit.params(),
                              z_ref=data.Z.mean(axis=0) if data.K else None)
    _write_effects_csv(out / "effects.csv", eff)
    q = fit.mediation_quantities()
    _write_matrix_csv(out / "mediation_map.csv", unvec(q, data.p, data.q))
    with open(out / "fit_summary.json", "w") as fh:
        json.dump({"ve": fit.mpca.explained_variance,
                   "converged": fit.mpca.converged, "n_iter": fit.mpca.n_iter},
                  fh, indent=2, sort_keys=True)
    _write_manifest(out, "two-step", argv, None,
                    {"total_s": time.perf_counter() - t0},
                    {"p0": args.p0, "q0": args.q0})
    return 0


def cmd_effects(args, argv):
    out = _outdir(args)
    t0 = time.perf_counter()
    with open(args.truth) as fh:
        theta = _theta_from_json(json.load(fh))
    eff = closed_form_effects(theta)
    _write_effects_csv(out / "effects.csv", eff)
    if args.mc:
        seed = _resolve_seed(args.seed)
        mc = mc_effects(theta, args.mc, substream(seed, "mc"))
        with open(out / "effects_mc.csv", "w") as fh:
            fh.write("effect,estimate,mc_se\n")
            for name in ("nie", "nde", "te"):
                fh.write(f"{name.upper()},{_fmt(getattr(mc, name))},"
                         f"{_fmt(mc.mc_se[name])}\n")
    else:
        seed = None
    _write_manifest(out, "effects", argv, seed, {"total_s": time.perf_counter() - t0})
    return 0


def cmd_map(args, argv):
    out = _outdir(args)
    t0 = time.perf_counter()
    with open(args.truth) as fh:
        theta = _theta_from_json(json.load(fh))
    q = mediation_quantities(theta)
    _write_matrix_csv(out / "mediation_map.csv", unvec(q, theta.p, theta.q))
    active = true_active_set(theta.A, theta.B, theta.beta_ET, theta.beta_TY)
    _write_matrix_csv(out / "active_set.csv",
                      unvec(active.astype(float), theta.p, theta.q), "active")
    _write_manifest(out, "map", argv, None, {"total_s": time.perf_counter() - t0})
    return 0


def cmd_grid(args, argv):
    out = _outdir(args)
    seed = _resolve_seed(args.seed)
    t0 = time.perf_counter()
    data = _load_dataset(args)
    cfg = _sampler_config(args, seed)
    results = diagnostics.model_grid_search(data, args.p0, args.q0, cfg,
                                            z_ref=data.Z.mean(axis=0) if data.K else None,
                                            workers=args.workers)
    with open(out / "grid_summary.csv", "w") as fh:
        fh.write("p0,q0,dic,ve,nie,nde,te,nie_lo,nie_hi,nde_lo,nde_hi,te_lo,te_hi,error\n")
        for r in results:
            if r.error is not None:
                fh.write(f"{r.p0},{r.q0},nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,"
                         f"\"{r.error}\"\n")
                continue
            e = r.effects
            fh.write(",".join([
                str(r.p0), str(r.q0), _fmt(r.dic), _fmt(r.ve),
                _fmt(e.nie), _fmt(e.nde), _fmt(e.te),
                _fmt(e.ci["nie"][0]), _fmt(e.ci["nie"][1]),
                _fmt(e.ci["nde"][0]), _fmt(e.ci["nde"][1]),
                _fmt(e.ci["te"][0]), _fmt(e.ci["te"][1]), "",
            ]) + "\n")
    _write_manifest(out, "grid", argv, seed, {"total_s": time.perf_counter() - t0},
                    {"p0_range": args.p0, "q0_range": args.q0,
                     "dic_variant": "DIC (complete-data, plug-in T)"})
    return 0


def cmd_replicate_paper(args, argv):
    out = _outdir(args)
    seed = _resolve_seed(args.seed)
    t0 = time.perf_counter()
    scale = simharness.PAPER_SCALE if args.full_scale else simharness.DESK_SCALE
    replicates = args.replicates or scale["replicates"]
    scenarios = ["low", "high"] if args.scenario == "both" else [args.scenario]
    ns = args.n or [300]

    all_results = []
    frames = []
    for scenario in scenarios:
        truth = simharness.scenario_truth(scenario, seed)
        for n in ns:
            results, _ = simharness.run_simulation(
                scenario, n, replicates, master_seed=seed,
                iterations=scale["iterations"], burn_in=scale["burn_in"],
                thin=scale["thin"], workers=args.workers)
            all_results.append((scenario, results, truth))
            frames.append(simharness.summarize_table1(results, truth))
    table1 = pd.concat(frames, ignore_index=True)
    table1.to_csv(out / "table1.csv", index=False, float_format="%.17g")

    rows = []
    for scenario, results, truth in all_results:
        for r in results:
            rows.append({
                "scenario": r.scenario, "n": r.n, "method": r.method,
                "replicate": r.replicate, "nie": r.nie, "nde": r.nde, "te": r.te,
                "auc": r.auc, "seconds": r.seconds, "seed": r.seed,
                "error": r.error or "",
            })
    pd.DataFrame(rows).to_csv(out / "replicates.csv", index=False, float_format="%.17g")

    if args.figures_data:
        for scenario, results, truth in all_results:
            simharness.export_figure_data(results, truth, out / "figure_data")
    _write_manifest(out, "replicate-paper", argv, seed,
                    {"total_s": time.perf_counter() - t0},
                    {"replicates": replicates, "scenarios": scenarios, "n": ns,
                     "scale": "paper" if args.full_scale else "desk"})
    return 0


def cmd_replay(args, argv):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    stored = list(manifest["argv"])
    if "--out" in stored:
        i = stored.index("--out")
        stored[i + 1] = args.out
    else:
        stored += ["--out", args.out]
    return main(stored)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matmed",
                                 description="Joint mediation analysis for "
                                             "matrix-valued mediators")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_data_opts(p):
        p.add_argument("--matrix", required=True, help="long-format matrix CSV")
        p.add_argument("--subjects", required=True, help="subjects CSV")
        p.add_argument("--preprocess", choices=["none", "center", "center+scale"],
                       default="none")

    def add_sampler_opts(p):
        p.add_argument("--iters", type=int, default=10_000)
        p.add_argument("--burnin", type=int, default=3_000)
        p.add_argument("--thin", type=int, default=5)
        p.add_argument("--no-varimax", action="store_true")
        p.add_argument("--mu-mode", choices=["sampled", "fixed-at-sample-mean"],
                       default="sampled")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--scenario", choices=["low", "high"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the joint model by MCMC")
    add_data_opts(p)
    add_sampler_opts(p)
    p.add_argument("--p0", type=int, required=True)
    p.add_argument("--q0", type=int, required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ci-level", type=float, default=0.90)
    p.add_argument("--kappa", type=float, nargs="*", default=None)
    p.add_argument("--kappa-rule", choices=["range", "empirical"], default="range")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("two-step", help="MPCA + separate regressions baseline")
    add_data_opts(p)
    p.add_argument("--p0", type=int, required=True)
    p.add_argument("--q0", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_two_step)

    p = sub.add_parser("effects", help="effect decomposition for stored parameters")
    p.add_argument("--truth", required=True, help="truth.json from simulate")
    p.add_argument("--mc", type=int, default=0, help="also run MC with this sample size")
    p.add_argument("--seed", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("map", help="mediation map for stored parameters")
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("grid", help="latent-dimension grid search")
    add_data_opts(p)
    add_sampler_opts(p)
    p.add_argument("--p0", type=int, nargs="+", required=True)
    p.add_argument("--q0", type=int, nargs="+", required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("replicate-paper", help="run the synthetic replicate study")
    p.add_argument("--scenario", choices=["low", "high", "both"], default="low")
    p.add_argument("--n", type=int, nargs="*", default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--full-scale", action="store_true",
                   help="paper scale (500 replicates, 10k iterations)")
    p.add_argument("--figures-data", action="store_true",
                   help="also export scatter/heatmap CSVs")
    p.add_argument("--table1", action="store_true",
                   help="kept for symmetry; table1.csv is always written")
    p.add_argument("--desk-scale", action="store_true",
                   help="kept for symmetry; desk scale is the default")
    p.add_argument("--seed", default="0")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_replicate_paper)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.func is cmd_replay:
            return cmd_replay(args, argv)
        return args.func(args, argv)
    except ConfigError as exc:
        print(json.dumps({"category": exc.category, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except MatmedError as exc:
        print(json.dumps({"category": exc.category, "message": str(exc)}),
              file=sys.stderr)
        return 1


def console_entry():
    raise SystemExit(main(sys.argv[1:]))
