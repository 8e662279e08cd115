"""Configuration-driven experiment harness.

Subcommands: solve, picard, fk, mollify, malliavin, density, holder,
kernel-check.  Every run writes a ``manifest.json`` with the fully resolved
config; CSV outputs use 17 significant digits so reruns are byte-identical
regardless of ``--threads``.  Figures are rendered next to each CSV.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, SpdelabError
from .feynman_kac import (
    ConstantCovarianceModel,
    QuenchedModel,
    derive_point_seed,
    fk_estimate,
    h_from_points,
    mollification_study,
)
from .field import sample_noise_lattice
from .grids import TimeGrid
from .io import write_lattice, write_matrix, write_solution
from .kernels import check_growth, check_h1a, covariance_matrix, factorize_sqrt
from .malliavin import density_kde, malliavin_norm, nondegeneracy_check
from .analysis import holder_exponent_time, holder_exponent_space
from .report import (
    Verdict,
    band_verdict,
    save_heatmap,
    save_lines,
    write_csv,
    write_json,
    write_verdicts,
)
from .solver import picard_solve, solve_ensemble, solve_mild

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdelab", description=__doc__)
    parser.add_argument("--config", required=True, help="experiment config (YAML)")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    parser.add_argument(
        "--check", action="store_true", help="run built-in verdicts; nonzero exit on failure"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
        "solve",
        "picard",
        "fk",
        "mollify",
        "malliavin",
        "density",
        "holder",
        "kernel-check",
    ):
        sub.add_parser(name)
    return parser


class Runner:
    def __init__(self, cfg: ExperimentConfig, out: Path, seed: int, threads: int, check: bool):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.threads = max(1, threads)
        self.check = check
        self.verdicts: list[Verdict] = []

    # -- shared helpers ----------------------------------------------------
    def manifest(self, command: str) -> None:
        payload = dict(self.cfg.resolved)
        payload["command"] = command
        payload["seed"] = self.seed
        payload["spdelab_version"] = __version__
        write_json(self.out / "manifest.json", payload)

    def factor(self):
        q = covariance_matrix(self.cfg.kernel, self.cfg.grid)
        return factorize_sqrt(q, clip_tol=self.cfg.run["clip_tol"], grid=self.cfg.grid)

    def lattice(self):
        return sample_noise_lattice(self.factor(), self.cfg.time_grid, self.seed)

    def observation_points(self):
        pts = self.cfg.run["points"]
        if pts:
            out = []
            for i, item in enumerate(pts):
                try:
                    t, x = float(item[0]), np.atleast_1d(np.asarray(item[1], dtype=float))
                except (TypeError, ValueError, IndexError):
                    raise ConfigError(f"run.points[{i}]: expected [t, [x...]]")
                out.append((t, x))
            return out
        center = np.array(
            [(lo + hi) / 2 for lo, hi in zip(self.cfg.grid.lower, self.cfg.grid.upper)]
        )
        return [(self.cfg.time_grid.t_end, center)]

    def default_t(self) -> float:
        return float(self.cfg.run["t"] or self.cfg.time_grid.t_end)

    def default_x(self) -> np.ndarray:
        if self.cfg.run["x"] is not None:
            return np.atleast_1d(np.asarray(self.cfg.run["x"], dtype=float))
        return np.array(
            [(lo + hi) / 2 for lo, hi in zip(self.cfg.grid.lower, self.cfg.grid.upper)]
        )

    def snap_to_grid(self, t: float) -> float:
        dt = self.cfg.time_grid.dt
        return round(t / dt) * dt

    def finish(self, command: str) -> int:
        self.manifest(command)
        if self.check:
            ok = write_verdicts(self.out / "verdicts.json", self.verdicts)
            for v in self.verdicts:
                status = "PASS" if v.passed else "FAIL"
                print(f"[{status}] {v.name}: measured={v.measured:.6g} "
                      f"expected={v.expected:.6g} tol={v.tolerance:.3g}")
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        return EXIT_OK

    # -- subcommands --------------------------------------------------------
    def cmd_solve(self) -> int:
        lattice = self.lattice()
        write_lattice(self.out / "lattice.bin", lattice)
        sol = solve_mild(self.cfg.coeffs, lattice)
        write_solution(self.out / "solution.bin", sol)
        self._solution_outputs(sol)
        if self.check:
            finite = float(np.all(np.isfinite(sol.values)))
            self.verdicts.append(band_verdict("solution_finite", finite, 1.0, 0.0))
        return self.finish("solve")

    def cmd_picard(self) -> int:
        lattice = self.lattice()
        sol, iters = picard_solve(self.cfg.coeffs, lattice)
        write_solution(self.out / "solution.bin", sol)
        self._solution_outputs(sol)
        write_json(self.out / "picard.json", {"iterations": iters})
        if self.check:
            ref = solve_mild(self.cfg.coeffs, lattice)
            scale = max(1.0, float(np.abs(ref.values).max()))
            diff = float(np.abs(sol.values - ref.values).max()) / scale
            self.verdicts.append(band_verdict("picard_vs_mild_relsup", diff, 0.0, 0.02))
        return self.finish("picard")

    def _solution_outputs(self, sol) -> None:
        times = sol.time_grid.times()
        nodes = sol.space_grid.nodes()
        xcols = [f"x{i}" for i in range(sol.space_grid.dim)]
        rows = []
        stride = max(1, sol.values.size // 200_000)
        for k in range(0, len(times), stride):
            for j in range(nodes.shape[0]):
                rows.append([times[k], *nodes[j], sol.values[k, j]])
        write_csv(self.out / "solution.csv", ["t", *xcols, "u"], rows)
        if sol.space_grid.dim == 1:
            save_heatmap(
                self.out / "solution.png",
                sol.values,
                extent=(
                    sol.space_grid.lower[0],
                    sol.space_grid.upper[0],
                    0.0,
                    sol.time_grid.t_end,
                ),
                title="u(t, x)",
            )

    def cmd_fk(self) -> int:
        lattice = self.lattice()
        model = QuenchedModel(lattice=lattice, kernel=self.cfg.kernel)
        h = h_from_points(self.cfg.coeffs.u0)
        points = self.observation_points()
        n_paths = int(self.cfg.run["n_paths"])

        def one(item):
            i, (t, x) = item
            return fk_estimate(h, model, self.snap_to_grid(t), x, n_paths,
                               derive_point_seed(self.seed, i))

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                estimates = list(pool.map(one, enumerate(points)))
        else:
            estimates = [one(item) for item in enumerate(points)]

        rows = [
            [e.t, *e.x, e.mean, e.std_error, e.ess, e.rejected_paths] for e in estimates
        ]
        xcols = [f"x{i}" for i in range(self.cfg.grid.dim)]
        write_csv(
            self.out / "fk.csv",
            ["t", *xcols, "mean", "std_error", "ess", "rejected_paths"],
            rows,
        )
        xs = [e.x[0] for e in estimates]
        save_lines(
            self.out / "fk.png",
            xs,
            [[e.mean for e in estimates]],
            yerr=[[e.std_error for e in estimates]],
            xlabel="x",
            ylabel="V(t, x)",
            title="Feynman-Kac estimates",
        )
        if self.check:
            self.verdicts.append(self._fk_zero_model_verdict())
        return self.finish("fk")

    def _fk_zero_model_verdict(self) -> Verdict:
        # built-in oracle: no noise, no drift, h(x) = x^2 => V(t, 0) = t
        t = self.snap_to_grid(min(0.5, self.cfg.time_grid.t_end))
        tg = self.cfg.time_grid
        model = ConstantCovarianceModel.zeros(0.0, tg)
        est = fk_estimate(lambda p: p[..., 0] ** 2, model, t, np.zeros(1), 20000, self.seed)
        tol = 3.0 * est.std_error
        return band_verdict("fk_zero_model_squared_drift", est.mean, t, tol)

    def cmd_mollify(self) -> int:
        lattice = self.lattice()
        model = QuenchedModel(lattice=lattice, kernel=self.cfg.kernel)
        h = h_from_points(self.cfg.coeffs.u0)
        t = self.snap_to_grid(self.default_t())
        x = self.default_x()
        eps = self.cfg.run["epsilons"] or [0.4, 0.2, 0.1, 0.05, 0.0]
        table = mollification_study(
            model, h, t, x, eps, int(self.cfg.run["n_paths"]), self.seed
        )
        rows = [[e, est.mean, est.std_error, est.ess] for e, est in table]
        write_csv(self.out / "mollify.csv", ["epsilon", "mean", "std_error", "ess"], rows)
        save_lines(
            self.out / "mollify.png",
            [e for e, _ in table],
            [[est.mean for _, est in table]],
            yerr=[[est.std_error for _, est in table]],
            xlabel="epsilon",
            ylabel="V_eps(t, x)",
            title="Mollification study",
        )
        if self.check:
            diffs = [abs(b.mean - a.mean) for (_, a), (_, b) in zip(table, table[1:])]
            decreasing = float(all(d2 <= d1 + 3 * (a.std_error + b.std_error)
                                   for d1, d2, (_, a), (_, b)
                                   in zip(diffs, diffs[1:], table, table[1:])))
            self.verdicts.append(band_verdict("mollify_cauchy_like", decreasing, 1.0, 0.0))
        return self.finish("mollify")

    def cmd_malliavin(self) -> int:
        lattice = self.lattice()
        sol = solve_mild(self.cfg.coeffs, lattice)
        t = self.snap_to_grid(self.default_t())
        x = self.default_x()
        n_s = max(8, int(self.cfg.run["s_points"]))
        steps_t = self.cfg.time_grid.index_of(t)
        idx = np.unique((np.arange(n_s) * steps_t) // n_s)
        s_grid = idx * self.cfg.time_grid.dt
        est = malliavin_norm(
            t, x, self.cfg.kernel, self.cfg.coeffs, sol, lattice, s_grid,
            int(self.cfg.run["n_paths"]), self.seed,
        )
        write_csv(
            self.out / "malliavin.csv",
            ["s", "h", "std_error"],
            [[s, v, e] for s, v, e in est.h_values],
        )
        write_json(
            self.out / "malliavin_summary.json",
            {
                "f_estimate": est.f_estimate,
                "f_std_error": est.f_std_error,
                "positivity_zscore": est.positivity_zscore,
                "integration_error": est.integration_error,
            },
        )
        save_lines(
            self.out / "malliavin.png",
            [s for s, _, _ in est.h_values],
            [[v for _, v, _ in est.h_values]],
            yerr=[[e for _, _, e in est.h_values]],
            xlabel="s",
            ylabel="H(s)",
            title="Malliavin-norm integrand",
        )
        if self.check:
            nondeg, _ = nondegeneracy_check(self.cfg.kernel, self.cfg.coeffs, self.cfg.grid)
            if nondeg:
                z = est.positivity_zscore if np.isfinite(est.positivity_zscore) else 1e9
                self.verdicts.append(
                    Verdict("malliavin_positive_5sigma", z, 5.0, 0.0, z >= 5.0)
                )
            else:
                self.verdicts.append(
                    band_verdict("malliavin_degenerate_zero", est.f_estimate, 0.0, 0.0)
                )
        return self.finish("malliavin")

    def cmd_density(self) -> int:
        factor = self.factor()
        values = solve_ensemble(
            self.cfg.coeffs, factor, self.cfg.time_grid,
            int(self.cfg.run["replicas"]), self.seed,
        )
        t = self.snap_to_grid(self.default_t())
        k = self.cfg.time_grid.index_of(t)
        x = self.default_x()
        j = int(np.argmin(np.linalg.norm(self.cfg.grid.nodes() - x, axis=1)))
        samples = values[k, j, :]
        est = density_kde(samples, bandwidth=self.cfg.run["bandwidth"])
        write_csv(
            self.out / "density.csv",
            ["u", "density"],
            list(zip(est.eval_grid, est.density)),
        )
        write_json(
            self.out / "density_summary.json",
            {"bandwidth": est.bandwidth, "n_samples": est.n_samples,
             "normalization": est.integral()},
        )
        save_lines(
            self.out / "density.png", est.eval_grid, [est.density],
            xlabel="u", ylabel="density", title=f"KDE of u(t={t:g}, x={x[0]:g})",
        )
        if self.check:
            self.verdicts.append(
                band_verdict("density_normalization", est.integral(), 1.0, 1e-3)
            )
        return self.finish("density")

    def cmd_holder(self) -> int:
        factor = self.factor()
        values = solve_ensemble(
            self.cfg.coeffs, factor, self.cfg.time_grid,
            int(self.cfg.run["replicas"]), self.seed,
        )
        ensemble = np.moveaxis(values, -1, 0)  # (R, T+1, N)
        dt = self.cfg.time_grid.dt
        dx = self.cfg.grid.spacing[0]
        time_lags = self.cfg.run["time_lags"] or list(dt * 2 ** np.arange(0, 6))
        space_lags = self.cfg.run["space_lags"] or list(dx * 2 ** np.arange(0, 6))
        x_index = self.cfg.grid.n_points // 2
        t_index = self.cfg.time_grid.steps
        rho, gamma = self.cfg.coeffs.rho, self.cfg.kernel.gamma
        results = []
        for p in self.cfg.run["p"]:
            rep_t = holder_exponent_time(
                ensemble, x_index, int(p), time_lags, dt=dt, rho=rho, gamma=gamma
            )
            rep_x = holder_exponent_space(
                ensemble, t_index, int(p), space_lags, dx=dx, rho=rho, gamma=gamma
            )
            results.extend([rep_t, rep_x])
        rows = []
        for rep in results:
            for lag, mom in zip(rep.lags, rep.moments):
                rows.append([rep.variable, rep.p, lag, mom, rep.exponent, rep.half_width])
        write_csv(
            self.out / "holder.csv",
            ["variable", "p", "lag", "moment", "exponent", "half_width"],
            rows,
        )
        verdict_payload = []
        for rep in results:
            passed = abs(rep.exponent - rep.predicted_supremum) <= 0.07
            verdict_payload.append(
                {
                    "name": f"holder_{rep.variable}_p{rep.p}",
                    "measured": rep.exponent,
                    "expected": rep.predicted_supremum,
                    "tolerance": 0.07,
                    "pass": bool(passed),
                    "half_width": rep.half_width,
                }
            )
            if self.check:
                self.verdicts.append(
                    band_verdict(
                        f"holder_{rep.variable}_p{rep.p}",
                        rep.exponent,
                        rep.predicted_supremum,
                        0.07,
                    )
                )
        write_json(self.out / "holder_verdicts.json", verdict_payload)
        rep0 = results[0]
        save_lines(
            self.out / "holder.png",
            rep0.lags,
            [rep0.moments],
            xlabel="lag",
            ylabel=f"E|increment|^{rep0.p}",
            title=f"{rep0.variable} regression (exponent {rep0.exponent:.3f})",
            logx=True,
            logy=True,
        )
        return self.finish("holder")

    def cmd_kernel_check(self) -> int:
        bounded, constant = check_growth(self.cfg.kernel, self.cfg.grid)
        factor = self.factor()
        write_matrix(self.out / "gram_factor.bin", factor.factor)
        times = self.cfg.run["h1a_times"] or list(np.geomspace(2e-3, 3e-2, 8))
        gamma_hat = check_h1a(self.cfg.kernel, self.cfg.grid, times)
        write_csv(
            self.out / "kernel_check.csv",
            ["growth_bounded", "growth_constant", "gamma_declared", "gamma_estimated",
             "reconstruction_error", "eigen_clip_count"],
            [[int(bounded), constant, self.cfg.kernel.gamma, gamma_hat,
              factor.reconstruction_error, factor.eigen_clip_count]],
        )
        if self.check:
            self.verdicts.append(
                band_verdict("h1a_gamma", gamma_hat, self.cfg.kernel.gamma, 0.15)
            )
            trace_scale = float(np.trace(factor.gram))
            self.verdicts.append(
                band_verdict(
                    "mercer_reconstruction",
                    factor.reconstruction_error / max(trace_scale, 1e-300),
                    0.0,
                    1e-10,
                )
            )
            self.verdicts.append(band_verdict("growth_bounded", float(bounded), 1.0, 0.0))
        return self.finish("kernel-check")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out = Path(args.out) if args.out else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else int(cfg.run["seed"])
    runner = Runner(cfg, out, seed, args.threads, args.check)
    command = args.command.replace("-", "_")
    try:
        return getattr(runner, f"cmd_{command}")()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SpdelabError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
