"""End-to-end verification experiments behind the CLI subcommands.

Every driver is a pure function of its configuration plus a master seed: all
randomness flows through streams keyed by (seed, fixed task indices), results
are assembled in task order, and verdict dictionaries validate against
:data:`VERDICT_SCHEMA`. Running with a different worker count cannot change a
single byte of output.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.special import betainc

import jsonschema

from . import brw, gaf, harness, trees, urn, yule
from .harness import (
    ConditionalExperiment,
    calibrate_ks_threshold,
    fdd_covariance_check,
    freeze_lattice_path,
    joint_independence_check,
    ks_statistic,
    normal_cdf,
    normal_mixture_cdf,
    run_conditional,
)
from .rng import stream

VERDICT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "brwlab experiment verdict",
    "type": "object",
    "properties": {
        "model": {"type": "string"},
        "n": {"type": "integer"},
        "M": {"type": "integer"},
        "h": {"type": ["integer", "null"]},
        "frozen_path_id": {"type": ["integer", "string", "null"]},
        "statistic": {"type": "string"},
        "ks": {"type": ["number", "null"]},
        "p_value": {"type": ["number", "null"]},
        "target": {"type": "string"},
        "pass": {"type": "boolean"},
    },
    "required": [
        "model", "n", "M", "h", "frozen_path_id",
        "statistic", "ks", "p_value", "target", "pass",
    ],
    "additionalProperties": True,
}


def validate_verdict(v: dict) -> None:
    jsonschema.validate(v, VERDICT_SCHEMA)


def verdict(
    model: str,
    n: int,
    m_count: int,
    statistic: str,
    target: str,
    passed: bool,
    h=None,
    frozen_path_id=None,
    ks=None,
    p_value=None,
    **extra,
) -> dict:
    v = {
        "model": model,
        "n": int(n),
        "M": int(m_count),
        "h": None if h is None else int(h),
        "frozen_path_id": frozen_path_id,
        "statistic": statistic,
        "ks": None if ks is None else float(ks),
        "p_value": None if p_value is None else float(p_value),
        "target": target,
        "pass": bool(passed),
    }
    v.update(extra)
    validate_verdict(v)
    return v


def write_verdict(v: dict, path) -> None:
    validate_verdict(v)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(v, sort_keys=True, indent=2, allow_nan=False))
        fh.write("\n")


def pmap(fn, payloads, workers: int = 1):
    """Order-preserving map; identical results for any worker count."""
    payloads = list(payloads)
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, payloads))


# --- conditional Galton-Watson CLT panel -----------------------------------------

def gw_clt_panel(
    count_pmf: dict,
    n: int = 16,
    horizon: int = 8,
    continuations: int = 10**4,
    frozen: int = 50,
    seed: int = 1,
    ks_threshold: float = 0.03,
    pass_fraction: float = 0.9,
    sigma2: float | None = None,
    sigma2_replicates: int = 10**5,
    workers: int = 1,
) -> dict:
    """Frozen-path panel for the conditional population CLT.

    For each frozen path the conditional law of m^{n/2}(Nhat_infty - N_n/m^n)
    is tested against N(0, sigma2 * Nhat_infty(omega)); the self-normalized
    variant divides by sqrt(Nhat_infty) per continuation and targets the fixed
    N(0, sigma2).
    """
    law = brw.count_and_shift(count_pmf, {0: 1.0})
    if sigma2 is None:
        sigma2 = harness.estimate_sigma2(law, n, sigma2_replicates, stream(seed, 900))

    def one_path(path_id: int):
        snap = freeze_lattice_path(law, n, stream(seed, 100, path_id))
        out = []
        for tag, stat_name in ((200, "gw_residual"), (300, "gw_residual_selfnorm")):
            exp = ConditionalExperiment("gw", snap, continuations, horizon, stat_name)
            sample, diag = run_conditional(exp, stream(seed, tag, path_id))
            var = sigma2 * (diag["n_hat_infty"] if stat_name == "gw_residual" else 1.0)
            rep = ks_statistic(sample, normal_cdf(var), target=f"N(0, {var:.6g})")
            out.append((stat_name, rep, diag))
        return out

    results = pmap(one_path, range(frozen), workers)
    verdicts = []
    summary = {}
    for stat_idx, stat_name in enumerate(("gw_residual", "gw_residual_selfnorm")):
        ks_vals = []
        for path_id, res in enumerate(results):
            name, rep, diag = res[stat_idx]
            ks_vals.append(rep.statistic)
            verdicts.append(
                verdict(
                    "gw-clt", n, continuations, name, rep.target,
                    rep.statistic <= ks_threshold,
                    h=horizon, frozen_path_id=path_id,
                    ks=rep.statistic, p_value=rep.p_value,
                    n_hat_infty=diag["n_hat_infty"],
                )
            )
        frac = float(np.mean(np.asarray(ks_vals) <= ks_threshold))
        summary[stat_name] = verdict(
            "gw-clt", n, continuations, f"{stat_name}_panel",
            f"KS <= {ks_threshold} for >= {pass_fraction:.0%} of {frozen} paths",
            frac >= pass_fraction,
            h=horizon, ks=float(np.median(ks_vals)),
            pass_fraction=frac, sigma2_hat=float(sigma2),
        )
    passed = all(v["pass"] for v in summary.values())
    return {"pass": passed, "summary": list(summary.values()), "verdicts": verdicts,
            "sigma2_hat": float(sigma2)}


# --- finite-dimensional covariance of the rescaled tail -----------------------------

def fclt_covariance(
    count_pmf: dict,
    shift_pmf: dict,
    n: int = 20,
    horizon: int = 8,
    continuations: int = 10**4,
    grid=(0.0, 0.5, -0.5),
    paths: int = 24,
    seed: int = 1,
    weight_tol: float = 0.05,
    cov_tol: float = 0.10,
    sigma2: float | None = None,
    sigma2_replicates: int = 10**5,
    workers: int = 1,
) -> dict:
    """Finite-dimensional covariance checks for the rescaled martingale tail.

    Three layers, because the finite-n gap between a single frozen path's
    weight sums and the asymptotic kernel decays only like 1/sqrt(n):

    * the exp(tau^2 u v) weight-sum structure at n, checked on the
      deterministic one-child-in-place/one-child-up cluster, whose analytic
      martingale is identically 1, so the exact finite-n value isolates the
      Taylor factor (tolerance ``weight_tol``);
    * per frozen path of the stochastic law, the conditional Monte Carlo
      covariance of (D(u_i)) against its exact finite-n conditional target
      sigma2 * sum_j a_j(u) a_j(v) (tolerance ``cov_tol``);
    * the panel average of those covariance matrices against the asymptotic
      kernel sigma2 * mean(Nhat_infty) * exp(tau^2 u_i u_j), which averages the
      per-path martingale fluctuation down (tolerance ``cov_tol``).

    The literal single-path asymptotic comparison is computed and reported (it
    is realization-luck at desk-scale n and is not asserted).
    """
    det_law = brw.rrt_split()
    det_snap = freeze_lattice_path(det_law, n, stream(seed, 50))
    grid_arr = np.asarray(grid, dtype=np.complex128)
    det_report = fdd_covariance_check(det_snap, grid_arr, tau2=det_law.displacement_variance)
    w_err = float(det_report.weight_rel_errors().max())

    law = brw.count_and_shift(count_pmf, shift_pmf)
    tau2 = law.displacement_variance
    if sigma2 is None:
        sigma2 = harness.estimate_sigma2(law, n, sigma2_replicates, stream(seed, 900))

    def one_path(p: int):
        snap = freeze_lattice_path(law, n, stream(seed, 100, p))
        rep = fdd_covariance_check(
            snap, grid_arr, tau2=tau2, sigma2=sigma2,
            horizon=horizon, replicates=continuations, rng=stream(seed, 200, p),
        )
        return rep

    reports = pmap(one_path, range(paths), workers)
    fact_errs = [
        float(np.abs(r.mc_covariance / (sigma2 * r.weight_sums) - 1.0).max()) for r in reports
    ]
    mean_cov = np.mean([r.mc_covariance for r in reports], axis=0)
    mean_nhat = float(np.mean([r.n_hat_infty for r in reports]))
    kernel = sigma2 * mean_nhat * np.exp(tau2 * np.outer(grid_arr, grid_arr))
    panel_err = float(np.abs(mean_cov / kernel - 1.0).max())
    literal_err = float(reports[0].mc_rel_errors().max())

    verdicts = [
        verdict(
            "brw-fclt", n, 0, "weight_sums",
            f"sum_j a_j(u) a_j(v) within {weight_tol:.0%} of Nhat e^(tau2 u v)",
            w_err <= weight_tol, h=None, ks=None, max_rel_error=w_err,
            tau2=det_law.displacement_variance, n_hat_infty=det_report.n_hat_infty,
        ),
        verdict(
            "brw-fclt", n, continuations, "covariance_factorization",
            f"E D(u)D(v) within {cov_tol:.0%} of sigma2 sum_j a_j(u)a_j(v), every path",
            max(fact_errs) <= cov_tol, h=horizon, ks=None,
            max_rel_error=max(fact_errs), paths=paths, sigma2_hat=float(sigma2),
        ),
        verdict(
            "brw-fclt", n, continuations, "covariance_kernel_mean",
            f"panel-mean E D(u)D(v) within {cov_tol:.0%} of sigma2 Nhat e^(tau2 u v)",
            panel_err <= cov_tol, h=horizon, ks=None, max_rel_error=panel_err,
            paths=paths, single_path_rel_error=literal_err,
        ),
    ]
    return {
        "pass": all(v["pass"] for v in verdicts),
        "verdicts": verdicts,
        "report": reports[0],
        "det_report": det_report,
        "factorization_errors": fact_errs,
        "panel_error": panel_err,
    }


def fdd_table_rows(report) -> list[tuple]:
    rows = []
    g = report.grid
    for i in range(g.size):
        for j in range(g.size):
            rows.append(
                (
                    g[i].real, g[i].imag, g[j].real, g[j].imag,
                    report.weight_sums[i, j].real, report.weight_targets[i, j].real,
                    None if report.mc_covariance is None else report.mc_covariance[i, j].real,
                    None if report.mc_targets is None else report.mc_targets[i, j].real,
                )
            )
    return rows


# --- Gaussian analytic function suite ------------------------------------------------

def gaf_suite(
    u: complex = 0.5,
    v: complex = 0.5,
    replicates: int = 10**5,
    seed: int = 1,
    se_band: float = 3.0,
    ks_threshold: float = 0.01,
) -> dict:
    """Covariance, stationarity, and marginal-normality checks for xi."""
    est, est_conj = gaf.covariance_check(u, v, replicates, stream(seed, 10))
    stat_a = gaf.stationarity_check(0.0, 1.0, replicates, stream(seed, 20))
    stat_b = gaf.stationarity_check(1.0, 2.0, replicates, stream(seed, 21))
    vals = gaf.sample_values(np.array([0.0]), replicates, stream(seed, 30)).real[:, 0]
    ks0 = ks_statistic(vals, normal_cdf(1.0), target="N(0,1)")
    deriv = gaf.sample_derivatives(np.array([0.0]), replicates, stream(seed, 31)).real[:, 0]
    ks1 = ks_statistic(deriv, normal_cdf(1.0), target="N(0,1)")
    verdicts = [
        verdict(
            "gaf-check", 0, replicates, "covariance",
            f"E xi(u)xi(v) = exp(uv) = {np.exp(complex(u) * complex(v)):.6g}",
            est.within <= se_band, ks=None, estimate=abs(est.estimate),
            se=est.se, deviation_in_se=est.within,
        ),
        verdict(
            "gaf-check", 0, replicates, "covariance_conjugate",
            f"E xi(u)conj(xi(v)) = exp(u conj v)",
            est_conj.within <= se_band, ks=None, deviation_in_se=est_conj.within,
        ),
        verdict(
            "gaf-check", 0, replicates, "stationarity_gap1",
            "damped covariance exp(-1/2) at unit gap, both placements",
            stat_a.within <= se_band and stat_b.within <= se_band
            and abs(stat_a.estimate - stat_b.estimate) <= se_band * (stat_a.se + stat_b.se),
            ks=None, estimate_01=stat_a.estimate.real, estimate_12=stat_b.estimate.real,
        ),
        verdict(
            "gaf-check", 0, replicates, "xi0_normality", "KS vs N(0,1)",
            ks0.statistic <= ks_threshold, ks=ks0.statistic, p_value=ks0.p_value,
        ),
        verdict(
            "gaf-check", 0, replicates, "xi_prime0_normality", "KS vs N(0,1)",
            ks1.statistic <= ks_threshold, ks=ks1.statistic, p_value=ks1.p_value,
        ),
    ]
    return {"pass": all(w["pass"] for w in verdicts), "verdicts": verdicts}


# --- Yule suite -----------------------------------------------------------------------

def yule_suite(
    n: int = 10**4,
    replicates: int = 10**4,
    kendall_n: int = 10**5,
    kendall_paths: int = 50,
    burn_in: int = 1000,
    seed: int = 1,
    ks_threshold: float = 0.02,
    pass_fraction: float = 0.9,
    calibration_runs: int = 200,
    workers: int = 1,
) -> dict:
    """Exp(1) population limit plus the Kendall-spacing panel."""
    sample = yule.population_limit_sample(n, replicates, stream(seed, 10))
    rep = ks_statistic(sample, harness.exp1_cdf, target="Exp(1)")
    kendall_size = kendall_n - burn_in
    null_thresh = calibrate_ks_threshold(kendall_size, calibration_runs, stream(seed, 20))

    def one_path(p: int) -> float:
        times = yule.sample_times(kendall_n, 1.0, stream(seed, 30, p))
        return yule.kendall_check(times, burn_in=burn_in).statistic

    ks_vals = np.array(pmap(one_path, range(kendall_paths), workers))
    frac = float(np.mean(ks_vals <= null_thresh))
    verdicts = [
        verdict(
            "yule-check", n, replicates, "population_limit", "KS vs Exp(1)",
            rep.statistic <= ks_threshold, ks=rep.statistic, p_value=rep.p_value,
        ),
        verdict(
            "yule-check", kendall_n, kendall_paths, "kendall_spacings",
            f"null-calibrated KS <= {null_thresh:.4g} for >= {pass_fraction:.0%} of paths",
            frac >= pass_fraction, ks=float(np.median(ks_vals)),
            pass_fraction=frac, threshold=null_thresh, burn_in=burn_in,
        ),
    ]
    return {"pass": all(v["pass"] for v in verdicts), "verdicts": verdicts}


# --- tree drivers -----------------------------------------------------------------------

def _tree_block(payload) -> np.ndarray:
    kind_name, sizes, block_rows, seed, block_id = payload
    return trees.path_length_batch(kind_name, sizes, block_rows, seed, path_prefix=(40, block_id))


def tree_path_lengths(
    kind_name: str,
    sizes,
    replicates: int,
    seed: int,
    workers: int = 1,
    block_rows: int = 250,
) -> np.ndarray:
    """Replicate path-length matrix, assembled from fixed-size blocks.

    The block decomposition is part of the configuration, so worker count
    never affects which stream produced a row.
    """
    sizes = tuple(sorted(int(s) for s in sizes))
    blocks = []
    done = 0
    block_id = 0
    while done < replicates:
        rows = min(block_rows, replicates - done)
        blocks.append((kind_name, sizes, rows, seed, block_id))
        done += rows
        block_id += 1
    return np.vstack(pmap(_tree_block, blocks, workers))


def tree_residuals(kind_name: str, matrix: np.ndarray, sizes) -> dict[int, np.ndarray]:
    """Normalized residuals sqrt(n/(tau2 ln n)) (brw(N_big) - brw(n)) per checkpoint."""
    k = trees.kind(kind_name)
    sizes = sorted(int(s) for s in sizes)
    n_big = sizes[-1]
    surro = (matrix[:, -1] - k.d / k.lam * n_big * math.log(n_big)) / n_big
    out = {}
    for i, n in enumerate(sizes[:-1]):
        center = (matrix[:, i] - k.d / k.lam * n * math.log(n)) / n
        out[n] = np.sqrt(k.lam * n / (k.tau2 * math.log(n))) * (surro - center)
    return out


def tree_clt(
    kind_name: str,
    checkpoints=(100, 316, 1000),
    n_big: int = 10**5,
    replicates: int = 4000,
    seed: int = 1,
    ks_bound: float = 0.08,
    batches: int = 5,
    workers: int = 1,
) -> dict:
    """Slow-rate tree CLT: KS bound at the deepest checkpoint plus a trend check.

    The convergence rate is only 1/sqrt(log n), so the bound is loose and the
    batch-median KS must decrease along the checkpoint ladder.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    sizes = checkpoints + [n_big]
    matrix = tree_path_lengths(kind_name, sizes, replicates, seed, workers=workers)
    residuals = tree_residuals(kind_name, matrix, sizes)
    ks_all = {n: ks_statistic(residuals[n], normal_cdf(1.0), target="N(0,1)") for n in checkpoints}
    medians = {}
    bounds = np.linspace(0, replicates, batches + 1).astype(int)
    for n in checkpoints:
        vals = [
            ks_statistic(residuals[n][bounds[i]: bounds[i + 1]], normal_cdf(1.0)).statistic
            for i in range(batches)
        ]
        medians[n] = float(np.median(vals))
    med_seq = [medians[n] for n in checkpoints]
    monotone = all(med_seq[i] > med_seq[i + 1] for i in range(len(med_seq) - 1))
    deep = checkpoints[-1]
    verdicts = [
        verdict(
            f"tree-{kind_name}", deep, replicates, "residual_normality",
            f"KS vs N(0,1) <= {ks_bound}", ks_all[deep].statistic <= ks_bound,
            ks=ks_all[deep].statistic, p_value=ks_all[deep].p_value,
            n_big=n_big,
        ),
        verdict(
            f"tree-{kind_name}", deep, replicates, "residual_trend",
            "batch-median KS decreases along n = " + ",".join(map(str, checkpoints)),
            monotone, ks=None, medians={str(n): medians[n] for n in checkpoints},
        ),
    ]
    return {
        "pass": all(v["pass"] for v in verdicts),
        "verdicts": verdicts,
        "ks_by_n": {n: ks_all[n].statistic for n in checkpoints},
        "medians": medians,
        "residuals": residuals,
    }


def tree_coverage(
    kind_name: str = "bst",
    n: int = 1000,
    n_small: int = 100,
    n_big: int = 10**5,
    replicates: int = 1000,
    alpha: float = 0.05,
    seed: int = 1,
    band: tuple[float, float] = (0.90, 1.00),
    trend_slack: float = 0.005,
    workers: int = 1,
) -> dict:
    """Empirical coverage of the strong prediction intervals.

    Each replicate grows one path to n_big; the interval built at n must cover
    that path's own deep surrogate. Improvement from n_small to n is measured
    as distance of the coverage to the nominal level.
    """
    k = trees.kind(kind_name)
    sizes = [n_small, n, n_big]
    matrix = tree_path_lengths(kind_name, sizes, replicates, seed, workers=workers)
    surro = (matrix[:, -1] - k.d / k.lam * n_big * math.log(n_big)) / n_big
    cover = {}
    for i, nn in enumerate((n_small, n)):
        lo, hi = np.array(
            [trees.prediction_interval(pl, nn, alpha, kind_name) for pl in matrix[:, i]]
        ).T
        cover[nn] = float(np.mean((lo <= surro) & (surro <= hi)))
    nominal = 1 - alpha
    improved = abs(cover[n] - nominal) <= abs(cover[n_small] - nominal) + trend_slack
    in_band = band[0] <= cover[n] <= band[1]
    verdicts = [
        verdict(
            f"tree-{kind_name}", n, replicates, "interval_coverage",
            f"coverage of the {n_big}-node surrogate in [{band[0]}, {band[1]}]",
            in_band, ks=None, coverage=cover[n], alpha=alpha,
        ),
        verdict(
            f"tree-{kind_name}", n, replicates, "coverage_trend",
            f"|coverage - {nominal}| no worse than at n = {n_small}",
            improved, ks=None, coverage_small=cover[n_small], coverage=cover[n],
        ),
    ]
    return {"pass": all(v["pass"] for v in verdicts), "verdicts": verdicts, "coverage": cover}


def tree_independence(
    kind_name: str,
    paths: int = 1000,
    n: int = 1000,
    n_big: int = 10**5,
    seed: int = 1,
    workers: int = 1,
) -> dict:
    """Correlation between the normalized residual and the limit surrogate."""
    matrix = tree_path_lengths(kind_name, [n, n_big], paths, seed, workers=workers)
    res = tree_residuals(kind_name, matrix, [n, n_big])[n]
    k = trees.kind(kind_name)
    surro = (matrix[:, -1] - k.d / k.lam * n_big * math.log(n_big)) / n_big
    rep = joint_independence_check(res, surro)
    v = verdict(
        f"tree-{kind_name}", n, paths, "joint_independence",
        f"|corr| <= 3/sqrt(M) = {rep.threshold:.4g}", rep.passed,
        ks=None, correlation=rep.correlation,
    )
    return {"pass": v["pass"], "verdicts": [v], "report": rep}


# --- Polya urn suite ----------------------------------------------------------------------

def _beta_cdf(a: float, b: float):
    return lambda x: betainc(a, b, np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0))


def polya_suite(
    b: int = 1,
    r: int = 1,
    c: int = 1,
    n: int = 10**4,
    replicates: int = 10**4,
    asw_paths: int = 50,
    asw_continuations: int = 10**5,
    seed: int = 1,
    ks_threshold: float = 0.02,
    asw_threshold: float = 0.03,
    pass_fraction: float = 0.9,
    enum_n: int = 12,
    workers: int = 1,
) -> dict:
    """Beta limit, Beta CLT, conditional panel, mixture, and the exact DP oracle."""
    # limit law of the proportion
    z = urn.simulate_proportions(b, r, c, n, replicates, stream(seed, 10))
    rep_beta = ks_statistic(z, _beta_cdf(b / c, r / c), target=f"Beta({b / c:g},{r / c:g})")
    # CLT for the Beta distribution itself
    rep_clt = urn.beta_clt_check(n, n, replicates, stream(seed, 20))
    # frozen-path conditional panel
    def one_path(p: int):
        state = urn.run(urn.initial(b, r, c), n, stream(seed, 30, p))
        rep, diag = urn.asw_check(state, asw_continuations, stream(seed, 31, p))
        return rep.statistic, diag["variance_hat"], rep
    panel = pmap(one_path, range(asw_paths), workers)
    ks_vals = np.array([p[0] for p in panel])
    frac = float(np.mean(ks_vals <= asw_threshold))
    # pooled mixture across the same frozen paths
    pool_rng = stream(seed, 40)
    per_path = max(200, asw_continuations // asw_paths)
    pooled = []
    for p in range(asw_paths):
        state = urn.run(urn.initial(b, r, c), n, stream(seed, 30, p))
        a_p, b_p = urn.conditional_limit_law(state)
        z_inf = pool_rng.beta(a_p, b_p, size=per_path)
        pooled.append(math.sqrt(n) * (z_inf - state.proportion))
    pooled = np.concatenate(pooled)
    z_mix = stream(seed, 41).beta(b / c, r / c, size=2 * 10**4)
    mix_cdf = normal_mixture_cdf(z_mix * (1 - z_mix))
    rep_mix = ks_statistic(pooled, mix_cdf, target="normal mixture over Beta variance")
    # exact enumeration oracle vs simulated frequencies
    blacks, probs = urn.enumerate_distribution(b, r, c, enum_n)
    z_small = urn.simulate_proportions(b, r, c, enum_n, replicates, stream(seed, 50))
    black_small = np.rint(z_small * (b + r + c * enum_n)).astype(np.int64)
    freq = np.array([np.mean(black_small == bb) for bb in blacks])
    cell_err = float(np.max(np.abs(freq - np.array([float(p) for p in probs]))))
    cell_tol = 4.0 / math.sqrt(replicates)
    verdicts = [
        verdict("polya", n, replicates, "beta_limit", rep_beta.target,
                rep_beta.statistic <= ks_threshold, ks=rep_beta.statistic,
                p_value=rep_beta.p_value),
        verdict("polya", n, replicates, "beta_clt", rep_clt.target,
                rep_clt.statistic <= ks_threshold, ks=rep_clt.statistic,
                p_value=rep_clt.p_value),
        verdict("polya", n, asw_paths, "conditional_panel",
                f"KS <= {asw_threshold} for >= {pass_fraction:.0%} of paths",
                frac >= pass_fraction, ks=float(np.median(ks_vals)),
                pass_fraction=frac, M_continuations=asw_continuations),
        verdict("polya", n, pooled.size, "pooled_mixture",
                "KS vs Monte Carlo normal-mixture CDF <= 0.02",
                rep_mix.statistic <= 0.02, ks=rep_mix.statistic,
                p_value=rep_mix.p_value),
        verdict("polya", enum_n, replicates, "enumeration_oracle",
                f"per-cell |freq - exact| <= 4/sqrt(M) = {cell_tol:.4g}",
                cell_err <= cell_tol, ks=None, max_cell_error=cell_err),
    ]
    return {"pass": all(v["pass"] for v in verdicts), "verdicts": verdicts}


# --- prediction helper ----------------------------------------------------------------------

def predict(kind_name: str, n: int, alpha: float, path_length: float) -> dict:
    lo, hi = trees.prediction_interval(path_length, n, alpha, kind_name)
    v = verdict(
        "predict", n, 0, "prediction_interval",
        f"level-{1 - alpha:g} interval for the path-length limit",
        True, ks=None, theta_minus=lo, theta_plus=hi, alpha=alpha, kind=kind_name,
    )
    return {"pass": True, "verdicts": [v], "interval": (lo, hi)}
