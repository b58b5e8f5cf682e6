"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run as `pytest tests/test_acceptance.py -v -s` or `bp-invlab check`.
Heavier criteria drive the benchmark runner with the shipped configs.
"""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from bp_invlab import (
    FidelityTerm,
    HaarBasis,
    IterateTrace,
    L1Ball,
    OraclePrior,
    SoftThresholdProx,
    SolverConfig,
    TikhonovProx,
    alista_weights,
    build_operator,
    contraction_delta,
    empirical_rate,
    estimate_restricted_rates,
    gaussian_sensing,
    haar_transform,
    pgd,
    project_l1_ball,
    proximal_gradient,
    soft_threshold,
    theorem2_bound,
)
from bp_invlab.experiments import ExperimentConfig, emit_csv, run_experiment
from bp_invlab.rng import SeededRng

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

SIGNAL_PEAK = 255.0


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {num:02d} {name}: {status}{suffix}")
    assert ok, f"criterion {num} {name} failed{suffix}"


def distance_from_psnr(psnr_db, n):
    """Invert the PSNR definition back to the euclidean distance."""
    if math.isinf(psnr_db):
        return 0.0
    return math.sqrt(n) * SIGNAL_PEAK * 10.0 ** (-psnr_db / 20.0)


def synthetic_signal(n, k, seed):
    gen = SeededRng(seed, 1).generator()
    x = np.zeros(n)
    support = gen.choice(n, size=k, replace=False)
    x[support] = gen.standard_normal(k)
    return x * (SIGNAL_PEAK / np.abs(x).max())


def rows_by(table, **filters):
    idx = {"seed": 1, "image_id": 2, "fidelity": 3, "solver": 4, "param_value": 5}
    out = [r for r in table.rows if all(r[idx[k]] == v for k, v in filters.items())]
    return sorted(out, key=lambda r: r[6])


def test_criterion_01_fidelity_form_equivalence():
    gen = np.random.default_rng(101)
    worst = 0.0
    for trial in range(50):
        op = build_operator(gen.standard_normal((20, 50)))
        y = gen.standard_normal(20)
        x = gen.standard_normal(50)
        via_pinv = FidelityTerm("bp", op, y).value(x)
        gram = op.matrix @ op.matrix.T
        w, u = np.linalg.eigh(gram)
        r = (u @ np.diag(1.0 / np.sqrt(w)) @ u.T) @ (y - op.matrix @ x)
        via_inv_sqrt = 0.5 * float(r @ r)
        rel = abs(via_pinv - via_inv_sqrt) / max(via_pinv, via_inv_sqrt, 1.0)
        worst = max(worst, rel)
    report(1, "fidelity-form-equivalence", worst <= 1e-10, f"worst relative gap {worst:.2e}")


def test_criterion_02_oracle_warmup():
    bp_worst = 0.0
    ls_margin = math.inf
    ok = True
    for seed in range(1, 11):
        op = gaussian_sensing(64, 128, SeededRng(seed, 0))
        x_gt = SeededRng(seed, 1).generator().standard_normal(128)
        y = op.forward(x_gt)
        prior = OraclePrior(x_gt, op)

        f_bp = FidelityTerm("bp", op, y)
        x1, _ = pgd(f_bp, prior, SolverConfig(max_iters=1))
        x2, _ = pgd(f_bp, prior, SolverConfig(max_iters=2))
        bp_worst = max(bp_worst, float(np.linalg.norm(x2 - x1)))

        f_ls = FidelityTerm("ls", op, y)
        rate = 1.0 - op.spectral_summary().condition_ratio
        x_star = op.pinv(y) + op.null_project(x_gt)
        _, trace = pgd(f_ls, prior, SolverConfig(max_iters=80), references={"star": x_star})
        d = trace.distance("star")
        floor = 1e-11 * max(1.0, float(np.linalg.norm(x_star)))
        for t in range(len(d) - 1):
            if d[t] <= floor:
                break
            ratio = d[t + 1] / d[t]
            ls_margin = min(ls_margin, rate + 1e-8 - ratio)
            ok = ok and ratio <= rate + 1e-8
    ok = ok and bp_worst <= 1e-10
    report(2, "oracle-warmup", ok, f"bp one-step residual {bp_worst:.2e}, ls ratio margin {ls_margin:.2e}")


def test_criterion_03_samplewise_restricted_ordering():
    violations = 0
    ordered = True
    for seed in (1, 2, 3):
        op = gaussian_sensing(128, 256, SeededRng(seed, 0))
        est = estimate_restricted_rates(op, 10, 500, SeededRng(seed, 300))
        sigma_max = op.spectral_summary().sigma_max
        violations += int(np.sum(est.bp_terms < est.ls_terms / sigma_max - 1e-10))
        ordered = ordered and est.p_bp_hat <= est.p_ls_hat + 1e-12
    report(3, "samplewise-restricted-ordering", violations == 0 and ordered,
           f"{violations} violations over 3x500 supports")


def test_criterion_04_rate_ratio_trends():
    m_pass = 0
    k_pass = 0
    for seed in (1, 2, 3):
        ratios_m = []
        for j, m in enumerate((64, 128, 192)):
            op = gaussian_sensing(m, 256, SeededRng(seed, 10 + j))
            ratios_m.append(estimate_restricted_rates(op, 10, 500, SeededRng(seed, 300 + j)).ratio)
        ratios_k = []
        for j, k in enumerate((5, 10, 20)):
            op = gaussian_sensing(128, 256, SeededRng(seed, 50 + j))
            ratios_k.append(estimate_restricted_rates(op, k, 500, SeededRng(seed, 350 + j)).ratio)
        if all(r < 1 for r in ratios_m) and ratios_m[0] > ratios_m[1] > ratios_m[2]:
            m_pass += 1
        if ratios_k[0] < ratios_k[1] < ratios_k[2] < 1:
            k_pass += 1
    report(4, "rate-ratio-trends", m_pass >= 2 and k_pass >= 2,
           f"m-trend {m_pass}/3 seeds, k-trend {k_pass}/3 seeds")


def test_criterion_05_condition_number_anchor():
    targets = {0.5: 0.0294, 0.3: 0.0854, 0.1: 0.2699}
    details = []
    ok = True
    for j, (ratio, target) in enumerate(targets.items()):
        m = int(round(ratio * 4096))
        op = gaussian_sensing(m, 4096, SeededRng(5, j))
        measured = op.spectral_summary().condition_ratio
        ok = ok and abs(measured - target) <= 0.2 * target
        details.append(f"m/n={ratio}: {measured:.4f} vs {target}")
    report(5, "condition-number-anchor", ok, "; ".join(details))


def test_criterion_06_controlled_noiseless_linear_convergence():
    cfg = ExperimentConfig.from_toml(CONFIG_DIR / "cs_controlled_noiseless.toml")
    table = run_experiment(cfg)
    assert not table.failures, table.failures
    ok = True
    details = []
    for seed in cfg.seeds:
        x_gt = synthetic_signal(cfg.n, cfg.sparsity, seed)
        norm_gt = float(np.linalg.norm(x_gt))
        hits = {}
        fits = {}
        for kind in ("ls", "bp"):
            rows = rows_by(table, seed=seed, fidelity=kind)
            iters = [r[6] for r in rows]
            dists = [distance_from_psnr(r[7], cfg.n) for r in rows]
            rel = np.array(dists) / norm_gt
            reached = np.nonzero(rel <= 1e-6)[0]
            if reached.size == 0:
                ok = False
                continue
            hits[kind] = iters[reached[0]]
            trace = IterateTrace.from_columns(iters, {"gt": dists})
            fits[kind] = empirical_rate(trace, "gt", window=(1, hits[kind])).r2
        if len(hits) == 2:
            ok = ok and hits["bp"] < hits["ls"]
            ok = ok and fits["ls"] >= 0.95 and fits["bp"] >= 0.95
            details.append(f"seed {seed}: ls@{hits['ls']} bp@{hits['bp']} r2=({fits['ls']:.3f},{fits['bp']:.3f})")
    report(6, "controlled-noiseless-linear-convergence", ok, "; ".join(details[:3]) + " ...")


def iterations_to_threshold(rows, column):
    """First recorded iteration whose column value reaches (slow final - 1 dB)."""
    series = {}
    for kind in ("ls", "bp"):
        kind_rows = [r for r in rows if r[3] == kind]
        series[kind] = ([r[6] for r in kind_rows], [r[column] for r in kind_rows])
    threshold = min(series["ls"][1][-1], series["bp"][1][-1]) - 1.0
    out = {}
    for kind, (iters, vals) in series.items():
        idx = next(i for i, v in enumerate(vals) if v >= threshold)
        out[kind] = iters[idx]
    return out


def test_criterion_07_condition_number_trend_in_solvers():
    cfg = ExperimentConfig.from_toml(CONFIG_DIR / "cs_pgd_ratios.toml")
    table = run_experiment(cfg)
    assert not table.failures, table.failures
    increasing = 0
    details = []
    for seed in cfg.seeds:
        gaps = []
        for ratio in cfg.ratios:
            rows = rows_by(table, seed=seed, param_value=float(ratio))
            # column 8 is psnr_star: the rate view of the curves
            reach = iterations_to_threshold(rows, column=8)
            gaps.append(reach["ls"] - reach["bp"])
        if gaps[0] < gaps[1] < gaps[2]:
            increasing += 1
        details.append(f"seed {seed}: gaps {gaps}")
    report(7, "condition-number-trend", increasing >= 3, f"{increasing}/5 seeds; " + "; ".join(details))


def test_criterion_08_tikhonov_contraction_bound():
    beta = 1.0
    ok = True
    worst_excess = -math.inf
    for seed in range(1, 11):
        op = gaussian_sensing(64, 128, SeededRng(seed, 0))
        x_gt = SeededRng(seed, 1).generator().standard_normal(128)
        y = op.forward(x_gt) + 0.05 * SeededRng(seed, 2).generator().standard_normal(64)
        max_ratio = {}
        for kind in ("ls", "bp"):
            f = FidelityTerm(kind, op, y)
            mu = f.step_size()
            prior = TikhonovProx(beta, np.eye(128))
            x_star, _ = proximal_gradient(f, prior, beta, SolverConfig(max_iters=500))
            _, trace = proximal_gradient(f, prior, beta, SolverConfig(max_iters=60),
                                         references={"star": x_star})
            delta_eff = contraction_delta(TikhonovProx(mu * beta, np.eye(128)), op)
            bound = theorem2_bound(f, delta_eff)
            d = trace.distance("star")
            floor = 1e-10 * max(1.0, float(np.linalg.norm(x_star)))
            ratios = []
            for t in range(len(d) - 1):
                if d[t] <= floor:
                    break
                ratios.append(d[t + 1] / d[t])
            worst_excess = max(worst_excess, max(ratios) - bound)
            ok = ok and all(r <= bound + 1e-6 for r in ratios)
            max_ratio[kind] = max(ratios)
        # with D = I, the prior-level delta is the same object for both kinds
        ok = ok and max_ratio["bp"] <= max_ratio["ls"] + 1e-9
    report(8, "tikhonov-contraction-bound", ok, f"worst bound excess {worst_excess:.2e}")


def test_criterion_09_alista_closed_form():
    gen = np.random.default_rng(909)
    worst_residual = 0.0
    worst_gap = -math.inf
    for trial in range(20):
        m = int(gen.integers(4, 7))
        n = int(gen.integers(2 * m, 3 * m))
        op = build_operator(gen.standard_normal((m, n)))
        weights = alista_weights(op)
        a = op.matrix
        worst_residual = max(worst_residual, float(np.abs(np.einsum("ij,ij->j", weights.matrix, a) - 1).max()))
        gram = a @ a.T
        eta = 0.9 / np.linalg.eigvalsh(gram).max()
        numeric = np.zeros_like(a)
        for i in range(n):
            col = a[:, i]
            w = col / (col @ col)
            for _ in range(4000):
                w = w - eta * (gram @ w)
                w = w + (1.0 - w @ col) * col / (col @ col)
            numeric[:, i] = w
        obj_closed = float(np.sum((weights.matrix.T @ a) ** 2))
        obj_numeric = float(np.sum((numeric.T @ a) ** 2))
        worst_gap = max(worst_gap, obj_closed - obj_numeric)
    ok = worst_residual <= 1e-10 and worst_gap <= 1e-6
    report(9, "alista-closed-form", ok,
           f"constraint residual {worst_residual:.2e}, objective gap {worst_gap:.2e}")


def test_criterion_10_ista_family():
    cfg = ExperimentConfig.from_toml(CONFIG_DIR / "ista_family.toml")
    table = run_experiment(cfg)
    assert not table.failures, table.failures
    limit = cfg.max_iters // 5
    passing = 0
    details = []
    for seed in cfg.seeds:
        by_solver = {}
        for solver in ("ista", "idbp", "alista"):
            rows = rows_by(table, seed=seed, solver=solver)
            by_solver[solver] = ([r[6] for r in rows], np.array([r[7] for r in rows]))
        gap = float(np.abs(by_solver["idbp"][1] - by_solver["alista"][1]).max())
        ista_final = by_solver["ista"][1][-1]
        reach = {}
        for solver in ("idbp", "alista"):
            iters, series = by_solver[solver]
            idx = np.nonzero(series >= ista_final)[0]
            reach[solver] = iters[idx[0]] if idx.size else math.inf
        seed_ok = gap <= 0.5 and max(reach.values()) <= limit
        passing += int(seed_ok)
        details.append(f"seed {seed}: gap {gap:.2f} dB, reach ({reach['idbp']},{reach['alista']}) <= {limit}")
    report(10, "ista-family-traces", passing >= 3, f"{passing}/5 seeds; " + "; ".join(details))


def l1_threshold_oracle(v, radius):
    mags = np.sort(np.abs(v))[::-1]
    n = len(mags)
    for j in range(1, n + 1):
        theta = (mags[:j].sum() - radius) / j
        upper = mags[j - 1]
        lower = mags[j] if j < n else 0.0
        if 0.0 <= theta <= upper and theta >= lower:
            return theta
    return 0.0


def test_criterion_11_property_suites(tmp_path):
    gen = np.random.default_rng(1111)
    failures = []

    # prox nonexpansiveness, 1000 pairs per convex variant
    op = build_operator(gen.standard_normal((6, 14)))
    x_gt = gen.standard_normal(14)
    d_mat = gen.standard_normal((14, 14)) + 2 * np.eye(14)
    variants = [L1Ball(2.0), SoftThresholdProx(0.6), OraclePrior(x_gt, op), TikhonovProx(0.8, d_mat)]
    for prior in variants:
        for _ in range(1000):
            z1 = gen.standard_normal(14)
            z2 = gen.standard_normal(14)
            if np.linalg.norm(prior.map(z1) - prior.map(z2)) > np.linalg.norm(z1 - z2) + 1e-12:
                failures.append(f"nonexpansiveness: {type(prior).__name__}")
                break

    # l1-ball projection against the exhaustive KKT breakpoint oracle
    for _ in range(50):
        v = gen.standard_normal(25) * gen.uniform(0.1, 8.0)
        radius = gen.uniform(0.1, 0.9) * np.abs(v).sum()
        theta = l1_threshold_oracle(v, radius)
        expected = np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)
        if not np.allclose(project_l1_ball(v, radius), expected, atol=1e-9):
            failures.append("l1-ball KKT")
            break

    # gradients against central finite differences
    op2 = build_operator(gen.standard_normal((7, 12)))
    y = gen.standard_normal(7)
    for kind in ("ls", "bp"):
        f = FidelityTerm(kind, op2, y)
        for _ in range(20):
            x = gen.standard_normal(12)
            grad = f.gradient(x)
            h = 1e-6 * (1.0 + np.abs(x).max())
            numeric = np.empty(12)
            for i in range(12):
                e = np.zeros(12)
                e[i] = h
                numeric[i] = (f.value(x + e) - f.value(x - e)) / (2 * h)
            if np.linalg.norm(numeric - grad) > 1e-5 * max(1.0, np.linalg.norm(grad)):
                failures.append(f"finite differences ({kind})")
                break

    # Haar isometry
    for side in (4, 8, 16):
        basis = HaarBasis(side)
        for _ in range(20):
            x = gen.standard_normal(side * side)
            fw = haar_transform(basis, "forward", x)
            if abs(np.linalg.norm(fw) - np.linalg.norm(x)) > 1e-12 * np.linalg.norm(x):
                failures.append("haar isometry")
                break

    # byte-identical CSV reruns across different pool widths
    cfg = ExperimentConfig(
        kind="cs_pgd_sweepR", seeds=[1, 2], n=64, ratio=0.5, sparsity=6,
        snr_db=20.0, r_factors=[0.5, 1.0], max_iters=5, star_extra_iters=5,
    )
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    emit_csv(run_experiment(cfg), first)
    os.environ["BP_INVLAB_THREADS"] = "4"
    try:
        emit_csv(run_experiment(cfg), second)
    finally:
        del os.environ["BP_INVLAB_THREADS"]
    if first.read_bytes() != second.read_bytes():
        failures.append("csv determinism")

    report(11, "property-suites", not failures, "; ".join(failures) if failures else "all suites clean")
