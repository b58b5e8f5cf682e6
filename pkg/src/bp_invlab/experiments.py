"""Config-driven experiment protocols emitting long-format CSV tables.

Each experiment kind reproduces one of the benchmark figure protocols at
desk scale: PGD sweeps over the l1 radius, condition-number sweeps over
m/n, FISTA beta sweeps, controlled sparse recovery, restricted-rate
curves, and the ISTA / l1-IDBP / untrained-ALISTA comparison.  Cells
(seed x signal x fidelity x parameter) are independent jobs; identical
configs produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import (
    ConfigError,
    NonPowerOfTwoError,
    NonSquareError,
    UnsupportedFormatError,
)
from .fidelity import FidelityTerm
from .linops import DenseOperator
from .metrics import NoiseSpec, add_noise_for_snr, sparsify_top_k
from .priors import L1Ball, SoftThresholdProx
from .rate_lab import estimate_restricted_rates
from .rng import SeededRng
from .solvers import SolverConfig, alista_run, fista, pgd, proximal_gradient
from .transforms import HaarBasis, column_normalize, compose_with_basis, gaussian_sensing, haar_transform, sr_operator

EXPERIMENT_KINDS = (
    "cs_pgd_sweepR",
    "cs_pgd_ratios",
    "cs_fista_sweepBeta",
    "cs_controlled",
    "rate_curves",
    "ista_family",
    "sr_pgd",
)

RESULT_COLUMNS = (
    "experiment",
    "seed",
    "image_id",
    "fidelity",
    "solver",
    "param_value",
    "iteration",
    "psnr_gt",
    "psnr_star",
    "objective",
    "l1_norm",
    "distance_to_star",
)

SIGNAL_PEAK = 255.0

# rng stream layout: one stream per independent random object, offset by the
# parameter index whenever the object varies along the sweep
_STREAM_OPERATOR = 10
_STREAM_SIGNAL = 1
_STREAM_NOISE = 200
_STREAM_SUPPORTS = 300


@dataclass
class ExperimentConfig:
    """Flat experiment description, loadable from a TOML file."""

    kind: str
    seeds: list = field(default_factory=list)
    n: int = 1024
    m: int = 0
    ratio: float = 0.5
    ratios: list = field(default_factory=list)
    side: int = 0
    scale: int = 3
    kernel_size: int = 7
    kernel_sigma: float = 1.6
    snr_db: float = 20.0
    sparsity: int = 50
    r_factors: list = field(default_factory=lambda: [1.0])
    betas: list = field(default_factory=list)
    rate_k: int = 10
    rate_m: int = 128
    m_list: list = field(default_factory=list)
    k_list: list = field(default_factory=list)
    num_supports: int = 500
    max_iters: int = 1000
    record_every: int = 1
    star_extra_iters: int = 1000
    x0: str = "zeros"
    unit_columns: bool = False
    images: list = field(default_factory=list)
    out_path: str = ""

    @classmethod
    def from_toml(cls, path, paper_scale: bool = False) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"cannot parse {path}: {err}") from None
        overrides = data.pop("paper_scale", {})
        if paper_scale:
            if not isinstance(overrides, dict):
                raise ConfigError("paper_scale must be a table of overrides")
            data.update(overrides)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ConfigError("config must set 'kind'")
        cfg = cls(**data)
        cfg.validate(base_dir=path.parent)
        return cfg

    def validate(self, base_dir: Path | None = None) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if not self.seeds:
            raise ConfigError("seed list must be nonempty")
        if self.max_iters < 1 or self.record_every < 1 or self.star_extra_iters < 0:
            raise ConfigError("iteration budget keys must be positive")
        if self.x0 not in ("zeros", "pinv_of_y"):
            raise ConfigError(f"x0 must be 'zeros' or 'pinv_of_y', got {self.x0!r}")
        if self.kind == "cs_pgd_ratios" and not self.ratios:
            raise ConfigError("cs_pgd_ratios needs a nonempty 'ratios' list")
        if self.kind == "cs_fista_sweepBeta" and not self.betas:
            raise ConfigError("cs_fista_sweepBeta needs a nonempty 'betas' list")
        if self.kind == "ista_family" and not self.betas:
            raise ConfigError("ista_family needs a nonempty 'betas' list")
        if self.kind == "rate_curves" and not (self.m_list or self.k_list):
            raise ConfigError("rate_curves needs 'm_list' and/or 'k_list'")
        if self.kind == "sr_pgd":
            if self.side < 1:
                raise ConfigError("sr_pgd needs a positive 'side'")
            self.n = self.side * self.side
        resolved = []
        for name in self.images:
            candidate = Path(name)
            if base_dir is not None and not candidate.is_absolute():
                candidate = base_dir / candidate
            if not candidate.exists():
                raise ConfigError(f"image file not found: {candidate}")
            resolved.append(str(candidate))
        self.images = resolved
        if self.images:
            side = math.isqrt(self.n)
            if side * side != self.n or side & (side - 1):
                raise ConfigError(f"image experiments need n = side^2 with side a power of two, got n={self.n}")

    def measurements(self, ratio: float | None = None) -> int:
        if ratio is not None:
            return int(round(ratio * self.n))
        if self.m:
            return self.m
        return int(round(self.ratio * self.n))


@dataclass
class ResultTable:
    """Long-format rows in RESULT_COLUMNS order plus per-cell failures."""

    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def load_image_pgm(path):
    """Read a binary PGM (P5, maxval 255) square power-of-two image.

    Returns (row-major float vector in [0, 255], side).
    """
    raw = Path(path).read_bytes()

    pos = 0

    def token():
        nonlocal pos
        while pos < len(raw):
            ch = raw[pos : pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        return raw[start:pos]

    magic = token()
    if magic != b"P5":
        raise UnsupportedFormatError(f"expected binary PGM magic P5, got {magic!r}")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError:
        raise UnsupportedFormatError("malformed PGM header") from None
    if maxval != 255:
        raise UnsupportedFormatError(f"only maxval 255 is supported, got {maxval}")
    if width != height:
        raise NonSquareError(f"image must be square, got {width} x {height}")
    if width < 1 or width & (width - 1):
        raise NonPowerOfTwoError(f"side must be a power of two, got {width}")
    pos += 1  # single whitespace after maxval
    data = raw[pos : pos + width * height]
    if len(data) != width * height:
        raise UnsupportedFormatError("truncated PGM payload")
    return np.frombuffer(data, dtype=np.uint8).astype(float), width


def _synthetic_signal(n: int, sparsity: int, rng: SeededRng) -> np.ndarray:
    """k standard-normal spikes on a uniform support, rescaled to peak 255."""
    gen = rng.generator()
    x = np.zeros(n)
    support = gen.choice(n, size=sparsity, replace=False)
    x[support] = gen.standard_normal(sparsity)
    return x * (SIGNAL_PEAK / np.abs(x).max())


def _signals(cfg: ExperimentConfig, seed: int) -> list:
    """(image_id, coefficient-domain ground truth) pairs for one seed."""
    if not cfg.images:
        return [(f"synthetic{seed}", _synthetic_signal(cfg.n, cfg.sparsity, SeededRng(seed, _STREAM_SIGNAL)))]
    side = math.isqrt(cfg.n)
    basis = HaarBasis(side)
    out = []
    for name in cfg.images:
        pixels, img_side = load_image_pgm(name)
        if img_side != side:
            raise ConfigError(f"{name}: side {img_side} does not match n={cfg.n}")
        out.append((Path(name).stem, haar_transform(basis, "forward", pixels)))
    return out


def _sensing_operator(cfg: ExperimentConfig, seed: int, m: int, stream_offset: int = 0) -> DenseOperator:
    op = gaussian_sensing(m, cfg.n, SeededRng(seed, _STREAM_OPERATOR + stream_offset))
    if cfg.unit_columns:
        op = column_normalize(op)
    if cfg.images:
        op = compose_with_basis(op, HaarBasis(math.isqrt(cfg.n)))
    return op


def _observe(op: DenseOperator, x_gt: np.ndarray, snr_db: float, seed: int, stream_offset: int = 0) -> np.ndarray:
    clean = op.forward(x_gt)
    return add_noise_for_snr(clean, NoiseSpec(snr_db, SeededRng(seed, _STREAM_NOISE + stream_offset)))


def _trace_rows(cfg, kind, seed, image_id, fidelity, solver_name, param_value, trace):
    rows = []
    for i, t in enumerate(trace.iterations):
        rows.append(
            (
                kind,
                seed,
                image_id,
                fidelity,
                solver_name,
                float(param_value),
                t,
                trace.psnrs["gt"][i],
                trace.psnrs["star"][i],
                trace.objective[i],
                trace.l1_norm[i],
                trace.distances["star"][i],
            )
        )
    return rows


def _run_with_star(cfg: ExperimentConfig, run, x_gt):
    """Run twice: a longer converged run supplies x_star, then the recorded run."""
    star_cfg = SolverConfig(
        max_iters=cfg.max_iters + cfg.star_extra_iters,
        record_every=cfg.max_iters + cfg.star_extra_iters,
        x0=cfg.x0,
        record_initial=False,
        psnr_peak=SIGNAL_PEAK,
    )
    x_star, _ = run(star_cfg, None)
    main_cfg = SolverConfig(
        max_iters=cfg.max_iters,
        record_every=cfg.record_every,
        x0=cfg.x0,
        record_initial=False,
        psnr_peak=SIGNAL_PEAK,
    )
    _, trace = run(main_cfg, {"gt": x_gt, "star": x_star})
    return trace


def _plan_cells(cfg: ExperimentConfig) -> list:
    """Build (label, callable) pairs; each callable returns a list of rows."""
    cells = []

    def solver_cell(label, seed, image_id, fidelity, solver_name, param_value, make_run, x_gt):
        def job():
            trace = _run_with_star(cfg, make_run, x_gt)
            return _trace_rows(cfg, cfg.kind, seed, image_id, fidelity, solver_name, param_value, trace)

        cells.append((label, job))

    if cfg.kind in ("cs_pgd_sweepR", "cs_controlled"):
        for seed in cfg.seeds:
            for image_id, x_raw in _signals(cfg, seed):
                x_gt = sparsify_top_k(x_raw, cfg.sparsity) if cfg.kind == "cs_controlled" else x_raw
                factors = [1.0] if cfg.kind == "cs_controlled" else cfg.r_factors
                for fidelity in ("ls", "bp"):
                    for factor in factors:
                        param = cfg.snr_db if cfg.kind == "cs_controlled" else factor
                        label = f"{cfg.kind}/seed{seed}/{image_id}/{fidelity}/{param}"

                        def make_run(solver_cfg, references, seed=seed, image_id=image_id,
                                     fidelity=fidelity, factor=factor, x_gt=x_gt):
                            op = _sensing_operator(cfg, seed, cfg.measurements())
                            y = _observe(op, x_gt, cfg.snr_db, seed)
                            f = FidelityTerm(fidelity, op, y)
                            radius = factor * float(np.sum(np.abs(x_gt)))
                            return pgd(f, L1Ball(radius), solver_cfg, references)

                        solver_cell(label, seed, image_id, fidelity, "pgd", param, make_run, x_gt)

    elif cfg.kind == "cs_pgd_ratios":
        for seed in cfg.seeds:
            for image_id, x_gt in _signals(cfg, seed):
                for j, ratio in enumerate(cfg.ratios):
                    for fidelity in ("ls", "bp"):
                        label = f"{cfg.kind}/seed{seed}/{image_id}/{fidelity}/ratio{ratio}"

                        def make_run(solver_cfg, references, seed=seed, ratio=ratio, j=j,
                                     fidelity=fidelity, x_gt=x_gt):
                            op = _sensing_operator(cfg, seed, cfg.measurements(ratio), stream_offset=j)
                            y = _observe(op, x_gt, cfg.snr_db, seed, stream_offset=j)
                            f = FidelityTerm(fidelity, op, y)
                            radius = cfg.r_factors[0] * float(np.sum(np.abs(x_gt)))
                            return pgd(f, L1Ball(radius), solver_cfg, references)

                        solver_cell(label, seed, image_id, fidelity, "pgd", ratio, make_run, x_gt)

    elif cfg.kind == "cs_fista_sweepBeta":
        for seed in cfg.seeds:
            for image_id, x_gt in _signals(cfg, seed):
                for fidelity in ("ls", "bp"):
                    for beta in cfg.betas:
                        label = f"{cfg.kind}/seed{seed}/{image_id}/{fidelity}/beta{beta}"

                        def make_run(solver_cfg, references, seed=seed, beta=beta,
                                     fidelity=fidelity, x_gt=x_gt):
                            op = _sensing_operator(cfg, seed, cfg.measurements())
                            y = _observe(op, x_gt, cfg.snr_db, seed)
                            f = FidelityTerm(fidelity, op, y)
                            return fista(f, SoftThresholdProx(beta), beta, solver_cfg, references)

                        solver_cell(label, seed, image_id, fidelity, "fista", beta, make_run, x_gt)

    elif cfg.kind == "ista_family":
        for seed in cfg.seeds:
            for image_id, x_gt in _signals(cfg, seed):
                for beta in cfg.betas:
                    for solver_name, fidelity in (("ista", "ls"), ("idbp", "bp"), ("alista", "bp")):
                        label = f"{cfg.kind}/seed{seed}/{image_id}/{solver_name}/beta{beta}"

                        def make_run(solver_cfg, references, seed=seed, beta=beta,
                                     solver_name=solver_name, fidelity=fidelity, x_gt=x_gt):
                            op = _sensing_operator(cfg, seed, cfg.measurements())
                            y = _observe(op, x_gt, cfg.snr_db, seed)
                            if solver_name == "alista":
                                return alista_run(op, y, beta, solver_cfg, references=references)
                            f = FidelityTerm(fidelity, op, y)
                            return proximal_gradient(f, SoftThresholdProx(beta), beta, solver_cfg, references)

                        solver_cell(label, seed, image_id, fidelity, solver_name, beta, make_run, x_gt)

    elif cfg.kind == "sr_pgd":
        for seed in cfg.seeds:
            for image_id, x_gt in _signals(cfg, seed):
                for fidelity in ("ls", "bp"):
                    for factor in cfg.r_factors:
                        label = f"{cfg.kind}/seed{seed}/{image_id}/{fidelity}/R{factor}"

                        def make_run(solver_cfg, references, seed=seed, factor=factor,
                                     fidelity=fidelity, x_gt=x_gt):
                            blur = sr_operator(cfg.side, cfg.scale, cfg.kernel_size, cfg.kernel_sigma)
                            op = compose_with_basis(blur, HaarBasis(cfg.side))
                            y = _observe(op, x_gt, cfg.snr_db, seed)
                            f = FidelityTerm(fidelity, op, y)
                            radius = factor * float(np.sum(np.abs(x_gt)))
                            return pgd(f, L1Ball(radius), solver_cfg, references)

                        solver_cell(label, seed, image_id, fidelity, "pgd", factor, make_run, x_gt)

    elif cfg.kind == "rate_curves":
        for seed in cfg.seeds:
            sweeps = [("sweep_m", cfg.m_list, cfg.rate_k, True), ("sweep_k", cfg.k_list, cfg.rate_m, False)]
            for sweep_id, values, fixed, sweeping_m in sweeps:
                for j, value in enumerate(values):
                    m, k = (int(value), fixed) if sweeping_m else (fixed, int(value))
                    label = f"{cfg.kind}/seed{seed}/{sweep_id}/{value}"

                    def job(seed=seed, sweep_id=sweep_id, value=value, m=m, k=k, j=j, sweeping_m=sweeping_m):
                        offset = j if sweeping_m else 50 + j
                        op = gaussian_sensing(m, cfg.n, SeededRng(seed, _STREAM_OPERATOR + offset))
                        est = estimate_restricted_rates(
                            op, k, cfg.num_supports, SeededRng(seed, _STREAM_SUPPORTS + offset)
                        )
                        rows = []
                        for fidelity, p_hat in (("ls", est.p_ls_hat), ("bp", est.p_bp_hat)):
                            rows.append((cfg.kind, seed, sweep_id, fidelity, "rate_estimate",
                                         float(value), 0, 0.0, 0.0, p_hat, 0.0, 0.0))
                        return rows

                    cells.append((label, job))

    return cells


def _max_workers(num_cells: int) -> int:
    env = os.environ.get("BP_INVLAB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, num_cells))


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Execute every cell of the configured protocol; failed cells are
    recorded in table.failures and never corrupt other cells' rows."""
    cfg.validate()
    cells = _plan_cells(cfg)
    table = ResultTable()
    workers = _max_workers(len(cells))
    if workers == 1:
        outcomes = [(label, _safe(job)) for label, job in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(label, pool.submit(_safe, job)) for label, job in cells]
            outcomes = [(label, fut.result()) for label, fut in futures]
    for label, (rows, error) in outcomes:
        if error is not None:
            table.failures.append(f"{label}: {error}")
        else:
            table.rows.extend(rows)
    return table


def _safe(job):
    try:
        return job(), None
    except Exception as err:  # cell isolation: any failure is contained
        return [], f"{type(err).__name__}: {err}"


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        raise ValueError("NaN is not representable in result tables")
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def emit_csv(table: ResultTable, path) -> None:
    """Write UTF-8 CSV with round-trip floats, rows sorted by
    (experiment, seed, image, fidelity, solver, param, iteration)."""
    ordered = sorted(table.rows, key=lambda r: (r[0], r[1], r[2], r[3], r[4], r[5], r[6]))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in ordered:
            writer.writerow([_format_value(v) for v in row])
