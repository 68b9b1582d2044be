"""Experiment runners: MLP training, the 1-D toy objective, kernel and
expectation verification sweeps.  Every run emits CSV with a fixed header
and float64 values printed with 17 significant digits, so reruns with the
same (config, seed) are bitwise-identical in sequential mode.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, ExperimentConfig
from .data import Dataset, batch_indices, load_mnist
from .estimator import (
    EstimatorConfig,
    QuadraticOracle,
    beta_schedule,
    expected_fogzo_oracle,
    fogzo_grad,
    fogzo_warmup_steps,
    nspsa_grad,
)
from .nn import MlpModel, ModelOracle
from .optim import adamw, cosine_lr, optimizer_step
from .quant import Quantizer, init_scale_absmean, init_scale_lsq, round_half_away
from .smoothing import dist_from_name, fogzo_epsilon, implicit_pair, smoothed_value_mc
from .surrogate import SurrogateKind, surrogate_value
from .tensor import Rng, fork_stream

MLP_LAYER_SIZES = [784, 10, 10]

# f64 roundoff bound for a central difference of a loss of magnitude L:
# the subtraction loses at most a few ulps of L, amplified by 1/(2 eps).
FD_ROUNDOFF_ULPS = 64.0


def fd_roundoff_bound(loss_magnitude: float, eps: float) -> float:
    return FD_ROUNDOFF_ULPS * np.finfo(np.float64).eps * abs(loss_magnitude) / (2.0 * eps)


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(col)) for col in header))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def surrogate_from_config(cfg: ExperimentConfig) -> SurrogateKind:
    if cfg.surrogate == "cgm":
        return SurrogateKind("cgm", cfg.cgm_threshold)
    return SurrogateKind(cfg.surrogate)


def all_surrogate_kinds(cgm_threshold: float = 0.25) -> list[SurrogateKind]:
    return [
        SurrogateKind("identity"),
        SurrogateKind("hardtanh"),
        SurrogateKind("tanh"),
        SurrogateKind("approxsign"),
        SurrogateKind("cgm", cgm_threshold),
    ]


def target_operator(kind: SurrogateKind):
    if kind.target == "round":
        return round_half_away
    return lambda z: np.where(np.asarray(z) >= 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# MLP training
# ---------------------------------------------------------------------------

MLP_HEADER = ["step", "epoch", "train_loss", "grad_norm", "cumulative_flops",
              "beta", "lr", "test_accuracy"]


@dataclass
class TrainResult:
    rows: list
    final_train_loss: float
    test_accuracy: float | None
    total_flops: int
    model: MlpModel
    estimator_cfg: EstimatorConfig


def build_model(cfg: ExperimentConfig, rng: Rng) -> tuple[MlpModel, float]:
    """Initialize the MLP and, when quantizing, the shared frozen scale."""
    model = MlpModel(MLP_LAYER_SIZES, rng, quantizer=None,
                     surrogate=surrogate_from_config(cfg))
    alpha = 1.0
    if cfg.bits >= 2:
        alpha = init_scale_lsq(model.weight_matrices(), cfg.bits)
        model.quantizer = Quantizer(cfg.bits, alpha)
    elif cfg.bits == 1:
        alpha = init_scale_absmean(model.weight_matrices())
        model.quantizer = Quantizer(1, alpha)
    return model, alpha


def estimator_from_config(cfg: ExperimentConfig, alpha: float) -> EstimatorConfig:
    kind = surrogate_from_config(cfg)
    pair = implicit_pair(kind)
    dist = dist_from_name(cfg.dist) if cfg.dist else pair.dist
    eps = fogzo_epsilon(alpha, pair.eps_bar, cfg.eps_scale)
    return EstimatorConfig(
        mode=cfg.estimator, n=cfg.n, beta_min=cfg.beta_min, eps=eps, dist=dist,
        r_percent=cfg.r_percent, use_sign_flip=cfg.use_sign_flip,
        beta_constant=cfg.beta_constant,
    )


def train_mlp(cfg: ExperimentConfig, train_ds: Dataset,
              test_ds: Dataset | None = None) -> TrainResult:
    root = Rng(cfg.seed)
    model, alpha = build_model(cfg, fork_stream(root, 0))
    data_rng = fork_stream(root, 1)
    est_rng = fork_stream(root, 2)

    est_cfg = estimator_from_config(cfg, alpha)
    oracle = ModelOracle(model)
    opt = adamw()
    lr_max = cfg.effective_lr

    steps_per_epoch = (len(train_ds) + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    warmup = fogzo_warmup_steps(cfg.r_percent, total_steps)

    rows = []
    last_epoch_losses = []
    t = 0
    for epoch in range(cfg.epochs):
        for idx in batch_indices(len(train_ds), cfg.batch_size, data_rng, epoch):
            batch = (train_ds.images[idx], train_ds.labels[idx])
            lr = cosine_lr(t, total_steps, lr_max)
            step_rng = fork_stream(est_rng, t)
            beta_logged = None

            if est_cfg.mode == "nspsa":
                loss = oracle.evaluate(batch)
                grad = nspsa_grad(oracle, model.theta, batch, est_cfg, step_rng)
            else:
                loss, cache = model.forward(*batch)
                g = model.backward(cache)
                if est_cfg.mode == "ste" or t < warmup:
                    grad = g
                else:
                    beta_logged = (est_cfg.beta_min if est_cfg.beta_constant
                                   else beta_schedule(t, total_steps, est_cfg.beta_min))
                    grad = fogzo_grad(oracle, model.theta, g, batch, est_cfg,
                                      t, total_steps, step_rng)

            grad_norm = float(np.linalg.norm(grad))
            optimizer_step(opt, model.theta, grad, lr)
            rows.append({
                "step": t, "epoch": epoch, "train_loss": loss,
                "grad_norm": grad_norm,
                "cumulative_flops": model.flops.forward_flops + model.flops.backward_flops,
                "beta": beta_logged, "lr": lr, "test_accuracy": None,
            })
            if epoch == cfg.epochs - 1:
                last_epoch_losses.append(loss)
            t += 1

    final_train_loss = float(np.mean(last_epoch_losses))
    test_accuracy = None
    if test_ds is not None:
        preds = model.predict(test_ds.images)
        test_accuracy = float(np.mean(preds == test_ds.labels))
    rows.append({
        "step": t, "epoch": cfg.epochs, "train_loss": final_train_loss,
        "grad_norm": None,
        "cumulative_flops": model.flops.forward_flops + model.flops.backward_flops,
        "beta": None, "lr": None, "test_accuracy": test_accuracy,
    })
    return TrainResult(rows, final_train_loss, test_accuracy,
                       model.flops.forward_flops + model.flops.backward_flops,
                       model, est_cfg)


def run_mlp_mnist(cfg: ExperimentConfig) -> list[dict]:
    train_ds = load_mnist(cfg.data_dir, "train")
    test_ds = load_mnist(cfg.data_dir, "test")
    result = train_mlp(cfg, train_ds, test_ds)
    write_csv(cfg.out_path, MLP_HEADER, result.rows)
    return result.rows


# ---------------------------------------------------------------------------
# 1-D toy objective: h(theta) = g(round(theta)), g(psi) = psi^3 - psi/4
# ---------------------------------------------------------------------------

TOY_HEADER = ["step", "theta", "ste_grad", "zo_grad_sample", "crossings"]


def toy_objective(theta):
    psi = round_half_away(np.asarray(theta, dtype=np.float64))
    return psi ** 3 - psi / 4.0


def toy_ste_grad(theta) -> float:
    psi = float(round_half_away(np.asarray(theta, dtype=np.float64)))
    return 3.0 * psi * psi - 0.25


def toy_zo_grad(theta: float, eps: float, v: float) -> float:
    return float((toy_objective(theta + eps * v) - toy_objective(theta - eps * v))
                 / (2.0 * eps) * v)


def run_toy1d(cfg: ExperimentConfig) -> list[dict]:
    pair = implicit_pair(SurrogateKind("identity"))
    eps = fogzo_epsilon(1.0, pair.eps_bar, cfg.eps_scale)
    lr = cfg.lr if cfg.lr > 0 else 0.1
    rng = Rng(cfg.seed)

    theta = cfg.theta0
    crossings = 0
    rows = []
    for t in range(cfg.steps):
        v = float(pair.dist.sample(fork_stream(rng, t)))
        ste_grad = toy_ste_grad(theta)
        zo_sample = toy_zo_grad(theta, eps, v)
        rows.append({"step": t, "theta": theta, "ste_grad": ste_grad,
                     "zo_grad_sample": zo_sample, "crossings": crossings})
        grad = ste_grad if cfg.estimator == "ste" else zo_sample
        new_theta = theta - lr * grad
        if (theta - 0.5) * (new_theta - 0.5) < 0:
            crossings += 1
        theta = new_theta
    rows.append({"step": cfg.steps, "theta": theta, "ste_grad": toy_ste_grad(theta),
                 "zo_grad_sample": None, "crossings": crossings})
    write_csv(cfg.out_path, TOY_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# Smoothing-kernel verification
# ---------------------------------------------------------------------------

KERNEL_HEADER = ["kind", "x", "surrogate_value", "mc_estimate", "stderr", "pass"]

KERNEL_GRID = np.round(np.arange(-20, 21) / 10.0, 10)


def kernel_rows_for(kind: SurrogateKind, n_samples: int, rng: Rng) -> list[dict]:
    pair = implicit_pair(kind)
    h = target_operator(kind)
    label = kind.variant if kind.threshold is None else f"{kind.variant}({kind.threshold})"
    rows = []
    for i, x in enumerate(KERNEL_GRID):
        est, stderr = smoothed_value_mc(h, float(x), pair.eps_bar, pair.dist,
                                        n_samples, fork_stream(rng, i))
        sv = float(surrogate_value(kind, float(x)))
        ok = abs(est - sv) <= 5.0 * stderr
        rows.append({"kind": label, "x": float(x), "surrogate_value": sv,
                     "mc_estimate": est, "stderr": stderr, "pass": ok})
    return rows


def run_verify_kernels(cfg: ExperimentConfig) -> list[dict]:
    rng = Rng(cfg.seed)
    rows = []
    for k, kind in enumerate(all_surrogate_kinds(cfg.cgm_threshold)):
        rows.extend(kernel_rows_for(kind, cfg.mc_samples, fork_stream(rng, k)))
    write_csv(cfg.out_path, KERNEL_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# Quadratic-oracle expectation check
# ---------------------------------------------------------------------------

ORACLE_HEADER = ["beta", "g_mode", "coordinate", "empirical_mean_G",
                 "predicted", "mc_stderr", "pass"]

ORACLE_BETAS = (0.0, 0.5, 0.9, 1.0)
ORACLE_DIM = 8
ORACLE_CHUNKS = 100


def _orthogonal_to(w: np.ndarray, rng: Rng) -> np.ndarray:
    x = rng.standard_normal(w.size)
    x -= (x @ w) / (w @ w) * w
    return x


def fogzo_mean_and_stderr(oracle: QuadraticOracle, g: np.ndarray,
                          est_cfg: EstimatorConfig, n_total: int, rng: Rng):
    """Empirical mean of the estimator over n_total single samples, with a
    per-coordinate standard error from chunk means."""
    n_chunks = min(ORACLE_CHUNKS, n_total)
    per_chunk = max(1, n_total // n_chunks)
    chunk_cfg = replace(est_cfg, n=per_chunk)
    means = np.empty((n_chunks, oracle.theta.size))
    for c in range(n_chunks):
        means[c] = fogzo_grad(oracle, oracle.theta, g, None, chunk_cfg,
                              t=0, total_steps=1, rng=fork_stream(rng, c))
    mean = means.mean(axis=0)
    stderr = means.std(axis=0, ddof=1) / np.sqrt(n_chunks)
    return mean, stderr


def run_quadratic_oracle(cfg: ExperimentConfig) -> list[dict]:
    root = Rng(cfg.seed)
    setup = fork_stream(root, 0)
    b = setup.standard_normal((ORACLE_DIM, ORACLE_DIM))
    a = (b + b.T) / 2.0
    theta = setup.standard_normal(ORACLE_DIM)
    grad_true = a @ theta

    eps = 0.1
    pair = implicit_pair(SurrogateKind("identity"))
    rows = []
    loss_mag = abs(0.5 * float(theta @ a @ theta)) + float(np.abs(grad_true).sum())
    floor = fd_roundoff_bound(loss_mag, eps)

    for mode_idx, (g_mode, g) in enumerate([
        ("parallel", grad_true.copy()),
        ("orthogonal", _orthogonal_to(grad_true, fork_stream(root, 1))),
    ]):
        for beta_idx, beta in enumerate(ORACLE_BETAS):
            est_cfg = EstimatorConfig(mode="fogzo", n=1, beta_min=beta, eps=eps,
                                      dist=pair.dist, beta_constant=True)
            oracle = QuadraticOracle(a, theta.copy())
            mean, stderr = fogzo_mean_and_stderr(
                oracle, g, est_cfg, cfg.oracle_samples,
                fork_stream(root, 10 + 10 * mode_idx + beta_idx))
            predicted = expected_fogzo_oracle(a, theta, g, beta)
            for coord in range(ORACLE_DIM):
                ok = abs(mean[coord] - predicted[coord]) <= 3.0 * stderr[coord] + floor
                rows.append({
                    "beta": beta, "g_mode": g_mode, "coordinate": coord,
                    "empirical_mean_G": mean[coord], "predicted": predicted[coord],
                    "mc_stderr": stderr[coord], "pass": ok,
                })
    write_csv(cfg.out_path, ORACLE_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# Hyperparameter sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = ["value", "final_loss", "total_flops", "wall_time"]


def run_sweep(cfg: ExperimentConfig, parameter: str | None = None,
              values: list[float] | None = None,
              train_ds: Dataset | None = None) -> list[dict]:
    parameter = parameter or cfg.sweep_parameter
    values = values if values is not None else cfg.sweep_value_list()
    if parameter not in ("beta_min", "n", "eps_scale"):
        raise ConfigError(f"unsupported sweep parameter {parameter!r}")
    if not values:
        raise ConfigError("sweep requires a nonempty value list")

    if train_ds is None:
        train_ds = load_mnist(cfg.data_dir, "train")
    rows = []
    for value in values:
        overrides = {parameter: int(value) if parameter == "n" else float(value)}
        sub_cfg = replace(cfg, **overrides)
        start = time.perf_counter()
        result = train_mlp(sub_cfg, train_ds)
        rows.append({
            "value": value, "final_loss": result.final_train_loss,
            "total_flops": result.total_flops,
            "wall_time": time.perf_counter() - start,
        })
    write_csv(cfg.out_path, SWEEP_HEADER, rows)
    return rows
