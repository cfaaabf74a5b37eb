"""Constrained optimizer: Cayley retractions, momentum step, training loop.

Parameters live as a stacked (nN, n) matrix kappa with orthonormal columns.
Each update moves along the curve

    gamma(tau) = (I + (tau/2) A)^-1 (I - (tau/2) A) kappa0,
    A = G kappa0^dag - kappa0 G^dag,

which stays on the manifold for every tau and G because A is
skew-Hermitian.  The Sherman-Morrison-Woodbury form inverts only a 2n x 2n
system.  The descent direction is the raw conjugate gradient normalized to
unit Frobenius norm, mixed with momentum, and normalized again, so the step
size alone controls the update magnitude.  Momentum is kept in the ambient
space (not transported along the manifold).  No re-orthonormalization is
ever applied; feasibility rests on the retraction alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError
from .gradient import loss_gradient_padded, pad_sequences
from .hqmm import Hqmm, filter_batch
from .quantum import random_density, random_stiefel, stiefel_residual


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training loop."""

    tau: float = 0.75
    alpha: float = 0.92
    beta: float = 0.9
    batches: int = 1
    epochs: int = 60
    burn_in: int = 0
    seed: int | None = None
    restarts: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if self.batches < 1 or self.epochs < 1:
            raise ValueError(
                f"batches and epochs must be >= 1, got {self.batches}, {self.epochs}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


@dataclass
class OptimizerState:
    """Mutable per-run state: current point, ambient momentum, step size."""

    kappa: np.ndarray
    momentum: np.ndarray
    tau: float
    epoch: int = 0


def _check_shapes(kappa0, grad) -> tuple[np.ndarray, np.ndarray]:
    kappa0 = np.asarray(kappa0, dtype=np.complex128)
    grad = np.asarray(grad, dtype=np.complex128)
    if kappa0.shape != grad.shape or kappa0.ndim != 2:
        raise DimensionError(
            f"kappa and gradient shapes must match, got {kappa0.shape} vs {grad.shape}")
    return kappa0, grad


def cayley_retract(kappa0, grad, tau: float) -> np.ndarray:
    """Full-size Cayley update; exact manifold feasibility for any tau, grad."""
    kappa0, grad = _check_shapes(kappa0, grad)
    rows = kappa0.shape[0]
    skew = grad @ kappa0.conj().T - kappa0 @ grad.conj().T
    lhs = np.eye(rows) + (tau / 2.0) * skew
    rhs = (np.eye(rows) - (tau / 2.0) * skew) @ kappa0
    try:
        out = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cayley system is singular (tau={tau}): {exc}") from exc
    if not np.all(np.isfinite(out.view(np.float64))):
        raise NumericalError(f"Cayley update produced non-finite entries (tau={tau})")
    return out


def cayley_retract_smw(kappa0, grad, tau: float) -> np.ndarray:
    """Cayley update through the low-rank identity; only a 2n x 2n solve.

    With U = [grad | kappa0] and V = [kappa0 | -grad],
    gamma(tau) = kappa0 - tau U (I + (tau/2) V^dag U)^-1 V^dag kappa0.
    """
    kappa0, grad = _check_shapes(kappa0, grad)
    cols = kappa0.shape[1]
    u = np.concatenate([grad, kappa0], axis=1)
    v = np.concatenate([kappa0, -grad], axis=1)
    lhs = np.eye(2 * cols) + (tau / 2.0) * (v.conj().T @ u)
    try:
        core = np.linalg.solve(lhs, v.conj().T @ kappa0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cayley SMW system is singular (tau={tau}): {exc}") from exc
    out = kappa0 - tau * (u @ core)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise NumericalError(f"Cayley SMW update produced non-finite entries (tau={tau})")
    return out


def descent_direction(raw, state: OptimizerState, beta: float = 0.9) -> np.ndarray:
    """Unit-norm momentum-mixed direction; updates state.momentum in place.

    Normalize the raw gradient, mix with the stored momentum, store the mix,
    and normalize again.  A zero raw gradient falls back to the stored
    momentum direction; if that is zero too the returned direction is zero,
    which callers read as convergence.
    """
    raw = np.asarray(raw, dtype=np.complex128)
    if not np.all(np.isfinite(raw.view(np.float64))):
        raise NumericalError("raw gradient has non-finite entries")
    raw_norm = float(np.linalg.norm(raw))
    if raw_norm == 0.0:
        mom_norm = float(np.linalg.norm(state.momentum))
        if mom_norm == 0.0:
            return np.zeros_like(raw)
        return state.momentum / mom_norm
    mixed = beta * state.momentum + (1.0 - beta) * (raw / raw_norm)
    state.momentum = mixed
    mixed_norm = float(np.linalg.norm(mixed))
    if mixed_norm == 0.0:
        return np.zeros_like(raw)
    return mixed / mixed_norm


def _partition(indices: np.ndarray, batches: int) -> list[np.ndarray]:
    """Split into equal batches; the remainder goes to the last one."""
    size, rem = divmod(indices.size, batches)
    if size == 0:
        raise DimensionError(
            f"cannot split {indices.size} sequences into {batches} non-empty batches")
    out = [indices[i * size:(i + 1) * size] for i in range(batches)]
    if rem:
        out[-1] = np.concatenate([out[-1], indices[-rem:]])
    return out


def _mean_nll(kraus, rho0, ys, lengths, burn_in) -> float:
    logliks, _, _, _ = filter_batch(kraus, rho0, ys, lengths, burn_in)
    return float(-logliks.mean())


def train(data, n: int, s: int, w: int, config: TrainConfig,
          val_data=None, init: Hqmm | None = None):
    """Learn an (n, s, w)-HQMM from observation sequences.

    Runs config.restarts independent initializations; within each, E epochs
    of B batches with per-epoch step decay tau <- alpha * tau.  When
    ``val_data`` is given the returned model is the epoch-end snapshot with
    the best validation loss across all restarts, otherwise the final point
    of the best-training-loss restart.  Returns (model, history) where
    history is a list of per-batch records (epoch, batch, loss, tau,
    grad_norm_raw, stiefel_residual, wall_ms, restart).

    ``init`` pins the starting model of the first restart; later restarts
    draw fresh random points.  rho0 is drawn per restart and never trained.
    """
    if n < 1 or s < 1 or w < 1:
        raise DimensionError(f"need n, s, w >= 1, got n={n}, s={s}, w={w}")
    ys, lengths = pad_sequences(data)
    if ys.min() < 0 or ys.max() >= s:
        raise DimensionError(
            f"symbols must lie in [0, {s}), got range [{ys.min()}, {ys.max()}]")
    if config.burn_in >= lengths.min():
        raise DimensionError(
            f"burn_in {config.burn_in} must be shorter than the shortest "
            f"sequence ({lengths.min()})")
    val_ys = val_lengths = None
    if val_data is not None:
        val_ys, val_lengths = pad_sequences(val_data)

    seed_seq = np.random.SeedSequence(config.seed)
    children = seed_seq.spawn(config.restarts)
    num_seqs = ys.shape[0]
    history: list[dict] = []
    best_score = np.inf
    best_kappa = None
    best_rho0 = None

    for restart in range(config.restarts):
        rng = np.random.default_rng(children[restart])
        if init is not None and restart == 0:
            kappa = init.kappa.copy()
            rho0 = init.rho0.copy()
        else:
            kappa = random_stiefel(n, s * w, rng)
            rho0 = random_density(n, rng)
        state = OptimizerState(kappa=kappa, momentum=np.zeros_like(kappa),
                               tau=config.tau)
        converged = False
        final_train_loss = np.inf
        for epoch in range(config.epochs):
            state.epoch = epoch
            order = rng.permutation(num_seqs)
            for batch_idx, batch in enumerate(_partition(order, config.batches)):
                t0 = time.perf_counter()
                loss, grad = loss_gradient_padded(
                    state.kappa.reshape(s, w, n, n), rho0,
                    ys[batch], lengths[batch], config.burn_in)
                if not np.isfinite(loss):
                    raise NumericalError(
                        f"loss became non-finite at restart {restart}, epoch {epoch}, "
                        f"batch {batch_idx}")
                direction = descent_direction(grad, state, config.beta)
                if float(np.linalg.norm(direction)) == 0.0:
                    converged = True
                else:
                    state.kappa = cayley_retract_smw(state.kappa, direction, state.tau)
                final_train_loss = loss
                history.append({
                    "restart": restart,
                    "epoch": epoch,
                    "batch": batch_idx,
                    "loss": loss,
                    "tau": state.tau,
                    "grad_norm_raw": float(np.linalg.norm(grad)),
                    "stiefel_residual": stiefel_residual(state.kappa),
                    "wall_ms": (time.perf_counter() - t0) * 1e3,
                })
                if converged:
                    break
            if val_ys is not None:
                score = _mean_nll(state.kappa.reshape(s, w, n, n), rho0,
                                  val_ys, val_lengths, config.burn_in)
                if score < best_score:
                    best_score = score
                    best_kappa = state.kappa.copy()
                    best_rho0 = rho0
            state.tau *= config.alpha
            if converged:
                break
        if val_ys is None:
            if final_train_loss < best_score:
                best_score = final_train_loss
                best_kappa = state.kappa.copy()
                best_rho0 = rho0

    model = Hqmm(best_kappa.reshape(s, w, n, n), best_rho0)
    return model, history
