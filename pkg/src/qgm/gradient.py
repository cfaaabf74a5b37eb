"""Exact loss gradient via a hand-rolled reverse pass, plus an FD oracle.

The training loss is the batch mean of the negative log-likelihood.  Its
gradient with respect to the conjugated Kraus parameters (the Wirtinger
derivative d loss / d conj(kappa), the steepest-descent direction for a
real loss) is accumulated by reverse induction through the filtering
recursion.  With Hermitian adjoint E_t = d loss / d rho_t the step

    numer_t = sum_w K_w rho_{t-1} K_w^dag,  p_t = tr(numer_t),
    rho_t = numer_t / p_t,  loss term -ln p_t (counted steps only)

pulls back as

    S_t = E_t / p_t + c_t I,   c_t = (-[t counted] - tr(E_t rho_t)) / p_t,
    d loss / d conj(K_w)  +=  S_t K_w rho_{t-1},
    E_{t-1} = sum_w K_w^dag S_t K_w.

The per-entry identity behind the middle line is
d tr(sum_w K_w rho K_w^dag) / d conj(K_w) = K_w rho.

The FD oracle perturbs real and imaginary parts independently and
assembles (d/dRe + i d/dIm) / 2.  It deliberately evaluates the loss
without re-projecting to the manifold: the analytic gradient is the
ambient one the retraction consumes.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .hqmm import Hqmm, filter_batch


def pad_sequences(batch) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad a list of int sequences into (ys (m, T), lengths (m,))."""
    seqs = [np.asarray(seq, dtype=np.int64) for seq in batch]
    if not seqs:
        raise DimensionError("batch is empty")
    for seq in seqs:
        if seq.ndim != 1 or seq.size == 0:
            raise DimensionError("each sequence must be a non-empty 1-d int array")
    lengths = np.array([seq.size for seq in seqs], dtype=np.int64)
    ys = np.zeros((len(seqs), int(lengths.max())), dtype=np.int64)
    for i, seq in enumerate(seqs):
        ys[i, :seq.size] = seq
    return ys, lengths


def batch_loss(kraus, rho0, ys, lengths=None, burn_in: int = 0) -> float:
    """Mean negative log-likelihood of a padded batch under a raw Kraus grid."""
    logliks, _, _, _ = filter_batch(kraus, rho0, ys, lengths, burn_in)
    return float(-logliks.mean())


def loss_gradient(model: Hqmm, batch, burn_in: int = 0):
    """(loss, gradient) for a batch of sequences.

    The gradient comes back in the stacked kappa layout, an (s*w*n, n)
    complex matrix whose blocks follow the (y major, w minor) grid order.
    """
    ys, lengths = pad_sequences(batch)
    if ys.min() < 0 or ys.max() >= model.s:
        raise DimensionError(
            f"symbols must lie in [0, {model.s}), got range [{ys.min()}, {ys.max()}]")
    return loss_gradient_padded(model.kraus, model.rho0, ys, lengths, burn_in)


def loss_gradient_padded(kraus, rho0, ys, lengths=None, burn_in: int = 0):
    """loss_gradient on pre-padded arrays; kraus is the (s, w, n, n) grid."""
    kraus = np.asarray(kraus, dtype=np.complex128)
    m, total = ys.shape
    n = kraus.shape[2]
    logliks, probs, states, active = filter_batch(
        kraus, rho0, ys, lengths, burn_in, store_states=True)
    loss = float(-logliks.mean())

    grad = np.zeros_like(kraus)
    adjoint = np.zeros((m, n, n), dtype=np.complex128)
    eye = np.eye(n)
    for t in range(total - 1, -1, -1):
        act = active[t]
        if not act.any():
            continue
        ops = kraus[ys[:, t]]
        rho_prev = states[t]
        rho_t = states[t + 1]
        p = probs[t]
        counted = 1.0 if t >= burn_in else 0.0
        tr_erho = np.einsum("mij,mji->m", adjoint, rho_t).real
        c = (-counted - tr_erho) / p
        s_mat = adjoint / p[:, None, None] + c[:, None, None] * eye[None, :, :]
        s_mat = np.where(act[:, None, None], s_mat, 0.0)
        contrib = s_mat[:, None] @ ops @ rho_prev[:, None]
        np.add.at(grad, ys[:, t], contrib)
        pulled = (ops.conj().transpose(0, 1, 3, 2) @ s_mat[:, None] @ ops).sum(axis=1)
        adjoint = np.where(act[:, None, None], pulled, adjoint)
    return loss, grad.reshape(-1, n) / m


def wirtinger_fd(func, kappa, h: float = 1e-5) -> np.ndarray:
    """Central-difference Wirtinger gradient d func / d conj(kappa).

    ``func`` maps a complex array of kappa's shape to a real scalar.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    kappa = np.asarray(kappa, dtype=np.complex128)
    grad = np.zeros_like(kappa)
    it = np.nditer(np.zeros(kappa.shape), flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        for part, unit in ((0, 1.0), (1, 1.0j)):
            bumped = kappa.copy()
            bumped[idx] += h * unit
            up = func(bumped)
            bumped = kappa.copy()
            bumped[idx] -= h * unit
            down = func(bumped)
            partial = (up - down) / (2.0 * h)
            grad[idx] += 0.5 * partial * (1.0 if part == 0 else 1.0j)
    return grad


def finite_difference_gradient(model: Hqmm, batch, burn_in: int = 0,
                               h: float = 1e-5) -> np.ndarray:
    """FD oracle for loss_gradient, same stacked (s*w*n, n) layout."""
    ys, lengths = pad_sequences(batch)
    s, w, n = model.s, model.w, model.n

    def eval_loss(kappa):
        return batch_loss(kappa.reshape(s, w, n, n), model.rho0, ys, lengths, burn_in)

    return wirtinger_fd(eval_loss, model.kappa, h)


def gradient_check(model: Hqmm, batch, burn_in: int = 0, h: float = 1e-5,
                   sabotage: float = 0.0) -> dict:
    """Compare analytic and FD gradients; returns a machine-readable report.

    ``sabotage`` adds that multiple of a fixed perturbation to the analytic
    gradient before comparing, so a pipeline can prove the check is able to
    fail.
    """
    loss, analytic = loss_gradient(model, batch, burn_in)
    if sabotage:
        bump = np.zeros_like(analytic)
        bump[0, 0] = sabotage * (1.0 + max(1.0, float(np.abs(analytic).max())))
        analytic = analytic + bump
    numeric = finite_difference_gradient(model, batch, burn_in, h)
    n = model.n
    an_blocks = analytic.reshape(model.s, model.w, n, n)
    fd_blocks = numeric.reshape(model.s, model.w, n, n)
    scale = max(float(np.linalg.norm(numeric)), 1e-30)
    blocks = []
    for y in range(model.s):
        for w in range(model.w):
            err = float(np.linalg.norm(an_blocks[y, w] - fd_blocks[y, w]))
            blocks.append({"symbol": y, "env": w, "abs_error": err,
                           "rel_error": err / scale})
    total_err = float(np.linalg.norm(analytic - numeric)) / scale
    return {
        "loss": loss,
        "h": h,
        "rel_error": total_err,
        "max_block_rel_error": max(b["rel_error"] for b in blocks),
        "blocks": blocks,
        "ok": bool(total_err < 1e-6),
    }
