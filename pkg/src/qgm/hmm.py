"""Classical HMM reference: forward filtering, Baum-Welch EM, sampling.

Conventions, shared with the quantum side so the two stay comparable:
the hidden chain starts at the prior and makes one transition before the
first emission, i.e. s_0 ~ prior, s_t ~ A[:, s_{t-1}], y_t ~ C[:, s_t]
for t = 1..ell.  A is the n x n column-stochastic transition matrix, C
the s x n column-stochastic emission matrix.  Filtering condenses both
into per-symbol operators T_y = diag(C[y, :]) @ A.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, DimensionError, ZeroProbabilityError
from .quantum import P_MIN, validate_belief

# Column-stochasticity tolerance for externally supplied matrices.
EPS_STOCH = 1e-10


def _require_column_stochastic(m, name: str, eps: float = EPS_STOCH) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {m.shape}")
    if m.min() < -eps:
        raise ConstraintError(f"{name} has negative entry {m.min():.3e}")
    col_err = float(np.abs(m.sum(axis=0) - 1.0).max())
    if col_err > eps:
        raise ConstraintError(f"{name} columns must sum to 1, worst residual {col_err:.3e}")
    return m


@dataclass(frozen=True)
class Hmm:
    """Hidden Markov model with column-stochastic transition and emission."""

    transition: np.ndarray
    emission: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        a = _require_column_stochastic(self.transition, "transition")
        c = _require_column_stochastic(self.emission, "emission")
        prior = validate_belief(self.prior, eps=EPS_STOCH)
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"transition must be square, got {a.shape}")
        if c.shape[1] != a.shape[0]:
            raise DimensionError(
                f"emission has {c.shape[1]} state columns, transition has {a.shape[0]} states")
        if prior.shape[0] != a.shape[0]:
            raise DimensionError(
                f"prior has {prior.shape[0]} entries, transition has {a.shape[0]} states")
        object.__setattr__(self, "transition", a)
        object.__setattr__(self, "emission", c)
        object.__setattr__(self, "prior", prior)

    @property
    def n(self) -> int:
        return self.transition.shape[0]

    @property
    def s(self) -> int:
        return self.emission.shape[0]


def oom_operators(hmm: Hmm) -> np.ndarray:
    """Per-symbol filtering operators, stacked (s, n, n): T_y = diag(C[y,:]) A."""
    return hmm.emission[:, :, None] * hmm.transition[None, :, :]


def _as_symbols(seq, s: int) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise DimensionError(f"observation sequence must be 1-d, got shape {seq.shape}")
    if seq.size == 0:
        raise DimensionError("observation sequence is empty")
    if not np.issubdtype(seq.dtype, np.integer):
        raise DimensionError(f"symbols must be integers, got dtype {seq.dtype}")
    if seq.min() < 0 or seq.max() >= s:
        raise DimensionError(
            f"symbols must lie in [0, {s}), got range [{seq.min()}, {seq.max()}]")
    return seq.astype(np.int64)


def forward_log_likelihood(hmm: Hmm, seq, burn_in: int = 0) -> float:
    """Scaled forward-filter log-likelihood of the post-burn-in tail.

    The first ``burn_in`` symbols update the belief but contribute no
    likelihood terms.
    """
    seq = _as_symbols(seq, hmm.s)
    if not 0 <= burn_in < seq.size:
        raise DimensionError(f"need 0 <= burn_in < length, got burn_in={burn_in}, "
                             f"length={seq.size}")
    a, c = hmm.transition, hmm.emission
    x = hmm.prior
    total = 0.0
    for t, y in enumerate(seq):
        v = c[y] * (a @ x)
        p = float(v.sum())
        if p < P_MIN:
            raise ZeroProbabilityError(step=t + 1, symbol=int(y))
        x = v / p
        if t >= burn_in:
            total += np.log(p)
    return total


def sample_hmm(hmm: Hmm, length: int, seed, num_sequences: int | None = None):
    """Sample observation sequences; scalar seed makes the draw reproducible.

    Returns a 1-d int array of ``length`` symbols, or an
    (num_sequences, length) array when ``num_sequences`` is given.
    """
    if length < 1:
        raise DimensionError(f"length must be >= 1, got {length}")
    single = num_sequences is None
    m = 1 if single else num_sequences
    if m < 1:
        raise DimensionError(f"num_sequences must be >= 1, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cum_a = np.cumsum(hmm.transition, axis=0)
    cum_c = np.cumsum(hmm.emission, axis=0)
    cum_prior = np.cumsum(hmm.prior)
    state = np.searchsorted(cum_prior, rng.random(m), side="right")
    state = np.minimum(state, hmm.n - 1)
    out = np.empty((m, length), dtype=np.int64)
    for t in range(length):
        u = rng.random(m)
        state = (u[:, None] < cum_a[:, state].T).argmax(axis=1)
        u = rng.random(m)
        out[:, t] = (u[:, None] < cum_c[:, state].T).argmax(axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class EmConfig:
    """Baum-Welch settings."""

    max_iters: int = 100
    tol: float = 1e-6
    smoothing: float = 1e-9
    restarts: int = 5
    seed: int | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.smoothing < 0:
            raise ValueError(f"smoothing must be >= 0, got {self.smoothing}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


def _group_by_length(data, s: int) -> list[np.ndarray]:
    groups: dict[int, list[np.ndarray]] = {}
    for seq in data:
        seq = _as_symbols(seq, s)
        groups.setdefault(seq.size, []).append(seq)
    return [np.stack(seqs) for _, seqs in sorted(groups.items())]


def _e_step_batch(a, c, prior, ys):
    """Forward-backward statistics for a batch of equal-length sequences.

    Returns (loglik, prior_counts, transition_counts, emission_counts), each
    summed over the batch.  Uses per-step scaling throughout.
    """
    m, length = ys.shape
    n = a.shape[0]
    alphas = np.empty((length + 1, m, n))
    scales = np.empty((length + 1, m))
    alphas[0] = prior[None, :]
    scales[0] = 1.0
    for t in range(1, length + 1):
        pred = alphas[t - 1] @ a.T
        raw = c[ys[:, t - 1]] * pred
        z = raw.sum(axis=1)
        if z.min() < P_MIN:
            seq_idx = int(z.argmin())
            raise ZeroProbabilityError(step=t, symbol=int(ys[seq_idx, t - 1]),
                                       sequence=seq_idx)
        scales[t] = z
        alphas[t] = raw / z[:, None]
    loglik = float(np.log(scales[1:]).sum())

    s = c.shape[0]
    trans_counts = np.zeros((n, n))
    emis_counts = np.zeros((s, n))
    beta = np.ones((m, n))
    for t in range(length, 0, -1):
        u = c[ys[:, t - 1]] * beta / scales[t][:, None]
        trans_counts += (u.T @ alphas[t - 1]) * a
        gamma = alphas[t] * beta
        np.add.at(emis_counts, ys[:, t - 1], gamma)
        beta = u @ a
    prior_counts = (alphas[0] * beta).sum(axis=0)
    return loglik, prior_counts, trans_counts, emis_counts


def _normalize_columns(counts: np.ndarray, smoothing: float) -> np.ndarray:
    counts = counts + smoothing
    return counts / counts.sum(axis=0, keepdims=True)


def _random_hmm(n: int, s: int, rng: np.random.Generator) -> Hmm:
    a = _normalize_columns(rng.random((n, n)) + 0.05, 0.0)
    c = _normalize_columns(rng.random((s, n)) + 0.05, 0.0)
    prior = rng.random(n) + 0.05
    return Hmm(a, c, prior / prior.sum())


def _em_run(batches, n, s, config: EmConfig, start: Hmm):
    a, c, prior = start.transition, start.emission, start.prior
    history: list[float] = []
    for _ in range(config.max_iters):
        total_ll = 0.0
        prior_counts = np.zeros(n)
        trans_counts = np.zeros((n, n))
        emis_counts = np.zeros((s, n))
        for ys in batches:
            ll, pc, tc, ec = _e_step_batch(a, c, prior, ys)
            total_ll += ll
            prior_counts += pc
            trans_counts += tc
            emis_counts += ec
        history.append(total_ll)
        a = _normalize_columns(trans_counts, config.smoothing)
        c = _normalize_columns(emis_counts, config.smoothing)
        prior = prior_counts + config.smoothing
        prior = prior / prior.sum()
        if len(history) >= 2:
            prev, cur = history[-2], history[-1]
            if cur - prev < config.tol * abs(prev):
                break
    return Hmm(a, c, prior), history


def baum_welch_fit(data, n: int, s: int, config: EmConfig = EmConfig(),
                   init: Hmm | None = None, val_data=None) -> tuple[Hmm, list[float]]:
    """Fit an (n, s)-HMM by EM; returns the model and its log-likelihood history.

    Restarts from random initializations (config.restarts of them) and keeps
    the run with the best validation log-likelihood, falling back to training
    log-likelihood when ``val_data`` is absent.  Passing ``init`` runs EM once
    from exactly those parameters instead.
    """
    if n < 1 or s < 1:
        raise DimensionError(f"need n >= 1 and s >= 1, got n={n}, s={s}")
    data = list(data)
    if not data:
        raise DimensionError("baum_welch_fit needs at least one sequence")
    batches = _group_by_length(data, s)
    rng = np.random.default_rng(config.seed)

    if init is not None:
        return _em_run(batches, n, s, config, init)

    def score(model: Hmm, history: list[float]) -> float:
        if val_data is None:
            return history[-1]
        return sum(forward_log_likelihood(model, seq) for seq in val_data)

    best = None
    for _ in range(config.restarts):
        model, history = _em_run(batches, n, s, config, _random_hmm(n, s, rng))
        candidate = (score(model, history), model, history)
        if best is None or candidate[0] > best[0]:
            best = candidate
    return best[1], best[2]
