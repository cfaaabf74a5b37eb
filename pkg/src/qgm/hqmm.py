"""Hidden quantum Markov models: filtering, likelihood, sampling, HMM embedding.

The belief state is a density matrix rho.  Observing symbol y applies the
condensed update

    rho' = sum_w K[y, w] rho K[y, w]^dag / p,    p = tr(numerator),

where the (s, w) grid of Kraus operators, flattened in (y major, w minor)
order, is a trace-preserving set.  p is the probability of the observation,
so a sequence's log-likelihood is the sum of per-step ln p.  Stepwise
renormalization telescopes: the sum equals the log-trace of the single
nested operator product, but survives lengths in the hundreds where the raw
product underflows.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .errors import ConstraintError, DimensionError, ZeroProbabilityError
from .hmm import Hmm, _as_symbols, oom_operators
from .quantum import EPS_TP, P_MIN, kraus_tp_residual, validate_density


@dataclass(frozen=True)
class Hqmm:
    """Immutable HQMM: Kraus grid (s, w, n, n) and initial state rho0 (n, n)."""

    kraus: np.ndarray
    rho0: np.ndarray
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        kraus = np.asarray(self.kraus, dtype=np.complex128)
        rho0 = np.asarray(self.rho0, dtype=np.complex128)
        if kraus.ndim != 4 or kraus.shape[2] != kraus.shape[3]:
            raise DimensionError(
                f"kraus must have shape (s, w, n, n), got {kraus.shape}")
        if rho0.shape != kraus.shape[2:]:
            raise DimensionError(
                f"rho0 shape {rho0.shape} does not match latent dimension {kraus.shape[2]}")
        if validate:
            residual = kraus_tp_residual(kraus.reshape(-1, *kraus.shape[2:]))
            if residual > EPS_TP:
                raise ConstraintError(
                    f"flattened Kraus grid is not trace-preserving: residual {residual:.3e}")
            report = validate_density(rho0)
            if not report:
                raise ConstraintError(f"rho0 is not a valid density matrix: {report.describe()}")
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "rho0", rho0)

    @property
    def s(self) -> int:
        return self.kraus.shape[0]

    @property
    def w(self) -> int:
        return self.kraus.shape[1]

    @property
    def n(self) -> int:
        return self.kraus.shape[2]

    @property
    def kappa(self) -> np.ndarray:
        """The (s*w*n, n) vertical stacking of the grid in (y, w) order."""
        return self.kraus.reshape(-1, self.n)

    @classmethod
    def from_kappa(cls, kappa, s: int, w: int, rho0, validate: bool = True) -> "Hqmm":
        kappa = np.asarray(kappa, dtype=np.complex128)
        n = kappa.shape[1] if kappa.ndim == 2 else 0
        if kappa.ndim != 2 or kappa.shape[0] != s * w * n:
            raise DimensionError(
                f"kappa shape {kappa.shape} does not factor as (s*w*n, n) with s={s}, w={w}")
        return cls(kappa.reshape(s, w, n, n), rho0, validate=validate)


def filter_batch(kraus, rho0, ys, lengths=None, burn_in: int = 0,
                 store_states: bool = False):
    """Filter a padded batch of sequences through one Kraus grid.

    kraus is (s, w, n, n) and need not be trace-preserving (off-manifold
    evaluation is well defined: each step renormalizes by the trace, and the
    accumulated log-probabilities telescope).  ys is an (m, T) int array;
    ``lengths`` marks the valid prefix of each row (default: all of it).
    Steps with index < burn_in update the state but add nothing to the
    log-likelihood.

    Returns (logliks (m,), probs (T, m), states, active (T, m)) where states
    is the (T+1, m, n, n) trajectory when requested, else None.
    """
    kraus = np.asarray(kraus, dtype=np.complex128)
    ys = np.asarray(ys, dtype=np.int64)
    if ys.ndim != 2:
        raise DimensionError(f"ys must be (m, T), got shape {ys.shape}")
    m, total = ys.shape
    n = kraus.shape[2]
    if lengths is None:
        lengths = np.full(m, total, dtype=np.int64)
    else:
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (m,) or lengths.min() < 1 or lengths.max() > total:
            raise DimensionError(f"lengths must be (m,) within [1, {total}]")
    if not 0 <= burn_in < lengths.min():
        raise DimensionError(
            f"need 0 <= burn_in < shortest length, got burn_in={burn_in}, "
            f"shortest={lengths.min()}")

    rho = np.broadcast_to(np.asarray(rho0, dtype=np.complex128), (m, n, n)).copy()
    logliks = np.zeros(m)
    probs = np.empty((total, m))
    active = np.arange(total)[:, None] < lengths[None, :]
    states = np.empty((total + 1, m, n, n), dtype=np.complex128) if store_states else None
    if store_states:
        states[0] = rho
    for t in range(total):
        ops = kraus[ys[:, t]]
        left = ops @ rho[:, None, :, :]
        numer = (left @ ops.conj().transpose(0, 1, 3, 2)).sum(axis=1)
        p = np.einsum("mii->m", numer).real
        act = active[t]
        bad = act & (p < P_MIN)
        if bad.any():
            idx = int(np.argmax(bad))
            raise ZeroProbabilityError(step=t + 1, symbol=int(ys[idx, t]), sequence=idx)
        p = np.where(act, p, 1.0)
        rho = np.where(act[:, None, None], numer / p[:, None, None], rho)
        probs[t] = p
        if t >= burn_in:
            logliks += np.where(act, np.log(p), 0.0)
        if store_states:
            states[t + 1] = rho
    return logliks, probs, states, active


def filter_step(model: Hqmm, rho, y: int, step: int = 0):
    """One conditioning step: returns (rho_next, log_prob) for symbol y."""
    if not 0 <= y < model.s:
        raise DimensionError(f"symbol {y} out of range [0, {model.s})")
    rho = np.asarray(rho, dtype=np.complex128)
    ops = model.kraus[y]
    numer = np.einsum("wij,jk,wlk->il", ops, rho, ops.conj())
    p = float(np.trace(numer).real)
    if p < P_MIN:
        raise ZeroProbabilityError(step=step, symbol=int(y))
    return numer / p, float(np.log(p))


def log_likelihood(model: Hqmm, seq, burn_in: int = 0) -> float:
    """ln P of the post-burn-in tail of one sequence under the model."""
    seq = _as_symbols(seq, model.s)
    if not 0 <= burn_in < seq.size:
        raise DimensionError(f"need 0 <= burn_in < length, got burn_in={burn_in}, "
                             f"length={seq.size}")
    rho = model.rho0
    total = 0.0
    for t, y in enumerate(seq):
        rho, logp = filter_step(model, rho, int(y), step=t + 1)
        if t >= burn_in:
            total += logp
    return total


def log_likelihood_batch(model: Hqmm, ys, lengths=None, burn_in: int = 0) -> np.ndarray:
    """Per-sequence log-likelihoods for a padded (m, T) symbol array."""
    ys = np.asarray(ys, dtype=np.int64)
    if ys.size and (ys.min() < 0 or ys.max() >= model.s):
        raise DimensionError(
            f"symbols must lie in [0, {model.s}), got range [{ys.min()}, {ys.max()}]")
    logliks, _, _, _ = filter_batch(model.kraus, model.rho0, ys, lengths, burn_in)
    return logliks


def sample(model: Hqmm, length: int, seed, num_sequences: int | None = None):
    """Sample observation sequences from the model, deterministic under seed.

    Returns a 1-d int array, or (num_sequences, length) when
    ``num_sequences`` is given.
    """
    if length < 1:
        raise DimensionError(f"length must be >= 1, got {length}")
    single = num_sequences is None
    m = 1 if single else num_sequences
    if m < 1:
        raise DimensionError(f"num_sequences must be >= 1, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kraus = model.kraus
    n = model.n
    rho = np.broadcast_to(model.rho0, (m, n, n)).copy()
    out = np.empty((m, length), dtype=np.int64)
    for t in range(length):
        # p[i, y] = tr(sum_w K[y,w] rho_i K[y,w]^dag), a distribution over y.
        p = np.einsum("ywij,mjk,ywik->my", kraus, rho, kraus.conj()).real
        cum = np.cumsum(p, axis=1)
        u = rng.random(m) * cum[:, -1]
        drawn = (u[:, None] < cum).argmax(axis=1)
        out[:, t] = drawn
        ops = kraus[drawn]
        left = ops @ rho[:, None, :, :]
        numer = (left @ ops.conj().transpose(0, 1, 3, 2)).sum(axis=1)
        rho = numer / p[np.arange(m), drawn][:, None, None]
    return out[0] if single else out


def encode_hmm(hmm: Hmm) -> Hqmm:
    """Embed a classical HMM as an (n, s, w=n)-HQMM with identical filtering.

    Block w of symbol y carries the w-th column of T_y = diag(C[y,:]) A in
    its own w-th column, square-rooted:  K[y, w][i, j] = delta_{jw}
    sqrt(T_y[i, w]).  The flattened set is trace-preserving because
    sum_y T_y = A is column-stochastic, and the channel reads only the
    diagonal of rho, so diagonal beliefs evolve exactly like the classical
    forward filter.
    """
    t_ops = oom_operators(hmm)
    n = hmm.n
    sq = np.sqrt(t_ops)
    kraus = np.zeros((hmm.s, n, n, n), dtype=np.complex128)
    for w in range(n):
        kraus[:, w, :, w] = sq[:, :, w]
    return Hqmm(kraus, np.diag(hmm.prior).astype(np.complex128))


def random_hqmm(n: int, s: int, w: int, seed) -> Hqmm:
    """Random HQMM: Stiefel-uniform Kraus grid and a random full-rank rho0."""
    from .quantum import random_density, random_stiefel

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kappa = random_stiefel(n, s * w, rng)
    rho0 = random_density(n, rng)
    return Hqmm(kappa.reshape(s, w, n, n), rho0)


def require_hqmm_dims(n: int, s: int, w: int) -> None:
    if n < 1 or s < 1 or w < 1:
        raise DimensionError(f"need n, s, w >= 1, got n={n}, s={s}, w={w}")
