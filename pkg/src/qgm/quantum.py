"""Complex-matrix primitives: density matrices, Kraus channels, Stiefel stacking.

A quantum belief state is a Hermitian, positive semi-definite, trace-1
complex matrix.  A channel is given by an ordered set of Kraus operators
{K_i} with sum_i K_i^dag K_i = I; stacking the operators vertically yields
a matrix kappa with orthonormal columns (a point on the complex Stiefel
manifold), and any such point partitions back into a valid Kraus set.
All functions treat their array arguments as immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, DimensionError, ZeroProbabilityError

# Acceptance tolerances for externally supplied objects; internally
# constructed objects are held to ~1e-12.
EPS_HERM = 1e-8
EPS_TRACE = 1e-8
EPS_TP = 1e-8
EPS_STIEFEL = 1e-8
EPS_PSD = 1e-8

# CP certification: smallest admissible Choi eigenvalue.
CP_TOL = 1e-10

# Underflow floor separating true zero-probability observations from
# denormal noise.
P_MIN = 1e-300


@dataclass
class ValidityReport:
    """Outcome of a density-matrix check: violated invariants with residuals."""

    ok: bool
    violations: list[tuple[str, float]]

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(f"{name} (residual {res:.3e})" for name, res in self.violations)


def _as_complex(m) -> np.ndarray:
    return np.asarray(m, dtype=np.complex128)


def validate_density(m, eps_herm: float = EPS_HERM, eps_trace: float = EPS_TRACE,
                     eps_psd: float = EPS_PSD) -> ValidityReport:
    """Check Hermiticity, unit trace and positive semi-definiteness of ``m``.

    Returns a report listing each violated invariant with its measured
    residual.  PSD is judged on the smallest eigenvalue of the Hermitian
    part, which is robust to 1e-15-scale asymmetry.
    """
    m = _as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {m.shape}")
    violations = []
    herm_residual = float(np.linalg.norm(m - m.conj().T))
    if herm_residual > eps_herm:
        violations.append(("hermitian", herm_residual))
    trace_residual = float(abs(np.trace(m) - 1.0))
    if trace_residual > eps_trace:
        violations.append(("unit_trace", trace_residual))
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    if min_eig < -eps_psd:
        violations.append(("psd", -min_eig))
    return ValidityReport(ok=not violations, violations=violations)


def require_density(m, name: str = "rho", **tolerances) -> np.ndarray:
    """Return ``m`` as complex128, raising ConstraintError if it is not a valid state."""
    report = validate_density(m, **tolerances)
    if not report:
        raise ConstraintError(f"{name} is not a valid density matrix: {report.describe()}")
    return _as_complex(m)


def validate_belief(x, eps: float = EPS_TRACE) -> np.ndarray:
    """Check that ``x`` is a probability vector; returns it as float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"belief vector must be 1-d, got shape {x.shape}")
    if x.min() < -eps:
        raise ConstraintError(f"belief vector has negative entry {x.min():.3e}")
    if abs(x.sum() - 1.0) > eps:
        raise ConstraintError(f"belief vector sums to {x.sum()!r}, expected 1")
    return x


def _as_kraus_array(ops) -> np.ndarray:
    """Stacked (N, n, n) complex view of a Kraus operator list, with shape checks."""
    arr = _as_complex(ops)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError(f"Kraus operators must be square and same-sized, got {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ConstraintError("Kraus operators contain non-finite entries")
    return arr


def kraus_tp_residual(ops) -> float:
    """Frobenius distance of sum_i K_i^dag K_i from the identity."""
    arr = _as_kraus_array(ops)
    gram = np.einsum("wji,wjk->ik", arr.conj(), arr)
    return float(np.linalg.norm(gram - np.eye(arr.shape[1])))


def require_trace_preserving(ops, eps: float = EPS_TP) -> np.ndarray:
    arr = _as_kraus_array(ops)
    residual = kraus_tp_residual(arr)
    if residual > eps:
        raise ConstraintError(
            f"Kraus set is not trace-preserving: ||sum K^dag K - I|| = {residual:.3e}")
    return arr


def apply_channel(ops, rho) -> np.ndarray:
    """Operator-sum action sum_i K_i rho K_i^dag of a trace-preserving set."""
    arr = require_trace_preserving(ops)
    rho = require_density(rho)
    if rho.shape[0] != arr.shape[1]:
        raise DimensionError(
            f"dimension mismatch: operators are {arr.shape[1]}x{arr.shape[2]}, "
            f"state is {rho.shape[0]}x{rho.shape[1]}")
    return np.einsum("wij,jk,wlk->il", arr, rho, arr.conj())


def bayes_condition(ops, rho, p_min: float = P_MIN) -> tuple[np.ndarray, float]:
    """Condition ``rho`` on the observation whose operators are ``ops``.

    Returns (posterior, probability) where the probability is the trace of
    sum_i K_i rho K_i^dag and the posterior is that matrix renormalized.
    Raises ZeroProbabilityError when the probability falls below ``p_min``.
    """
    arr = _as_kraus_array(ops)
    rho = _as_complex(rho)
    if rho.shape[0] != arr.shape[1]:
        raise DimensionError(
            f"dimension mismatch: operators are {arr.shape[1]}x{arr.shape[2]}, "
            f"state is {rho.shape[0]}x{rho.shape[1]}")
    numerator = np.einsum("wij,jk,wlk->il", arr, rho, arr.conj())
    prob = float(np.trace(numerator).real)
    if prob < p_min:
        raise ZeroProbabilityError(step=0, symbol=None,
                                   context="bayes_condition probability underflow")
    return numerator / prob, prob


def stack_kraus(ops) -> np.ndarray:
    """Vertically stack a trace-preserving set into an (nN, n) Stiefel point."""
    arr = require_trace_preserving(ops)
    n = arr.shape[1]
    return arr.reshape(arr.shape[0] * n, n)


def unstack_kraus(kappa, block_dim: int) -> np.ndarray:
    """Partition an (nN, n) Stiefel point into its N Kraus blocks."""
    kappa = _as_complex(kappa)
    if kappa.ndim != 2 or kappa.shape[1] != block_dim:
        raise DimensionError(f"expected an ({block_dim}N, {block_dim}) matrix, got {kappa.shape}")
    if kappa.shape[0] % block_dim != 0:
        raise DimensionError(
            f"row count {kappa.shape[0]} is not divisible by block_dim {block_dim}")
    residual = stiefel_residual(kappa)
    if residual > EPS_STIEFEL:
        raise ConstraintError(f"matrix is off the Stiefel manifold: residual {residual:.3e}")
    return kappa.reshape(-1, block_dim, block_dim)


def stiefel_residual(kappa) -> float:
    """Frobenius distance of kappa^dag kappa from the identity."""
    kappa = _as_complex(kappa)
    return float(np.linalg.norm(kappa.conj().T @ kappa - np.eye(kappa.shape[1])))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussian samples (unit total variance per entry)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_stiefel(n: int, num_blocks: int, seed=None) -> np.ndarray:
    """Draw a uniform-like (nN, n) matrix with orthonormal columns.

    QR of a complex Gaussian with the R diagonal's phases absorbed into Q,
    which makes the factorization (hence the draw) unique and deterministic
    under the seed.
    """
    if n < 1 or num_blocks < 1:
        raise DimensionError(f"need n >= 1 and N >= 1, got n={n}, N={num_blocks}")
    rng = _rng(seed)
    z = complex_normal(rng, (n * num_blocks, n))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r).copy()
    diag[diag == 0] = 1.0
    phases = diag / np.abs(diag)
    return q * phases[None, :]


def random_density(n: int, seed=None) -> np.ndarray:
    """Random full-rank density matrix X X^dag / tr(X X^dag)."""
    rng = _rng(seed)
    x = complex_normal(rng, (n, n))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def choi_matrix(channel, dim: int | None = None) -> np.ndarray:
    """The n^2 x n^2 Choi matrix sum_ij E_ij (x) channel(E_ij).

    ``channel`` is either a Kraus operator stack or a callable acting on
    n x n matrices; for a callable ``dim`` must be given.
    """
    if callable(channel):
        if dim is None:
            raise DimensionError("dim is required when the channel is a callable")
        apply_map = channel
        n = dim
    else:
        arr = _as_kraus_array(channel)
        n = arr.shape[1]

        def apply_map(m):
            return np.einsum("wij,jk,wlk->il", arr, m, arr.conj())

    choi = np.zeros((n * n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            unit = np.zeros((n, n), dtype=np.complex128)
            unit[i, j] = 1.0
            choi += np.kron(unit, np.asarray(apply_map(unit), dtype=np.complex128))
    return choi


def choi_psd_check(channel, dim: int | None = None,
                   tol: float = CP_TOL) -> tuple[bool, float]:
    """Certify complete positivity: (is_cp, smallest Choi eigenvalue)."""
    choi = choi_matrix(channel, dim)
    min_eig = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min())
    return min_eig >= -tol, min_eig
