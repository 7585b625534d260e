"""Identifiability and convergence diagnostics for the commutation objective.

Three questions are answered here, each tied to the spectrum of an operator
built from the covariance C (eigendecomposition C = V diag(lam) V'):

* Is the admissible set of matrices sharing C's eigenvectors a singleton?
  Decided from ranks of the self Khatri-Rao product W = V (.) V: the rows of W
  at diagonal positions (W_D, equal to V * V entrywise) must leave a kernel of
  dimension k that the rows at the known-entry positions resolve completely.

* Is the smooth objective strongly convex across hollow matrices?  Decided
  from sigma_min of the commutation operator Psi = C (x) I - I (x) C restricted
  to off-diagonal columns; the certified modulus is m = mu * sigma_min^2.

* Do the streaming iterates obey their error and regret guarantees?  Evaluated
  from per-step measured constants: an exact recursion (and a worst-case closed
  form) for the tracking error, and an averaged-optimum decomposition for the
  static regret.

Time convention for the bounds: the online solver produces its step-t iterate
from the step-t covariance, so the guarantee chain pairs the iterate entering
step t with the objective after that step's covariance update.  All bound
inputs therefore come from trace records alone; record index tau (0-based) is
"time tau" below, and ``s0_error`` is the tracking error measured at the very
first record.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse.linalg

from .diffusion import FilterSpec, frequency_response

DEFAULT_RANK_TOL = 1e-8
EXACT_LIMIT = 150
AUTO_EXACT_CUTOFF = 40


def _rank(singular_values: np.ndarray, rank_tol: float) -> int:
    if singular_values.size == 0:
        return 0
    cutoff = rank_tol * singular_values[0]
    return int(np.count_nonzero(singular_values > cutoff))


def khatri_rao_self(eigenvectors: np.ndarray, max_n: int = 256) -> np.ndarray:
    """Column-wise self Khatri-Rao product W = V (.) V, shape (n^2, n).

    Row i * n + j of the result is the entrywise product of rows i and j of V.
    Materializing W is only sensible for moderate n; beyond ``max_n`` use
    :func:`eigenvector_squares` (the diagonal rows), which is all the
    feasibility test needs.
    """
    v = np.asarray(eigenvectors, dtype=float)
    n = v.shape[0]
    if v.ndim != 2 or v.shape[1] != n:
        raise ValueError(f"dimension error: eigenvector matrix must be square, got {v.shape}")
    if n > max_n:
        raise ValueError(
            f"parameter error: refusing to materialize a {n * n} x {n} Khatri-Rao product; "
            "use eigenvector_squares for the diagonal rows"
        )
    return np.einsum("ir,jr->ijr", v, v).reshape(n * n, n)


def eigenvector_squares(eigenvectors: np.ndarray) -> np.ndarray:
    """The diagonal rows W_D of the self Khatri-Rao product: V * V entrywise."""
    v = np.asarray(eigenvectors, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"dimension error: eigenvector matrix must be square, got {v.shape}")
    return v * v


@dataclasses.dataclass(frozen=True)
class FeasibilityReport:
    """Singleton test for the eigenvector-sharing admissible set."""

    n: int
    rank_wd: int
    kernel_dim: int
    rank_wmu: int
    singleton: bool
    rank_tol: float
    note: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def feasibility(eigenvectors: np.ndarray, constraints=None,
                rank_tol: float = DEFAULT_RANK_TOL) -> FeasibilityReport:
    """Decide whether eigenvectors plus known entries pin down a unique matrix.

    Hollow matrices with eigenvectors V form a linear slice of dimension
    k = n - rank(W_D).  Each known entry at pair (i, j) contributes the row
    v_i * v_j; the slice collapses to a single point iff those rows have rank
    k on the kernel basis of W_D.  The full n^2 x n product is never formed.
    """
    v = np.asarray(eigenvectors, dtype=float)
    wd = eigenvector_squares(v)
    n = wd.shape[0]
    _, sv, vt = np.linalg.svd(wd)
    rank_wd = _rank(sv, rank_tol)
    k = n - rank_wd
    if k == 0:
        return FeasibilityReport(n, rank_wd, 0, 0, True, rank_tol,
                                 note="full-rank W_D: the zero matrix is the only candidate")
    pairs = constraints.pairs if constraints is not None and len(constraints) else []
    if not pairs:
        return FeasibilityReport(n, rank_wd, k, 0, False, rank_tol,
                                 note="no known entries: kernel directions unresolved")
    if max(max(i, j) for i, j in pairs) >= n:
        raise ValueError("dimension error: constraint index out of range for eigenvector matrix")
    kernel = vt[rank_wd:].T  # n x k, orthonormal
    rows = np.stack([v[i] * v[j] for i, j in pairs])
    sv_mu = np.linalg.svd(rows @ kernel, compute_uv=False)
    rank_wmu = _rank(sv_mu, rank_tol)
    return FeasibilityReport(n, rank_wd, k, rank_wmu, rank_wmu == k, rank_tol, None)


@dataclasses.dataclass(frozen=True)
class ConvexityCertificate:
    """Strong-convexity certificate of the smooth part over hollow matrices.

    ``sigma_min`` is the smallest singular value of the off-diagonal-restricted
    commutation operator (the quantity usually quoted as the modulus);
    ``m = mu * sigma_min**2`` is the constant the inner-product inequality
    actually certifies, and is what the bound evaluators consume.
    """

    n: int
    full_rank: bool
    sigma_min: float
    sigma_max: float
    mu: float
    m: float
    method: str
    rank_tol: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _offdiagonal_indices(n: int) -> np.ndarray:
    idx = np.arange(n * n)
    return idx[idx // n != idx % n]


def commutation_operator(cov: np.ndarray) -> np.ndarray:
    """Materialize Psi with Psi vec(X) = vec(X C - C X) for row-major vec."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A X B) = (A (x) B') vec(X)
    return np.kron(eye, cov.T) - np.kron(cov, eye)


def strong_convexity(cov: np.ndarray, mu: float, rank_tol: float = DEFAULT_RANK_TOL,
                     method: str = "auto") -> ConvexityCertificate:
    """Certify strong convexity of S -> (mu/2) ||S C - C S||_F^2 over hollow S.

    ``method="exact"`` materializes the restricted operator and takes its SVD
    (enforced n <= 150).  ``method="spectral"`` never materializes it: the
    squared operator is two nested commutators applied matrix-free under a
    Lanczos solver (its singular values are eigenvalue gaps of C, so large
    problems stay at matrix-product cost).  ``"auto"`` switches at n = 40.

    Raises
    ------
    ValueError
        On invalid mu or method, or exact mode beyond n = 150.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if cov.shape != (n, n):
        raise ValueError(f"dimension error: covariance must be square, got {cov.shape}")
    if mu <= 0:
        raise ValueError(f"parameter error: mu must be positive, got {mu}")
    if method not in ("auto", "exact", "spectral"):
        raise ValueError(f"parameter error: unknown method {method!r}")
    if method == "auto":
        method = "exact" if n <= AUTO_EXACT_CUTOFF else "spectral"
    if method == "exact":
        if n > EXACT_LIMIT:
            raise ValueError(
                f"parameter error: exact mode materializes a {n * n} x {n * n} operator; "
                f"n={n} exceeds the {EXACT_LIMIT} limit, use method='spectral'"
            )
        psi = commutation_operator(cov)
        sv = np.linalg.svd(psi[:, _offdiagonal_indices(n)], compute_uv=False)
        sigma_max = float(sv[0])
        sigma_min = float(sv[-1])
    else:
        sigma_max, sigma_min = _restricted_extremes(cov)
    full_rank = sigma_min > rank_tol * max(sigma_max, np.finfo(float).tiny)
    m = mu * sigma_min * sigma_min if full_rank else 0.0
    return ConvexityCertificate(n, bool(full_rank), sigma_min, sigma_max, mu, m, method, rank_tol)


def _restricted_extremes(cov: np.ndarray) -> tuple[float, float]:
    """Extreme singular values of the off-diagonal-restricted commutation operator.

    Works on the squared operator z -> offdiag([[X, C], C]) with X the hollow
    matrix holding z; its eigenvalues are the squared singular values sought,
    and the smallest comes from a spectral shift by the largest.
    """
    n = cov.shape[0]
    off = _offdiagonal_indices(n)
    dim = off.size

    def squared(z: np.ndarray) -> np.ndarray:
        x = np.zeros(n * n)
        x[off] = z
        x = x.reshape(n, n)
        b = x @ cov - cov @ x
        y = b @ cov - cov @ b
        return y.reshape(-1)[off]

    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=squared, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(dim)
    top = float(scipy.sparse.linalg.eigsh(op, k=1, which="LA", v0=v0, tol=1e-10,
                                          return_eigenvectors=False)[0])
    if top <= 0.0:
        return 0.0, 0.0

    def shifted(z: np.ndarray) -> np.ndarray:
        return top * z - squared(z)

    op_shift = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=shifted, dtype=float)
    shift_top = float(scipy.sparse.linalg.eigsh(op_shift, k=1, which="LA", v0=v0, tol=1e-10,
                                                return_eigenvectors=False)[0])
    bottom = max(top - shift_top, 0.0)
    return float(np.sqrt(top)), float(np.sqrt(bottom))


def response_diagnostics(shift_eigenvalues: np.ndarray, spec: FilterSpec,
                         tol: float = 1e-8) -> dict:
    """Flag filter frequency responses that (nearly) vanish on some graph mode.

    A vanishing response makes the covariance blind to that eigenvector, so
    experiments can tell identifiability loss from estimation error.
    """
    lam = np.asarray(shift_eigenvalues, dtype=float)
    resp = frequency_response(lam, spec)
    scale = np.abs(resp).max(initial=0.0)
    dead = np.nonzero(np.abs(resp) <= tol * max(scale, 1.0))[0]
    return {
        "response": resp,
        "degenerate_modes": [int(i) for i in dead],
        "degenerate": bool(dead.size),
    }


def objective_shift_unit(cov_prev: np.ndarray, cov_new: np.ndarray, mu: float,
                         probes: int = 6, power_iters: int = 40, seed: int = 0) -> float:
    """Largest change of the smooth objective over the unit Frobenius ball.

    The change g_new - g_prev is a quadratic form; its sup over the unit ball
    is (mu / 2) times the spectral radius of the symmetric difference operator,
    estimated by power iteration on the nested-commutator action, cross-checked
    against random probes.  Scale by radius**2 for a ball of another radius.
    """
    cov_prev = np.asarray(cov_prev, dtype=float)
    cov_new = np.asarray(cov_new, dtype=float)
    n = cov_prev.shape[0]

    def apply_diff(x: np.ndarray) -> np.ndarray:
        b_new = x @ cov_new - cov_new @ x
        b_prev = x @ cov_prev - cov_prev @ x
        return (b_new @ cov_new - cov_new @ b_new) - (b_prev @ cov_prev - cov_prev @ b_prev)

    rng = np.random.default_rng(seed)
    best = 0.0
    x = rng.standard_normal((n, n))
    x /= np.linalg.norm(x)
    for _ in range(power_iters):
        y = apply_diff(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        best = max(best, abs(float(np.sum(x * y))))
        x = y / norm
    for _ in range(probes):
        z = rng.standard_normal((n, n))
        z /= np.linalg.norm(z)
        best = max(best, abs(float(np.sum(z * apply_diff(z)))))
    return 0.5 * mu * best


@dataclasses.dataclass
class BoundInputs:
    """Per-step constants feeding the tracking bound, indexed by trace record.

    ``nu[tau]`` is the optimum drift between the objectives of records tau and
    tau + 1 (length one less than the number of records).  ``exact`` is True
    when every entry was measured; checkpoint-mode traces fill gaps with the
    running worst case, making downstream evaluations approximations.
    """

    m: np.ndarray
    lipschitz: np.ndarray
    gamma: np.ndarray
    iters: np.ndarray
    nu: np.ndarray
    exact: bool

    def __post_init__(self):
        t = self.m.shape[0]
        for name in ("lipschitz", "gamma", "iters"):
            if getattr(self, name).shape[0] != t:
                raise ValueError(
                    f"dimension error: {name} length {getattr(self, name).shape[0]} != {t}")
        if self.nu.shape[0] != max(t - 1, 0):
            raise ValueError(f"dimension error: nu must have length {t - 1}, got {self.nu.shape[0]}")

    @property
    def contraction(self) -> np.ndarray:
        """Per-iteration factors L_tau = max(|1 - gamma m|, |1 - gamma M|)."""
        return np.maximum(np.abs(1.0 - self.gamma * self.m),
                          np.abs(1.0 - self.gamma * self.lipschitz))

    @classmethod
    def from_trace(cls, trace) -> "BoundInputs":
        records = trace.records
        if not records:
            raise ValueError("parameter error: empty trace")
        exact = True
        m_carry = 0.0
        m = []
        for rec in records:
            if rec.m is not None:
                m_carry = rec.m
            else:
                exact = False
            m.append(m_carry)
        nu = []
        nu_carry = 0.0
        for rec in records[1:]:
            if rec.nu_prev is not None:
                nu_carry = max(nu_carry, rec.nu_prev)
                nu.append(rec.nu_prev)
            else:
                exact = False
                nu.append(nu_carry)
        return cls(np.asarray(m, dtype=float),
                   np.asarray([rec.lipschitz for rec in records], dtype=float),
                   np.asarray([rec.gamma for rec in records], dtype=float),
                   np.asarray([rec.iters for rec in records], dtype=int),
                   np.asarray(nu, dtype=float), exact)


@dataclasses.dataclass(frozen=True)
class TrackingBoundSeries:
    """Evaluated error bounds; entry tau bounds the error at record tau + 1."""

    exact: np.ndarray
    worst_case: np.ndarray
    s0_error: float

    def bound_at(self, index: int) -> float:
        """Bound for the tracking error measured at record ``index`` (>= 1)."""
        if index < 1:
            raise ValueError("parameter error: bounds start at record index 1")
        return float(self.exact[index - 1])

    def to_dict(self) -> dict:
        return {
            "s0_error": self.s0_error,
            "exact": [float(v) for v in self.exact],
            "worst_case": [float(v) if np.isfinite(v) else None for v in self.worst_case],
        }


def tracking_bound(inputs: BoundInputs, s0_error: float) -> TrackingBoundSeries:
    """Evaluate the per-step tracking-error guarantee.

    The exact series unrolls the recursion

        b_{tau+1} = L_tau ** i_tau * b_tau + nu_tau,   b_0 = s0_error,

    with measured per-step constants; whenever the objective is strongly
    convex at every step (all m > 0) the true error cannot exceed it.  The
    worst-case series is the closed form over running maxima Lhat and nuhat;
    it needs Lhat < 1 and is NaN elsewhere.
    """
    if s0_error < 0:
        raise ValueError(f"parameter error: negative initial error {s0_error}")
    steps = inputs.nu.shape[0]
    factors = inputs.contraction
    exact = np.empty(steps)
    b = s0_error
    for tau in range(steps):
        b = factors[tau] ** inputs.iters[tau] * b + inputs.nu[tau]
        exact[tau] = b
    worst = np.full(steps, np.nan)
    lhat = 0.0
    nuhat = 0.0
    total_iters = 0
    for tau in range(steps):
        lhat = max(lhat, float(factors[tau]))
        nuhat = max(nuhat, float(inputs.nu[tau]))
        total_iters += int(inputs.iters[tau])
        if lhat < 1.0:
            worst[tau] = lhat ** total_iters * s0_error + nuhat / (1.0 - lhat)
    return TrackingBoundSeries(exact, worst, s0_error)


@dataclasses.dataclass(frozen=True)
class RegretReport:
    """Average-regret measurement against its evaluated guarantee at final t."""

    t: int
    measured: float
    bound: float
    bound_decomposed: float
    components: dict
    step_size: float
    lipschitz_bound: float
    hypothesis_ok: bool
    holds: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def regret_bound(trace, lipschitz_bound: float) -> RegretReport:
    """Evaluate the static-regret guarantee for a constant-step trace.

    Needs a densely measured trace: optimum, drift, and objective-shift
    instrumentation at every step, with per-step optima retained.  The
    guarantee covers the constant policy gamma = 1 / M with M >= M_t at every
    step; ``hypothesis_ok`` records whether ``lipschitz_bound`` actually
    dominated the measured constants and matches the step size used.

    ``bound`` is the compact form (transient / t plus worst-case drift terms);
    ``bound_decomposed`` keeps the per-step drift sums and is never larger.
    The drift terms use rho (distance of per-step optima from their average)
    and the objective-shift deltas scaled onto the ball of radius
    R = 2 max_tau ||S_tau||_F that contains the iterates.
    """
    records = trace.records
    if not records:
        raise ValueError("parameter error: empty trace")
    gammas = {rec.gamma for rec in records}
    if len(gammas) != 1:
        raise ValueError("parameter error: mixed step sizes in trace; the regret guarantee "
                         "needs a constant gamma = 1/M policy")
    gamma = gammas.pop()
    t = len(records)
    if trace.optima is None or len(trace.optima) != t:
        raise ValueError("parameter error: regret evaluation needs per-step optima "
                         "(run with keep_optima=True and dense checkpoints)")
    if any(rec.opt_objective is None for rec in records) or \
            any(rec.delta_unit_prev is None for rec in records[1:]):
        raise ValueError("parameter error: regret evaluation needs densely measured optima "
                         "and objective-shift instrumentation")
    if trace.s0 is None:
        raise ValueError("parameter error: trace lacks the initial iterate")
    n = trace.n
    m_cap = float(lipschitz_bound)
    hypothesis_ok = bool(
        m_cap * (1.0 + 1e-9) >= max(rec.lipschitz for rec in records)
        and abs(gamma * m_cap - 1.0) <= 1e-9
    )

    gaps = np.array([rec.objective - rec.opt_objective for rec in records])
    measured = float(gaps.sum() / t)

    avg_opt = np.mean(trace.optima, axis=0)
    rho = np.array([float(np.linalg.norm(avg_opt - s)) for s in trace.optima])
    rho_hat = float(rho.max(initial=0.0))
    radius = 2.0 * max(rec.iterate_norm for rec in records)
    deltas = np.array([rec.delta_unit_prev for rec in records[1:]]) * radius ** 2
    delta_hat = float(deltas.max(initial=0.0))

    anchor_sq = float(np.linalg.norm(trace.s0 - avg_opt)) ** 2
    head = records[0].objective
    tail = records[-1].post_objective
    transient = (0.5 * m_cap * anchor_sq + head - tail) / t
    bound = transient + 0.5 * m_cap * rho_hat ** 2 + n * rho_hat + delta_hat
    bound_decomposed = (
        0.5 * m_cap * anchor_sq / t
        + (head - tail + deltas.sum() + float(np.sum(rho * (n + 0.5 * m_cap * rho)))) / t
    )
    components = {
        "anchor_distance": float(np.sqrt(anchor_sq)),
        "transient": transient,
        "rho_hat": rho_hat,
        "delta_hat": delta_hat,
        "radius": radius,
        "first_objective": head,
        "last_post_objective": tail,
        "rho_term": 0.5 * m_cap * rho_hat ** 2 + n * rho_hat,
        "delta_sum": float(deltas.sum()),
    }
    return RegretReport(t, measured, float(bound), float(bound_decomposed), components,
                        float(gamma), m_cap, hypothesis_ok, bool(measured <= bound))
