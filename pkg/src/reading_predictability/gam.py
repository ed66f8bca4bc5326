"""
Generalized additive models for positive durations: gamma family, log link,
penalized regression splines with GCV smoothing selection.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar
from scipy.special import gammaincc
from scipy.stats import f as f_dist

from .config import analysis_defaults
from .models import ModelComparison, PartialEffect, SmoothSpec, TermSummary

logger = logging.getLogger(__name__)

ETA_LIMIT = 700.0


class ConvergenceError(RuntimeError):
    """Raised when penalized IRLS does not converge; carries the deviance trace."""

    def __init__(self, message: str, trace: Sequence[float]):
        super().__init__(message)
        self.trace = list(trace)


@dataclass
class SmoothBasis:
    """
    A centered spline basis of one covariate and its penalty.

    ``raw_basis(x)`` gives the k uncentered columns, ``evaluate(x)`` the k-1
    columns used in the model after the sum-to-zero constraint.
    """
    spec: SmoothSpec
    k: int
    shift: float
    scale: float
    knots: np.ndarray
    transform: np.ndarray
    raw_penalty: np.ndarray
    centering: np.ndarray = field(default=None, repr=False)
    penalty: np.ndarray = field(default=None, repr=False)

    @property
    def covariate(self) -> str:
        return self.spec.covariate

    def raw_basis(self, x: np.ndarray) -> np.ndarray:
        xs = (np.asarray(x, dtype=np.float64) - self.shift) / self.scale
        if self.spec.basis == "tp":
            radial = np.abs(xs[:, None] - self.knots[None, :]) ** 3 / 12.0
            return np.column_stack([radial @ self.transform, xs, np.ones_like(xs)])
        return _cr_basis(xs, self.knots, self.transform)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.raw_basis(x) @ self.centering


def _thin_plate(knots: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-truncated 1-D thin plate spline (m=2): radial transform and k x k penalty."""
    radial = np.abs(knots[:, None] - knots[None, :]) ** 3 / 12.0
    values, vectors = linalg.eigh(radial)
    keep = np.argsort(-np.abs(values), kind="stable")[:k]
    u_k, d_k = vectors[:, keep], values[keep]
    null_space = np.column_stack([np.ones_like(knots), knots])
    q, _ = linalg.qr(u_k.T @ null_space)
    z_k = q[:, 2:]
    penalty = np.zeros((k, k))
    penalty[:k - 2, :k - 2] = z_k.T @ (d_k[:, None] * z_k)
    return u_k @ z_k, penalty


def _cr_matrices(knots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Second-derivative map F (k x k) and penalty of a natural cubic regression spline."""
    k = len(knots)
    h = np.diff(knots)
    d = np.zeros((k - 2, k))
    b = np.zeros((k - 2, k - 2))
    for i in range(k - 2):
        d[i, i] = 1.0 / h[i]
        d[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        d[i, i + 2] = 1.0 / h[i + 1]
        b[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            b[i, i + 1] = b[i + 1, i] = h[i + 1] / 6.0
    b_inv_d = linalg.solve(b, d, assume_a="sym")
    second = np.vstack([np.zeros(k), b_inv_d, np.zeros(k)])
    return second, d.T @ b_inv_d


def _cr_basis(xs: np.ndarray, knots: np.ndarray, second: np.ndarray) -> np.ndarray:
    k = len(knots)
    basis = np.zeros((len(xs), k))
    eye = np.eye(k)
    inside = (xs >= knots[0]) & (xs <= knots[-1])
    j = np.clip(np.searchsorted(knots, xs, side="right") - 1, 0, k - 2)
    h = knots[j + 1] - knots[j]
    right = knots[j + 1] - xs
    left = xs - knots[j]
    a_minus, a_plus = right / h, left / h
    c_minus = (right ** 3 / h - h * right) / 6.0
    c_plus = (left ** 3 / h - h * left) / 6.0
    interior = (a_minus[:, None] * eye[j] + a_plus[:, None] * eye[j + 1]
                + c_minus[:, None] * second[j] + c_plus[:, None] * second[j + 1])
    basis[inside] = interior[inside]

    # Linear extrapolation beyond the boundary knots
    h0, hk = knots[1] - knots[0], knots[-1] - knots[-2]
    slope_low = (eye[1] - eye[0]) / h0 - h0 * (2 * second[0] + second[1]) / 6.0
    slope_high = (eye[-1] - eye[-2]) / hk + hk * (second[-2] + 2 * second[-1]) / 6.0
    low, high = xs < knots[0], xs > knots[-1]
    basis[low] = eye[0] + (xs[low] - knots[0])[:, None] * slope_low
    basis[high] = eye[-1] + (xs[high] - knots[-1])[:, None] * slope_high
    return basis


def _psd(matrix: np.ndarray) -> np.ndarray:
    symmetric = (matrix + matrix.T) / 2.0
    values, vectors = linalg.eigh(symmetric)
    values = np.where(values > 0, values, 0.0)
    return (vectors * values) @ vectors.T


def build_smooth(x: np.ndarray, spec: SmoothSpec,
                 max_knots: int = analysis_defaults.MAX_KNOTS,
                 seed: int = analysis_defaults.SEED) -> SmoothBasis:
    """
    Build the spline basis and penalty of one covariate.

    Args:
        x (np.ndarray): Covariate values of the fitting data
        spec (SmoothSpec): Covariate name, basis rank and basis type
        max_knots (int): Distinct values beyond this are subsampled (seeded)
        seed (int): Seed of the knot subsample

    Returns:
        SmoothBasis: Centered basis of rank k-1 with a positive semi-definite penalty
        rescaled to the size of the term's cross-product matrix

    Raises:
        ValueError: If x holds fewer than 3 distinct values or non-finite entries
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"covariate '{spec.covariate}' holds missing or non-finite values")
    unique = np.unique(x)
    if len(unique) < 3:
        raise ValueError(f"covariate '{spec.covariate}' needs at least 3 distinct values, got {len(unique)}")
    k = spec.k
    if len(unique) < k:
        logger.warning("covariate '%s' has %d distinct values; reducing basis rank from %d",
                       spec.covariate, len(unique), k)
        k = len(unique)

    shift = float(unique.mean())
    scale = float(unique.std()) or 1.0
    standardized = (unique - shift) / scale
    if spec.basis == "tp":
        if len(standardized) > max_knots:
            rng = np.random.default_rng(seed)
            standardized = np.sort(rng.choice(standardized, size=max_knots, replace=False))
        knots = standardized
        transform, raw_penalty = _thin_plate(knots, k)
    else:
        knots = np.quantile(standardized, np.linspace(0.0, 1.0, k))
        knots = np.unique(knots)
        if len(knots) < k:
            knots = standardized[np.linspace(0, len(standardized) - 1, k).round().astype(int)]
        transform, raw_penalty = _cr_matrices(knots)

    basis = SmoothBasis(spec, k, shift, scale, knots, transform, raw_penalty)
    raw = basis.raw_basis(x)
    q, _ = linalg.qr(raw.sum(axis=0).reshape(k, 1))
    basis.centering = q[:, 1:]
    design = raw @ basis.centering
    penalty = basis.centering.T @ raw_penalty @ basis.centering
    norm = np.linalg.norm(penalty)
    if norm > 0:
        penalty = penalty * (np.linalg.norm(design.T @ design) / norm)
    basis.penalty = _psd(penalty)
    return basis


@dataclass
class Design:
    """Model matrix layout: intercept, centered linear terms, smooth blocks."""
    matrix: np.ndarray
    terms: List[str]
    blocks: Dict[str, slice]
    smooths: Dict[str, SmoothBasis]
    linear_means: Dict[str, float]
    covariate_means: Dict[str, float]
    covariate_ranges: Dict[str, Tuple[float, float]]

    @property
    def n_coefficients(self) -> int:
        return self.matrix.shape[1]

    def penalty(self, lambdas: Mapping[str, float]) -> np.ndarray:
        total = np.zeros((self.n_coefficients, self.n_coefficients))
        for name, basis in self.smooths.items():
            block = self.blocks[name]
            total[block, block] += lambdas[name] * basis.penalty
        return total

    def rows(self, values: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        """Model matrix rows for new covariate values."""
        columns = [np.ones((n, 1))]
        for name in self.terms:
            x = np.asarray(values[name], dtype=np.float64)
            if name in self.smooths:
                columns.append(self.smooths[name].evaluate(x))
            else:
                columns.append((x - self.linear_means[name]).reshape(n, 1))
        return np.hstack(columns)


def _column(data: Mapping[str, Sequence[float]], name: str, n: int) -> np.ndarray:
    try:
        x = np.asarray(data[name], dtype=np.float64)
    except KeyError:
        raise ValueError(f"unknown covariate '{name}'") from None
    if x.shape != (n,):
        raise ValueError(f"covariate '{name}' has shape {x.shape}, expected ({n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"covariate '{name}' holds missing or non-finite values")
    return x


def build_design(smooths: Sequence[SmoothSpec], data: Mapping[str, Sequence[float]], n: int,
                 linear_terms: Sequence[str] = (),
                 bases: Optional[Mapping[str, SmoothBasis]] = None) -> Design:
    """Assemble the model matrix; precomputed ``bases`` are reused when given."""
    bases = bases or {}
    names = [spec.covariate for spec in smooths] + list(linear_terms)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate model terms in {names}")
    columns = [np.ones((n, 1))]
    blocks: Dict[str, slice] = {}
    built: Dict[str, SmoothBasis] = {}
    linear_means: Dict[str, float] = {}
    covariate_means: Dict[str, float] = {}
    ranges: Dict[str, Tuple[float, float]] = {}
    offset = 1
    terms = []
    for name in list(linear_terms):
        x = _column(data, name, n)
        linear_means[name] = covariate_means[name] = float(x.mean())
        ranges[name] = (float(x.min()), float(x.max()))
        columns.append((x - linear_means[name]).reshape(n, 1))
        blocks[name] = slice(offset, offset + 1)
        offset += 1
        terms.append(name)
    for spec in smooths:
        x = _column(data, spec.covariate, n)
        basis = bases.get(spec.covariate) or build_smooth(x, spec)
        built[spec.covariate] = basis
        covariate_means[spec.covariate] = float(x.mean())
        ranges[spec.covariate] = (float(x.min()), float(x.max()))
        block = basis.evaluate(x)
        columns.append(block)
        blocks[spec.covariate] = slice(offset, offset + block.shape[1])
        offset += block.shape[1]
        terms.append(spec.covariate)
    return Design(np.hstack(columns), terms, blocks, built, linear_means, covariate_means, ranges)


@dataclass
class GamFit:
    """A converged gamma/log GAM fit."""
    response: np.ndarray
    design: Design
    coefficients: np.ndarray
    lambdas: Dict[str, float]
    edf: Dict[str, float]
    tau: float
    deviance: float
    gcv: float
    scale: float
    fitted: np.ndarray
    covariance: np.ndarray
    r2_adj: float
    iterations: int
    deviance_trace: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.response)

    @property
    def terms(self) -> List[str]:
        return list(self.design.terms)

    def term_kind(self, term: str) -> str:
        return "smooth" if term in self.design.smooths else "linear"


def gamma_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    """Gamma deviance 2 * sum((y - mu)/mu - ln(y/mu))."""
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    return float(2.0 * np.sum((y - mu) / mu - np.log(y / mu)))


def working_weights(mu: np.ndarray) -> np.ndarray:
    """IRLS weights (dmu/deta)^2 / V(mu); identically 1 for the gamma family with log link."""
    mu = np.asarray(mu, dtype=np.float64)
    # dmu/deta = mu and V(mu) = mu^2
    return (mu / mu) ** 2


def gcv_value(n: int, deviance: float, tau: float) -> float:
    """
    n * D / (n - tau)^2.

    Raises:
        ValueError: If tau >= n
    """
    if tau >= n:
        raise ValueError(f"over-parameterized fit: edf {tau:.3f} >= n {n}")
    return n * deviance / (n - tau) ** 2


def gcv_score(fit: GamFit) -> float:
    return gcv_value(fit.n, fit.deviance, fit.tau)


def adjusted_r2(y: np.ndarray, mu: np.ndarray, tau: float) -> float:
    """1 - [sum (y - mu)^2 / (n - tau)] / [sum (y - mean y)^2 / (n - 1)] on the response scale."""
    n = len(y)
    total = np.sum((y - y.mean()) ** 2) / (n - 1)
    if total == 0:
        return float("nan")
    return float(1.0 - (np.sum((y - mu) ** 2) / (n - tau)) / total)


@dataclass
class _Solution:
    coefficients: np.ndarray
    eta: np.ndarray
    deviance: float
    tau: float
    factor: Tuple[np.ndarray, bool]
    iterations: int
    trace: List[float]


def _pirls(x: np.ndarray, xtx: np.ndarray, y: np.ndarray, penalty: np.ndarray,
           eta_start: Optional[np.ndarray] = None,
           tolerance: float = analysis_defaults.PIRLS_TOLERANCE,
           max_iterations: int = analysis_defaults.PIRLS_MAX_ITERATIONS) -> _Solution:
    """Penalized IRLS with step halving; X^T W X is factored once since the weights stay 1."""
    factor = linalg.cho_factor(xtx + penalty)
    eta = np.log(y) if eta_start is None else eta_start
    beta = None
    old_deviance = None
    old_objective = math.inf
    trace: List[float] = []
    for iteration in range(1, max_iterations + 1):
        mu = np.exp(eta)
        weights = working_weights(mu)
        z = eta + (y - mu) / mu
        proposal = linalg.cho_solve(factor, x.T @ (weights * z))
        for attempt in range(31):
            if attempt:
                proposal = (proposal + beta) / 2.0
            new_eta = np.clip(x @ proposal, -ETA_LIMIT, ETA_LIMIT)
            deviance = gamma_deviance(y, np.exp(new_eta))
            objective = deviance + proposal @ penalty @ proposal
            if beta is None or (math.isfinite(objective) and objective <= old_objective * (1 + 1e-12) + 1e-12):
                break
        beta, eta = proposal, new_eta
        trace.append(deviance)
        if old_deviance is not None and abs(deviance - old_deviance) < tolerance * (abs(deviance) + 0.1):
            tau = float(np.trace(linalg.cho_solve(factor, xtx)))
            return _Solution(beta, eta, deviance, tau, factor, iteration, trace)
        old_deviance, old_objective = deviance, objective
    raise ConvergenceError(f"penalized IRLS did not converge in {max_iterations} iterations", trace)


def _finish(y: np.ndarray, design: Design, xtx: np.ndarray, lambdas: Dict[str, float],
            solution: _Solution) -> GamFit:
    n = len(y)
    mu = np.exp(solution.eta)
    influence = linalg.cho_solve(solution.factor, xtx)
    diagonal = np.diag(influence)
    edf = {name: float(diagonal[block].sum()) for name, block in design.blocks.items()}
    tau = solution.tau
    scale = float(np.sum(((y - mu) / mu) ** 2) / (n - tau))
    inverse = linalg.cho_solve(solution.factor, np.eye(design.n_coefficients))
    return GamFit(
        response=y,
        design=design,
        coefficients=solution.coefficients,
        lambdas=dict(lambdas),
        edf=edf,
        tau=tau,
        deviance=solution.deviance,
        gcv=gcv_value(n, solution.deviance, tau),
        scale=scale,
        fitted=mu,
        covariance=inverse * scale,
        r2_adj=adjusted_r2(y, mu, tau),
        iterations=solution.iterations,
        deviance_trace=solution.trace,
    )


def fit_gam(response: Sequence[float], smooths: Sequence[SmoothSpec], data: Mapping[str, Sequence[float]],
            linear_terms: Sequence[str] = (),
            fixed_lambdas: Optional[Mapping[str, float]] = None,
            bases: Optional[Mapping[str, SmoothBasis]] = None,
            max_outer: int = analysis_defaults.GCV_MAX_OUTER,
            log10_bounds: Tuple[float, float] = analysis_defaults.LOG10_LAMBDA_BOUNDS,
            tolerance: float = analysis_defaults.GCV_TOLERANCE) -> GamFit:
    """
    Fit a gamma GAM with log link.

    Smoothing parameters are chosen by coordinate descent on log10(lambda), one
    bounded scalar search per smooth started from the best point of a unit grid
    on the first pass, until the GCV score improves by less than
    ``tolerance`` (relative). Smooths listed in ``fixed_lambdas`` keep their value.

    Args:
        response: Positive responses
        smooths: Smooth terms
        data: Covariate columns by name (a DataFrame works)
        linear_terms: Covariates entering linearly (centered, unpenalized)
        fixed_lambdas: Smoothing parameters that are not searched
        bases: Precomputed smooth bases by covariate
        max_outer (int): Passes over all smooths
        log10_bounds: Search interval for log10(lambda)
        tolerance (float): Relative GCV change that ends the search

    Returns:
        GamFit: The GCV-optimal fit

    Raises:
        ValueError: If a response is not positive or a covariate is missing
        ConvergenceError: If the fit at the chosen smoothing parameters does not converge
    """
    y = np.asarray(response, dtype=np.float64)
    if y.ndim != 1 or not len(y):
        raise ValueError("response must be a non-empty vector")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("gamma responses must be finite and positive")
    n = len(y)
    design = build_design(smooths, data, n, linear_terms, bases)
    x = design.matrix
    xtx = x.T @ x
    fixed = dict(fixed_lambdas or {})
    unknown = set(fixed) - set(design.smooths)
    if unknown:
        raise ValueError(f"fixed_lambdas names unknown smooths {sorted(unknown)}")
    free = [name for name in design.smooths if name not in fixed]
    log_lambdas = {name: 0.0 for name in free}
    warm = {"eta": None}

    def lambdas_of(logs: Mapping[str, float]) -> Dict[str, float]:
        values = {name: 10.0 ** value for name, value in logs.items()}
        values.update(fixed)
        return values

    def solve(logs: Mapping[str, float]) -> _Solution:
        solution = _pirls(x, xtx, y, design.penalty(lambdas_of(logs)), warm["eta"])
        warm["eta"] = solution.eta
        return solution

    def score(logs: Mapping[str, float]) -> float:
        try:
            solution = solve(logs)
            return gcv_value(n, solution.deviance, solution.tau)
        except (ConvergenceError, ValueError, linalg.LinAlgError):
            return math.inf

    low, high = log10_bounds
    grid = np.linspace(low, high, int(round(high - low)) + 1)
    current = score(log_lambdas)
    for outer in range(max_outer if free else 0):
        previous = current
        for name in free:
            def objective(value, name=name):
                return score({**log_lambdas, name: value})
            # GCV can be multimodal in log lambda: the first pass scans a unit grid
            # before the bounded search, later passes refine around the current value
            start = log_lambdas[name]
            if outer == 0:
                values = [objective(value) for value in grid]
                best = int(np.argmin(values))
                if values[best] < current:
                    start, current = float(grid[best]), float(values[best])
                    log_lambdas[name] = start
            bounds = (max(low, start - 1.0), min(high, start + 1.0))
            result = minimize_scalar(objective, bounds=bounds, method="bounded", options={"xatol": 1e-3})
            if result.fun < current:
                log_lambdas[name] = float(result.x)
                current = float(result.fun)
        logger.debug("GCV pass %d: %.8g", outer + 1, current)
        if not math.isfinite(current) or previous - current <= tolerance * abs(previous):
            break

    warm["eta"] = None
    lambdas = lambdas_of(log_lambdas)
    fit = _finish(y, design, xtx, lambdas, solve(log_lambdas))
    logger.debug("GAM fit: %d terms, edf %.2f, deviance %.4f, GCV %.6g", len(design.terms), fit.tau,
                 fit.deviance, fit.gcv)
    return fit


def compare_models(base: GamFit, extended: GamFit) -> ModelComparison:
    """
    Analysis of deviance between a base fit and an extended fit.

    chi2 = (D_base - D_ext) / scale_ext with (tau_ext - tau_base) degrees of freedom,
    fractional df allowed. The p-value is 1 when the extended fit does not reduce
    the deviance and undefined (NaN) when it reduces the deviance without using
    more degrees of freedom.

    Raises:
        ValueError: If the fits were made on different responses
    """
    if base.response.shape != extended.response.shape or not np.array_equal(base.response, extended.response):
        raise ValueError("fits were made on different responses")
    delta_deviance = base.deviance - extended.deviance
    delta_edf = extended.tau - base.tau
    chi2 = delta_deviance / extended.scale
    if delta_deviance <= 0:
        p_value = 1.0
    elif delta_edf <= 0:
        p_value = float("nan")
    else:
        p_value = float(gammaincc(delta_edf / 2.0, chi2 / 2.0))
    return ModelComparison(
        delta_deviance=delta_deviance,
        delta_edf=delta_edf,
        chi2=chi2,
        p_value=p_value,
        delta_r2_percent=100.0 * (extended.r2_adj - base.r2_adj),
        delta_gcv=extended.gcv - base.gcv,
    )


def _check_term(fit: GamFit, term: str) -> slice:
    try:
        return fit.design.blocks[term]
    except KeyError:
        raise ValueError(f"unknown term '{term}'") from None


def predict(fit: GamFit, data: Mapping[str, Sequence[float]], n: Optional[int] = None) -> np.ndarray:
    """Linear predictor for new covariate values."""
    if n is None:
        if not fit.design.terms:
            raise ValueError("n is required for an intercept-only fit")
        n = len(np.asarray(data[fit.design.terms[0]]))
    return fit.design.rows(data, n) @ fit.coefficients


def partial_effect(fit: GamFit, term: str, grid: Optional[Sequence[float]] = None,
                   points: int = analysis_defaults.CURVE_GRID_POINTS) -> PartialEffect:
    """
    Contribution of one term over a covariate grid with posterior standard errors.

    The linear predictor column holds the intercept plus this term, with every other
    covariate at its mean.

    Raises:
        ValueError: If the fit has no such term
    """
    block = _check_term(fit, term)
    design = fit.design
    if grid is None:
        low, high = design.covariate_ranges[term]
        grid = np.linspace(low, high, points)
    grid = np.asarray(grid, dtype=np.float64)
    if term in design.smooths:
        rows = design.smooths[term].evaluate(grid)
    else:
        rows = (grid - design.linear_means[term]).reshape(-1, 1)
    beta = fit.coefficients[block]
    effect = rows @ beta
    covariance = fit.covariance[block, block]
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", rows, covariance, rows), 0.0))
    at_means = {name: np.full(len(grid), mean) for name, mean in design.covariate_means.items()}
    at_means[term] = grid
    linear_predictor = design.rows(at_means, len(grid)) @ fit.coefficients
    return PartialEffect(term, grid, effect, se, linear_predictor)


def term_summaries(fit: GamFit) -> List[TermSummary]:
    """
    Approximate Wald test of every term.

    A smooth with edf e is tested with a rank-r pseudo-inverse of its posterior
    covariance (r = e rounded, at least 1) against F(r, n - tau).
    """
    summaries = []
    residual_df = fit.n - fit.tau
    for term in fit.design.terms:
        block = fit.design.blocks[term]
        beta = fit.coefficients[block]
        covariance = fit.covariance[block, block]
        rank = max(1, min(len(beta), int(round(fit.edf[term]))))
        values, vectors = linalg.eigh(covariance)
        order = np.argsort(values)[::-1][:rank]
        values, vectors = values[order], vectors[:, order]
        values = np.where(values > 0, values, np.inf)
        projected = vectors.T @ beta
        statistic = float(np.sum(projected ** 2 / values)) / rank
        p_value = float(f_dist.sf(statistic, rank, residual_df))
        summaries.append(TermSummary(term, fit.edf[term], statistic, p_value))
    return summaries
