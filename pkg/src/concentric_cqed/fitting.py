"""Levenberg-Marquardt least squares and the spectroscopy/lifetime fits built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateDataError, InputError, SingularJacobianError, UnidentifiableLifetimeError
from .spectra import CoupledSystem, Spectrum, _response
from .units import MHZ

JAC_REL_STEP = 1e-6
DAMPING_START = 1e-3
DAMPING_FACTOR = 10.0
COST_RTOL = 1e-10
GRAD_TOL = 1e-12
MAX_ITER = 200
REWEIGHT_PASSES = 3
GAIN_MIN = 0.1  # minimum actual/predicted decrease for an accepted step
_DAMPING_CEILING = 1e16


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    uncertainties: np.ndarray | None
    residual_norm: float
    iterations: int
    converged: bool
    chi2: float = 0.0
    dof: int = 0
    covariance: np.ndarray | None = None
    cost_history: list = field(default_factory=list)
    message: str = ""

    @property
    def parameters(self) -> dict:
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def errors(self) -> dict:
        if self.uncertainties is None:
            return {}
        return dict(zip(self.names, (float(v) for v in self.uncertainties)))

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def sigma(self, name):
        if self.uncertainties is None:
            raise KeyError(f"no uncertainty for {name!r}: fit did not converge")
        return float(self.uncertainties[self.names.index(name)])


def _jacobian(residuals, p, r0, lower, upper):
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = JAC_REL_STEP * abs(p[j]) if p[j] != 0.0 else JAC_REL_STEP
        if p[j] + h > upper[j]:
            h = -h
        q = p.copy()
        q[j] += h
        h = q[j] - p[j]  # the step actually representable
        jac[:, j] = (residuals(q) - r0) / h
    return jac


def least_squares(model, x, y, initial, sigma=None, bounds=None, names=None, absolute_sigma=False,
                  max_iter=MAX_ITER) -> FitResult:
    """Minimize ``sum(((model(x, *p) - y) / sigma)**2)`` by Levenberg-Marquardt.

    Args:
        model: callable ``model(x, *params) -> array``.
        x, y: sample points and observed values.
        initial: starting parameter vector (must lie within ``bounds``).
        sigma: per-point one-sigma errors; unit weights when omitted.
        bounds: ``(lower, upper)`` sequences; steps are projected onto the box.
        names: parameter names for the result.
        absolute_sigma: if False the covariance is scaled by the reduced chi-square.

    Jacobian columns are forward differences with relative step 1e-6. The
    Marquardt damping starts at 1e-3 and moves by a factor 10 on each rejected
    (up) or accepted (down) step. A step is accepted when it realizes at least
    a tenth of the decrease predicted by the linearized model, which stops
    undamped Gauss-Newton steps from zigzagging across shallow valleys. Iteration stops when the relative cost change
    of an accepted step drops below 1e-10, the gradient norm below 1e-12, or
    after ``max_iter`` accepted steps.

    Raises:
        SingularJacobianError: if a parameter has no effect on any residual.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.array(initial, dtype=float)
    n_par = p.size
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(n_par))
    if len(names) != n_par:
        raise InputError("names and initial guess differ in length")
    if y.size < n_par:
        raise DegenerateDataError(f"{y.size} points cannot determine {n_par} parameters")
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)

    if bounds is None:
        lower = np.full(n_par, -np.inf)
        upper = np.full(n_par, np.inf)
    else:
        lower = np.array([-np.inf if b is None else b for b in bounds[0]], dtype=float)
        upper = np.array([np.inf if b is None else b for b in bounds[1]], dtype=float)
    if np.any(p < lower) or np.any(p > upper):
        raise InputError(f"initial guess {p} outside bounds")

    def residuals(q):
        return (np.asarray(model(x, *q), dtype=float) - y) * w

    r = residuals(p)
    cost = float(r @ r)
    history = [cost]
    iterations = 0
    converged = False
    message = ""

    if cost == 0.0:
        converged, message = True, "exact fit at initial guess"
    else:
        jac = _jacobian(residuals, p, r, lower, upper)
        dead = np.flatnonzero(~np.any(jac != 0.0, axis=0))
        if dead.size:
            raise SingularJacobianError(f"parameters {[names[i] for i in dead]} do not affect any residual")
        damping = DAMPING_START
        while iterations < max_iter:
            grad = jac.T @ r
            if np.linalg.norm(grad) < GRAD_TOL:
                converged, message = True, "gradient below tolerance"
                break
            hess = jac.T @ jac
            diag = np.diag(hess).copy()
            diag[diag == 0.0] = 1.0
            accepted = False
            while damping < _DAMPING_CEILING:
                try:
                    step = np.linalg.solve(hess + damping * np.diag(diag), -grad)
                except np.linalg.LinAlgError:
                    damping *= DAMPING_FACTOR
                    continue
                trial = np.clip(p + step, lower, upper)
                r_trial = residuals(trial)
                cost_trial = float(r_trial @ r_trial)
                # gain ratio: actual over predicted decrease of the linearized model
                predicted = -2.0 * float(step @ grad) - float(step @ hess @ step)
                if np.isfinite(cost_trial) and cost_trial < cost and (
                        cost - cost_trial >= GAIN_MIN * predicted):
                    accepted = True
                    break
                damping *= DAMPING_FACTOR
            if not accepted:
                # no downhill step at any damping: numerically at the minimum
                converged, message = True, "no further decrease possible"
                break
            change = (cost - cost_trial) / cost
            p, r, cost = trial, r_trial, cost_trial
            history.append(cost)
            iterations += 1
            damping = max(damping / DAMPING_FACTOR, 1e-300)
            if cost == 0.0 or change < COST_RTOL:
                converged, message = True, "relative cost change below tolerance"
                break
            jac = _jacobian(residuals, p, r, lower, upper)
        else:
            message = f"no convergence after {max_iter} iterations"

    dof = y.size - n_par
    uncertainties = covariance = None
    if converged:
        jac = _jacobian(residuals, p, r, lower, upper)
        covariance = _covariance(jac)
        if not absolute_sigma:
            covariance = covariance * (cost / dof if dof > 0 else 0.0)
        with np.errstate(invalid="ignore"):
            uncertainties = np.sqrt(np.diag(covariance))

    return FitResult(names, p, uncertainties, math.sqrt(cost), iterations, converged, cost, dof,
                     covariance, history, message)


def _covariance(jac):
    """(J^T J)^-1, with infinite variance for parameters that dropped out."""
    n = jac.shape[1]
    live = np.flatnonzero(np.any(jac != 0.0, axis=0))
    cov = np.full((n, n), np.nan)
    for i in range(n):
        if i not in live:
            cov[i, i] = np.inf
    if live.size:
        sub = jac[:, live]
        try:
            inv = np.linalg.inv(sub.T @ sub)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(sub.T @ sub)
        cov[np.ix_(live, live)] = inv
    return cov


# ---------------------------------------------------------------------------
# Lorentzian


def lorentzian(x, amplitude, center, fwhm, offset):
    half = fwhm / 2.0
    return amplitude * half * half / ((x - center) ** 2 + half * half) + offset


def _lorentzian_guess(x, y):
    n_edge = max(1, len(x) // 20)
    baseline = 0.5 * (y[:n_edge].mean() + y[-n_edge:].mean())
    i_max, i_min = int(np.argmax(y)), int(np.argmin(y))
    peak = (y[i_max] - baseline) >= (baseline - y[i_min])
    i0 = i_max if peak else i_min
    amplitude = y[i0] - baseline
    beyond = np.abs(y - baseline) >= abs(amplitude) / 2.0
    lo = i0
    while lo > 0 and beyond[lo - 1]:
        lo -= 1
    hi = i0
    while hi < len(x) - 1 and beyond[hi + 1]:
        hi += 1
    spacing = float(np.min(np.diff(x)))
    width = max(x[hi] - x[lo], spacing)
    return np.array([amplitude, x[i0], width, baseline])


def fit_lorentzian(data: Spectrum) -> FitResult:
    """Fit ``A (G/2)^2 / ((w - w0)^2 + (G/2)^2) + B`` to a peak or a dip.

    Frequencies in the result are in rad/s, like the input spectrum.
    """
    if len(data) < 4:
        raise DegenerateDataError(f"{len(data)} points cannot determine a Lorentzian")
    if np.ptp(data.value) == 0.0:
        raise DegenerateDataError("constant data has no Lorentzian feature")
    x = data.frequency / MHZ
    y = data.value
    guess = _lorentzian_guess(x, y)
    result = least_squares(
        lorentzian, x, y, guess, sigma=data.sigma,
        bounds=([None, None, 0.0, None], [None, None, None, None]),
        names=("amplitude", "center", "fwhm", "offset"),
    )
    return _rescale(result, {"center": MHZ, "fwhm": MHZ})


def _rescale(result: FitResult, factors: dict) -> FitResult:
    scale = np.array([factors.get(n, 1.0) for n in result.names])
    result.values = result.values * scale
    if result.uncertainties is not None:
        result.uncertainties = result.uncertainties * scale
        result.covariance = result.covariance * np.outer(scale, scale)
    return result


# ---------------------------------------------------------------------------
# Coupled atom-cavity spectra (frequencies in units of 2pi x MHz while fitting)


def _coupled_model(kappa, kappa_t, gamma, cavity_resonance):
    def response(x, g0, offset):
        sys = CoupledSystem(abs(g0), kappa, kappa_t, gamma, cavity_resonance, cavity_resonance - offset)
        return _response(sys, x)

    return response


def _guess_offset(x, ratio, kappa):
    """Atom position estimate: deepest point of the data/envelope ratio near resonance."""
    near = np.abs(x) <= kappa
    if np.count_nonzero(near) < 3:
        return 0.0
    xs, rs = x[near], ratio[near]
    if rs.size >= 5:
        rs = np.convolve(rs, np.ones(3) / 3.0, mode="same")
    return -float(xs[int(np.argmin(rs))])


def _offset_reach(x, wc, kappa):
    # an atom further out than the scanned window plus one cavity half-width
    # leaves no trace in the data; bound the offset there
    return float(np.max(np.abs(x - wc))) + kappa


def _candidates(g_guess, off_guess, gamma, extra=()):
    couplings = (g_guess, 0.5 * gamma, gamma, 2.0 * gamma)
    offsets = (off_guess, 0.0, -off_guess, gamma, -gamma)
    return [(g, o) + tuple(extra) for g in couplings for o in offsets]


def _best_start(model, x, y, sigma, candidates):
    w = 1.0 if sigma is None else 1.0 / sigma
    costs = [float(np.sum(((model(x, *c) - y) * w) ** 2)) for c in candidates]
    return np.array(candidates[int(np.argmin(costs))], dtype=float)


def fit_coupled_transmission(data: Spectrum, kappa, kappa_t, gamma, t_max=None, cavity_resonance=0.0) -> FitResult:
    """Fit the coupled transmission with free ``g0`` and ``offset`` only.

    ``t_max`` pins the empty-cavity peak to an independently measured value
    (e.g. after fiber coupling); when omitted the model peak is
    ``(2 kappa_T / kappa)**2``. Frequencies of ``data`` are measured from
    ``cavity_resonance``; ``offset = omega_c - omega_a``. All rates in rad/s.
    """
    if len(data) < 3:
        raise DegenerateDataError("need at least three points")
    k, kt, gm, wc = kappa / MHZ, kappa_t / MHZ, gamma / MHZ, cavity_resonance / MHZ
    x = data.frequency / MHZ
    peak = (2.0 * kt / k) ** 2
    scale = 1.0 if t_max is None else t_max / peak
    response = _coupled_model(k, kt, gm, wc)

    def model(xx, g0, offset):
        return scale * np.abs(response(xx, g0, offset)) ** 2

    empty = model(x, 0.0, 0.0)
    depth = np.interp(wc, x, data.value) / (scale * peak)
    coop = 0.5 * (1.0 / math.sqrt(min(max(depth, 1e-6), 1.0)) - 1.0)
    g_guess = max(math.sqrt(2.0 * k * gm * coop), 0.1 * gm, 1e-3)
    off_guess = _guess_offset(x - wc, data.value / np.maximum(empty, 1e-300), k)
    start = _best_start(model, x, data.value, data.sigma, _candidates(g_guess, off_guess, gm))
    reach = _offset_reach(x, wc, k)
    start[1] = np.clip(start[1], -reach, reach)
    result = least_squares(model, x, data.value, start, sigma=data.sigma,
                           bounds=([0.0, -reach], [None, reach]), names=("g0", "offset"))
    return _rescale(result, {"g0": MHZ, "offset": MHZ})


def fit_coupled_reflection(data: Spectrum, kappa, kappa_t, gamma, cavity_resonance=0.0) -> FitResult:
    """Fit ``far_reflection * R(omega)`` with free ``g0``, ``offset``, ``far_reflection``."""
    if len(data) < 4:
        raise DegenerateDataError("need at least four points")
    k, kt, gm, wc = kappa / MHZ, kappa_t / MHZ, gamma / MHZ, cavity_resonance / MHZ
    x = data.frequency / MHZ
    response = _coupled_model(k, kt, gm, wc)

    def model(xx, g0, offset, far):
        return far * np.abs(1.0 - response(xx, g0, offset)) ** 2

    empty_shape = model(x, 0.0, 0.0, 1.0)
    # the atom only perturbs a few gamma around omega_a; the wings fix the scale
    far_guess = max(float(data.value @ empty_shape / (empty_shape @ empty_shape)), 1e-12)
    x_ratio = 2.0 * kt / k
    amp = math.sqrt(max(np.interp(wc, x, data.value) / far_guess, 0.0))
    coop = 0.0 if amp >= 1.0 - x_ratio else 0.5 * (x_ratio / (1.0 - amp) - 1.0)
    g_guess = max(math.sqrt(2.0 * k * gm * max(coop, 0.0)), 0.1 * gm, 1e-3)
    absorbed = 1.0 - data.value / far_guess
    # the atom suppresses the intracavity field, so absorption drops most near omega_a
    off_guess = _guess_offset(x - wc, absorbed / np.maximum(1.0 - empty_shape, 1e-300), k)
    start = _best_start(model, x, data.value, data.sigma,
                        _candidates(g_guess, off_guess, gm, extra=(far_guess,)))
    reach = _offset_reach(x, wc, k)
    start[1] = np.clip(start[1], -reach, reach)
    result = least_squares(model, x, data.value, start, sigma=data.sigma,
                           bounds=([0.0, -reach, 0.0], [None, reach, None]),
                           names=("g0", "offset", "far_reflection"))
    return _rescale(result, {"g0": MHZ, "offset": MHZ})


# ---------------------------------------------------------------------------
# Survival probability


def exponential_decay(tau, t0, p0):
    return p0 * np.exp(-tau / t0)


def survival_arrays(survival):
    """Split ``(tau, p, n_trials)`` rows into sorted arrays with binomial sigma."""
    rows = sorted((float(t), float(p), int(n)) for t, p, n in survival)
    tau = np.array([r[0] for r in rows])
    p = np.array([r[1] for r in rows])
    n = np.array([r[2] for r in rows], dtype=float)
    if np.any(n < 1):
        raise DataError("each point needs at least one trial")
    if np.any((p < 0) | (p > 1)):
        raise DataError("survival fractions must lie in [0, 1]")
    sigma = np.sqrt(p * (1.0 - p) / n)
    sigma = np.maximum(sigma, 1.0 / (2.0 * n))
    return tau, p, sigma


def fit_exponential_decay(survival) -> FitResult:
    """Fit ``p0 exp(-tau / t0)`` to survival fractions with binomial errors.

    ``survival`` is a sequence of ``(tau, fraction, n_trials)``; tau in seconds.
    Binomial errors are known a priori, so the covariance is not rescaled; they
    are evaluated at the fitted curve and the fit repeated a few times.

    Raises:
        UnidentifiableLifetimeError: for fewer than three delays or when the
            fraction does not change with tau.
    """
    tau, p, sigma = survival_arrays(survival)
    if np.unique(tau).size < 3:
        raise UnidentifiableLifetimeError("need at least three distinct delays")
    if np.ptp(p) == 0.0:
        raise UnidentifiableLifetimeError(f"survival is {p[0]:g} at every delay; lifetime not identifiable")
    if np.any(np.diff(tau) == 0):
        raise DataError("delays must be distinct")
    ok = p > 0
    if np.count_nonzero(ok) >= 2:
        slope, intercept = np.polyfit(tau[ok], np.log(p[ok]), 1, w=np.sqrt(p[ok]))
    else:
        slope, intercept = -1.0 / np.ptp(tau), 0.0
    t0_guess = -1.0 / slope if slope < 0 else float(np.ptp(tau))
    p0_guess = min(max(math.exp(intercept), 1e-3), 2.0)
    data = Spectrum(tau, p, sigma)
    n = np.array(sorted((float(t), int(k)) for t, _, k in survival))[:, 1]
    start = [t0_guess, p0_guess]
    # Errors taken from the observed fractions are too small wherever few atoms
    # survive, which drags t0 low. Refit with errors from the fitted curve.
    for _ in range(REWEIGHT_PASSES + 1):
        result = least_squares(exponential_decay, data.frequency, data.value, start,
                               sigma=sigma, bounds=([1e-300, 0.0], [None, None]),
                               names=("t0", "p0"), absolute_sigma=True)
        if not result.converged:
            break
        start = result.values
        expected = np.clip(exponential_decay(tau, *start), 0.0, 1.0)
        sigma = np.maximum(np.sqrt(expected * (1.0 - expected) / n), 1.0 / (2.0 * n))
    return result
