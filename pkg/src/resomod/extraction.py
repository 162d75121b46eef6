"""Model-parameter extraction from measurement-style data.

Flow for the optical card: de-embed each wavelength sweep, locate the
resonance minimum, fit the two decay times per bias from the reduced
single-variable Lorentzian, then fit voltage polynomials across bias and
the heater efficiency across heater power.  The electrical card comes from
a C-V fit of the depletion formula plus an S11 fit of the parasitic
network.

The resonance-depth relation ``T0 = |1/tau_l - 1/tau_c| / (1/tau_l +
1/tau_c)`` fixes the ratio of the decay rates but not which is larger, so
single-bus data cannot distinguish over- from under-coupling.  The default
assigns the faster decay to the coupling channel (over-coupled,
``tau_c <= tau_l``), which matches strongly coupled modulator disks; pass
``coupling="under"`` for the opposite assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (BadDomain, DegenerateT0, FitDiverged, InsufficientPoints,
                     NoResonanceFound)
from .electrical import ElectricalParams
from .model import C_VACUUM

TWO_PI_C = 2.0 * math.pi * C_VACUUM


@dataclass(frozen=True)
class TransmissionSweep:
    """One measured (or synthesized) transmission spectrum.

    ``wavelength`` strictly increasing [m]; ``transmission`` is linear
    power transmission, positive.
    """

    bias: float
    heater_power: float
    wavelength: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.wavelength, dtype=float)
        t = np.asarray(self.transmission, dtype=float)
        if lam.ndim != 1 or lam.shape != t.shape:
            raise ValueError("wavelength and transmission must match 1-D shapes")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(t <= 0):
            raise ValueError("transmission values must be positive")
        object.__setattr__(self, "wavelength", lam)
        object.__setattr__(self, "transmission", t)


# -- CSV interchange ---------------------------------------------------------

def write_sweep_csv(path, sweep: TransmissionSweep, db: bool = False) -> None:
    header = "lambda_nm,transmission_dB" if db else "lambda_nm,transmission"
    t = 10.0 * np.log10(sweep.transmission) if db else sweep.transmission
    lines = [header]
    for lam, ti in zip(sweep.wavelength, t):
        lines.append(f"{float(lam) * 1e9!r},{float(ti)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path, bias: float = 0.0,
                   heater_power: float = 0.0) -> TransmissionSweep:
    """Read a sweep CSV; the header names the unit (linear or dB)."""
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
        if header == "lambda_nm,transmission":
            db = False
        elif header == "lambda_nm,transmission_dB":
            db = True
        else:
            raise ValueError(
                f"{path}: expected header 'lambda_nm,transmission[_dB]', got '{header}'")
        lam, tr = [], []
        for row_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}: row {row_no}: expected 2 columns, "
                                 f"got {len(parts)}")
            try:
                lam.append(float(parts[0]))
                tr.append(float(parts[1]))
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: non-numeric value") from None
    lam = np.asarray(lam) * 1e-9
    tr = np.asarray(tr)
    if db:
        tr = 10.0 ** (tr / 10.0)
    return TransmissionSweep(bias=bias, heater_power=heater_power,
                             wavelength=lam, transmission=tr)


# -- scalar minimization (golden section + parabolic polish) -------------------

def _golden_parabolic(fn, lo: float, hi: float, iters: int = 80) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    # one parabolic refinement through the best bracket
    x0, x1, x2 = a, 0.5 * (a + b), b
    f0, f1, f2 = fn(x0), fn(x1), fn(x2)
    denom = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0)
    if abs(denom) > 0:
        x_v = x1 - 0.5 * ((x1 - x0) ** 2 * (f1 - f2)
                          - (x1 - x2) ** 2 * (f1 - f0)) / denom
        if x0 < x_v < x2 and fn(x_v) <= f1:
            return x_v
    return x1


# -- damped Gauss-Newton (shared by the multi-parameter fits) -------------------

def _numeric_jacobian(res_fn, x, scale=1e-6):
    r0 = res_fn(x)
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = scale * max(abs(x[i]), 1.0)
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        J[:, i] = (res_fn(xp) - res_fn(xm)) / (2.0 * h)
    return J


def _damped_gauss_newton(res_fn, x0, lo, hi, max_iter=500,
                         tol_step=1e-12, tol_sse=1e-16):
    """Levenberg-damped Gauss-Newton with box projection.

    Returns (x, residual, jtj_diag, n_iter, converged).
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    r = res_fn(x)
    sse = float(r @ r)
    lam = 1e-3
    jtj_diag = np.zeros_like(x)
    for it in range(1, max_iter + 1):
        J = _numeric_jacobian(res_fn, x)
        A = J.T @ J
        jtj_diag = np.diag(A).copy()
        g = J.T @ r
        improved = False
        for _ in range(25):
            damp = A + lam * np.diag(np.maximum(np.diag(A), 1e-30))
            try:
                dx = np.linalg.solve(damp, -g)
            except np.linalg.LinAlgError:
                lam *= 3.0
                continue
            x_new = np.clip(x + dx, lo, hi)
            r_new = res_fn(x_new)
            sse_new = float(r_new @ r_new)
            if sse_new < sse:
                step = float(np.max(np.abs(x_new - x)))
                rel_drop = (sse - sse_new) / max(sse, 1e-300)
                x, r, sse = x_new, r_new, sse_new
                lam = max(lam * 0.4, 1e-12)
                improved = True
                if step < tol_step or rel_drop < tol_sse:
                    return x, r, jtj_diag, it, True
                break
            lam *= 3.0
        if not improved:
            return x, r, jtj_diag, it, True  # stationary within damping range
    return x, r, jtj_diag, max_iter, False


# -- de-embedding ---------------------------------------------------------------

def _fit_baseline(lam, values, mask, degree, weights=None):
    x = (lam - lam.mean()) / (lam.max() - lam.min())
    w = None if weights is None else weights[mask]
    coeffs = np.polynomial.polynomial.polyfit(x[mask], values[mask], degree, w=w)
    return np.polynomial.polynomial.polyval(x, coeffs)


def deembed(sweep: TransmissionSweep, degree: int = 2,
            refine: bool = True) -> TransmissionSweep:
    """Remove the coupler-loss background from a raw sweep.

    A polynomial baseline (degree <= 2) is fitted to off-resonance points
    (beyond five estimated linewidths from the dip) and divided out.  With
    ``refine`` (default) the fitted resonance shape itself is divided out
    once and the baseline is refitted over all points, which removes the
    bias of resonance tails leaking into the off-resonance window.
    """
    if degree > 2:
        raise ValueError("baseline degree is limited to 2")
    lam = sweep.wavelength
    t = sweep.transmission
    if lam.size < 20:
        raise NoResonanceFound(f"need >= 20 points, got {lam.size}")
    med = float(np.median(t))
    i_min = int(np.argmin(t))
    t_min = float(t[i_min])
    if not t_min < 0.9 * med:
        raise NoResonanceFound("no dip below 90% of the off-resonance median")
    lam_min = lam[i_min]
    # linewidth estimate from the half-depth crossings of the raw dip
    half = 0.5 * (med + t_min)
    below = t < half
    left = lam_min - lam[below][0] if np.any(below) else 0.0
    right = lam[below][-1] - lam_min if np.any(below) else 0.0
    w_est = max(left + right, (lam[-1] - lam[0]) / lam.size * 3)
    mask = np.abs(lam - lam_min) > 5.0 * w_est
    if int(mask.sum()) < max(degree + 1, 10):
        raise NoResonanceFound("not enough off-resonance points to fit a baseline")
    base = _fit_baseline(lam, t, mask, degree)
    norm = t / base
    if refine:
        # iterate: divide out the fitted resonance, refit the baseline over
        # all points; contraction is roughly 2x per pass, so clean data
        # reaches the exact background well inside the iteration budget
        all_mask = np.ones_like(mask, dtype=bool)
        omega = TWO_PI_C / lam
        prev_change = math.inf
        for _ in range(40):
            try:
                result = TransmissionSweep(sweep.bias, sweep.heater_power, lam, norm)
                lam0, t0 = find_resonance(result)
                tau_l, tau_c = fit_tau(result, lam0, t0, refine=False)
            except (NoResonanceFound, DegenerateT0, FitDiverged):
                break
            model = _lorentzian_amp(omega - TWO_PI_C / lam0, t0, tau_l, tau_c) ** 2
            # weighting by the model makes this equivalent to fitting
            # t ~ base * model, which keeps additive noise unamplified
            base_new = _fit_baseline(lam, t / model, all_mask, degree,
                                     weights=model)
            change = float(np.max(np.abs(base_new / base - 1.0)))
            base = base_new
            norm = t / base
            if change < 1e-10:
                break
            if change > 0.7 * prev_change and change < 1e-4:
                break  # noise floor reached; further passes just wander
            prev_change = change
    out_med = float(np.median(norm[mask]))
    if abs(out_med - 1.0) > 0.01:
        raise FitDiverged(
            f"off-resonance median after de-embedding is {out_med:.4f}")
    return TransmissionSweep(sweep.bias, sweep.heater_power, lam, norm)


def find_resonance(sweep: TransmissionSweep) -> tuple[float, float]:
    """Resonance wavelength and amplitude floor of a de-embedded sweep.

    The wavelength comes from a parabola through the three points around
    the discrete minimum; the floor is the square root of the interpolated
    power minimum (amplitude convention).
    """
    lam = sweep.wavelength
    t = sweep.transmission
    i = int(np.argmin(t))
    if i == 0 or i == lam.size - 1:
        raise NoResonanceFound("transmission minimum sits on the sweep boundary")
    if not t[i] < 0.9 * float(np.median(t)):
        raise NoResonanceFound("no dip below 90% of the off-resonance median")
    x0, x1, x2 = lam[i - 1], lam[i], lam[i + 1]
    f0, f1, f2 = t[i - 1], t[i], t[i + 1]
    denom = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0)
    if denom == 0:
        return float(x1), math.sqrt(max(f1, 0.0))
    lam0 = x1 - 0.5 * ((x1 - x0) ** 2 * (f1 - f2)
                       - (x1 - x2) ** 2 * (f1 - f0)) / denom
    # vertex value of the same parabola
    c = ((f2 - f1) / (x2 - x1) - (f1 - f0) / (x1 - x0)) / (x2 - x0)
    slope = (f2 - f1) / (x2 - x1)
    t_vertex = f1 + slope * (lam0 - x1) + c * (lam0 - x1) * (lam0 - x2)
    return float(lam0), math.sqrt(max(float(t_vertex), 0.0))


def _lorentzian_amp(delta_omega, t0, tau_l, tau_c):
    """Amplitude transmission |(j d + (1/tl - 1/tc)) / (j d + (1/tl + 1/tc))|."""
    diff = 1.0 / tau_l - 1.0 / tau_c
    summ = 1.0 / tau_l + 1.0 / tau_c
    return np.sqrt((delta_omega ** 2 + diff ** 2) / (delta_omega ** 2 + summ ** 2))


def fit_lineshape(sweep: TransmissionSweep, lambda0: float, t0: float,
                  refine: bool = True) -> tuple[float, float, float]:
    """Least-squares Lorentzian line parameters ``(u, t0, lambda0)``.

    The depth constraint reduces the shape to one rate variable: with
    ``a = 2 T0/(1+T0)`` and ``b = 2/(1+T0)`` the amplitude response is
    ``|(j d + a u)/(j d + b u)|`` where ``u`` is the faster of the two
    decay rates.  ``u`` is always fitted by a golden-section search; with
    ``refine`` (default) the floor and the center are re-estimated the
    same way in alternation, because the three-point interpolation that
    seeds them chases noise (the discrete minimum picks downward
    fluctuations, and the vertex of a parabola through three noisy points
    is curvature-noise dominated on a fine grid).
    """
    if not 0.0 <= t0 < 1.0:
        raise DegenerateT0(f"resonance floor T0 = {t0:.4f} outside [0, 1)")
    if t0 >= 0.999:
        raise DegenerateT0("resonance too shallow: T0 >= 0.999")
    omega = TWO_PI_C / sweep.wavelength
    amp_data = np.sqrt(sweep.transmission)

    def sse(u, t0_val, lam0_val):
        delta = omega - TWO_PI_C / lam0_val
        aa = 2.0 * t0_val / (1.0 + t0_val)
        bb = 2.0 / (1.0 + t0_val)
        model = np.sqrt((delta ** 2 + (aa * u) ** 2) / (delta ** 2 + (bb * u) ** 2))
        r = model - amp_data
        return float(r @ r)

    # initial rate scale from the half-depth width of the power dip
    delta0 = omega - TWO_PI_C / lambda0
    half = 0.5 * (1.0 + t0 * t0)
    below = sweep.transmission < half
    if np.any(below):
        w_omega = abs(delta0[below][0] - delta0[below][-1])
        u_est = max(w_omega / 2.0 * (1.0 + t0) / 2.0, 1e6)
    else:
        u_est = abs(delta0[-1] - delta0[0]) / 10.0

    def fit_u(t0_val, lam0_val):
        log_u = _golden_parabolic(lambda lu: sse(math.exp(lu), t0_val, lam0_val),
                                  math.log(u_est / 30.0),
                                  math.log(u_est * 30.0))
        return math.exp(log_u)

    lam0 = lambda0
    u = fit_u(t0, lam0)
    if refine:
        # one alternation round to get close, then a joint damped
        # Gauss-Newton polish: the rate and the floor are too correlated
        # for coordinate descent to reach the least-squares optimum
        w_lam = 2.0 * u * lam0 * lam0 / TWO_PI_C
        lam0 = _golden_parabolic(lambda lv: sse(u, t0, lv),
                                 lam0 - w_lam, lam0 + w_lam)
        t0 = _golden_parabolic(lambda tv: sse(u, tv, lam0), 0.0, 0.998)
        u = fit_u(t0, lam0)

        lam_scale = w_lam

        def residual(x):
            uu = math.exp(x[0])
            tt = x[1]
            ll = lam0 + x[2] * lam_scale
            delta = omega - TWO_PI_C / ll
            aa = 2.0 * tt / (1.0 + tt)
            bb = 2.0 / (1.0 + tt)
            model = np.sqrt((delta ** 2 + (aa * uu) ** 2)
                            / (delta ** 2 + (bb * uu) ** 2))
            return model - amp_data

        x0 = np.array([math.log(u), t0, 0.0])
        lo = np.array([math.log(u) - 3.0, 0.0, -2.0])
        hi = np.array([math.log(u) + 3.0, 0.998, 2.0])
        x, _, _, _, _ = _damped_gauss_newton(residual, x0, lo, hi, max_iter=50)
        u, t0, lam0 = math.exp(x[0]), float(x[1]), lam0 + x[2] * lam_scale
    rms = math.sqrt(sse(u, t0, lam0) / amp_data.size)
    if rms > 0.05:
        raise FitDiverged(f"single-variable fit residual RMS {rms:.3f} > 0.05")
    return u, t0, lam0


def fit_tau(sweep: TransmissionSweep, lambda0: float, t0: float,
            coupling: str = "over", refine: bool = True) -> tuple[float, float]:
    """Decay times from a de-embedded sweep given the resonance floor.

    See :func:`fit_lineshape` for the single-variable reduction.  The
    fitted ``u`` equals the faster decay rate; ``coupling`` decides whether
    that rate is the coupling ("over", default, ``tau_c <= tau_l``) or the
    loss channel ("under").

    Returns ``(tau_l, tau_c)``.
    """
    if coupling not in ("over", "under"):
        raise ValueError(f"coupling must be 'over' or 'under', got {coupling!r}")
    u, t0, _ = fit_lineshape(sweep, lambda0, t0, refine=refine)
    r_fast = u
    r_slow = u * (1.0 - t0) / (1.0 + t0)
    if coupling == "over":
        tau_c, tau_l = 1.0 / r_fast, 1.0 / r_slow
    else:
        tau_l, tau_c = 1.0 / r_fast, 1.0 / r_slow
    return tau_l, tau_c


# -- cross-bias and heater fits ---------------------------------------------------

def fit_voltage_polys(per_bias, lambda0_degree: int = 2) -> dict:
    """Least-squares voltage polynomials of lambda0, tau_c and tau_l.

    ``per_bias`` is an iterable of (v, lambda0, tau_c, tau_l).  Decay-time
    fits are quadratic; the wavelength fit degree is 1 or 2.
    """
    rows = sorted(per_bias)
    v = np.asarray([r[0] for r in rows], dtype=float)
    if np.unique(v).size < max(3, lambda0_degree + 1):
        raise InsufficientPoints(
            f"need >= {max(3, lambda0_degree + 1)} distinct bias points, "
            f"got {np.unique(v).size}")
    if lambda0_degree not in (1, 2):
        raise ValueError("lambda0_degree must be 1 or 2")
    out = {}
    for name, idx, deg in (("lambda0", 1, lambda0_degree),
                           ("tau_c", 2, 2), ("tau_l", 3, 2)):
        yvals = np.asarray([r[idx] for r in rows], dtype=float)
        coeffs = np.polynomial.polynomial.polyfit(v, yvals, deg)
        fit = np.polynomial.polynomial.polyval(v, coeffs)
        out[name] = {
            "coeffs": coeffs.tolist(),
            "residuals": (yvals - fit).tolist(),
            "rms": float(np.sqrt(np.mean((yvals - fit) ** 2))),
        }
    out["bias_V"] = v.tolist()
    return out


def fit_gamma(shifts_at_powers) -> float:
    """Heater efficiency [m/W]: through-origin slope of shift vs power.

    ``shifts_at_powers`` holds (P_h, lambda0) pairs and must include a
    zero-power reference.
    """
    rows = sorted(shifts_at_powers)
    p = np.asarray([r[0] for r in rows], dtype=float)
    lam = np.asarray([r[1] for r in rows], dtype=float)
    if p.size < 2:
        raise InsufficientPoints("need at least two heater-power points")
    izero = int(np.argmin(np.abs(p)))
    if abs(p[izero]) > 1e-12:
        raise InsufficientPoints("need a zero-power reference point")
    shift = lam - lam[izero]
    nz = np.abs(p) > 1e-12
    if not np.any(nz):
        raise InsufficientPoints("need at least one nonzero heater power")
    denom = float(np.sum(p[nz] ** 2))
    return float(np.sum(p[nz] * shift[nz]) / denom)


# -- electrical fits ---------------------------------------------------------------

CV_BOUNDS_VBI = (0.3, 3.0)
CV_BOUNDS_MJ = (0.2, 0.9)


def fit_cv(points) -> tuple[float, float, float]:
    """Depletion-capacitance parameters (Cj0, Vbi, mj) from C-V points.

    Least squares in the log domain:
    ``log Cj = log Cj0 - mj log(1 + v/Vbi)``.  With exactly three points
    the system is exactly determined.  Parameter bounds keep ``1 + v/Vbi``
    positive for every data point during iteration.
    """
    pts = sorted(points)
    v = np.asarray([p[0] for p in pts], dtype=float)
    cj = np.asarray([p[1] for p in pts], dtype=float)
    if np.unique(v).size < 3:
        raise InsufficientPoints("need >= 3 distinct C-V points")
    if np.any(cj <= 0):
        raise BadDomain("capacitance values must be positive")
    vbi_lo = CV_BOUNDS_VBI[0]
    if v.min() < 0:
        vbi_lo = max(vbi_lo, -v.min() * 1.02 + 1e-6)
    log_c = np.log(cj)

    def residual(x):
        log_cj0, vbi, mj = x
        arg = 1.0 + v / vbi
        if np.any(arg <= 0):
            raise BadDomain("iterate left v > -Vbi domain")
        return log_cj0 - mj * np.log(arg) - log_c

    x0 = np.array([math.log(cj[np.argmin(np.abs(v))]), 1.0, 0.5])
    lo = np.array([math.log(cj.min()) - 5.0, vbi_lo, CV_BOUNDS_MJ[0]])
    hi = np.array([math.log(cj.max()) + 5.0, CV_BOUNDS_VBI[1], CV_BOUNDS_MJ[1]])
    x, r, _, n_iter, converged = _damped_gauss_newton(residual, x0, lo, hi)
    rms = float(np.sqrt(np.mean(r ** 2)))
    if not converged or rms > 0.05:
        raise FitDiverged(f"C-V fit RMS {rms:.3g} after {n_iter} iterations")
    return math.exp(x[0]), float(x[1]), float(x[2])


S11_FIT_PARAMS = ("Cj0", "Rs", "Cox", "RSi", "Cpad")


def fit_s11(f, s11_meas, init: ElectricalParams,
            fix: frozenset[str] = frozenset(), v_bias: float = 0.0,
            max_iter: int = 500) -> tuple[ElectricalParams, dict]:
    """Parasitic-network values from a measured reflection response.

    Fits {Cj0, Rs, Cox, RSi, Cpad} (minus any in ``fix``) by damped
    Gauss-Newton on the stacked real/imaginary residual; the built-in
    potential and grading exponent come from the C-V fit and stay fixed.
    Parameters are fitted in log space, which enforces positivity.

    Returns the fitted parameters and a report with the residual RMS and
    the diagonal of J^T J (per-parameter sensitivities).
    """
    f = np.asarray(f, dtype=float)
    s11_meas = np.asarray(s11_meas, dtype=complex)
    if f.size < 50:
        raise InsufficientPoints(f"need >= 50 frequency points, got {f.size}")
    if f.max() / f.min() < 10.0:
        raise InsufficientPoints("need at least one decade of frequency coverage")
    names = [p for p in S11_FIT_PARAMS if p not in fix]
    if not names:
        raise ValueError("all parameters fixed; nothing to fit")

    def build(x):
        vals = {p: getattr(init, p) for p in S11_FIT_PARAMS}
        for name, xi in zip(names, x):
            vals[name] = math.exp(xi)
        return ElectricalParams(Vbi=init.Vbi, mj=init.mj, Z0=init.Z0,
                                Rh=init.Rh, **vals)

    def residual(x):
        ep = build(x)
        s = ep.s11(v_bias, f)
        d = s - s11_meas
        return np.concatenate([d.real, d.imag])

    x0 = np.array([math.log(getattr(init, p)) for p in names])
    lo = x0 - 12.0
    hi = x0 + 12.0
    x, r, jtj, n_iter, converged = _damped_gauss_newton(residual, x0, lo, hi,
                                                        max_iter=max_iter)
    rms = float(np.sqrt(np.mean(r ** 2)))
    if rms > 0.05 or not converged:
        raise FitDiverged(
            f"S11 fit residual RMS {rms:.4g} after {n_iter} iterations")
    fitted = build(x)
    report = {
        "residual_rms": rms,
        "iterations": n_iter,
        "sensitivities": {name: float(s) for name, s in zip(names, jtj)},
        "fitted": {name: getattr(fitted, name) for name in names},
        "fixed": {p: getattr(init, p) for p in S11_FIT_PARAMS if p in fix},
    }
    return fitted, report


# -- full pipeline ------------------------------------------------------------------

def extract_per_bias(sweeps, coupling: str = "over"):
    """De-embed and fit every sweep; returns per-sweep records.

    Each record: dict with bias, heater_power, lambda0, T0, tau_l, tau_c
    (decay times only where the heater is off) and the de-embed residual.
    """
    records = []
    for sweep in sweeps:
        flat = deembed(sweep)
        lam0_seed, t0_seed = find_resonance(flat)
        u, t0, lam0 = fit_lineshape(flat, lam0_seed, t0_seed)
        r_fast, r_slow = u, u * (1.0 - t0) / (1.0 + t0)
        if coupling == "over":
            tau_c, tau_l = 1.0 / r_fast, 1.0 / r_slow
        else:
            tau_l, tau_c = 1.0 / r_fast, 1.0 / r_slow
        omega = TWO_PI_C / flat.wavelength
        model = _lorentzian_amp(omega - TWO_PI_C / lam0, t0, tau_l, tau_c) ** 2
        records.append({
            "bias_V": sweep.bias, "heater_W": sweep.heater_power,
            "lambda0_m": lam0, "T0": t0,
            "tau_l_s": tau_l, "tau_c_s": tau_c,
            "residual_rms": float(np.sqrt(np.mean(
                (model - flat.transmission) ** 2))),
        })
    return records
