"""2-D incompressible power-law fluid on a periodic box.

Operator-split step: explicit advection, explicit shear-dependent
viscosity ``mu1 div((|Du|^2 + eps^2)^((p-2)/2) Du)`` in conservative
face-flux form, then pressure projection.  The projection solves the
Poisson problem of the *centered-difference* operators spectrally (via
modified wavenumbers), so the divergence measured by
:func:`pflab.core.divergence` vanishes to roundoff after every step.

Advection comes in two flavours:

* ``upwind``: conservative finite-volume fluxes of ``u x u`` with
  upwinded face values; first order, dissipative, momentum-exact.
* ``central``: skew-symmetric average of the divergence and advective
  forms with centered differences; second order, exactly energy-neutral
  under summation by parts, momentum-exact once ``div u = 0``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import (GridSpec, ModelParams, ScalarField, VectorField,
                   deformation_tensor, divergence, lp_norm)
from .errors import NumericalError
from .plaplace import (Trajectory, _face_avg, _face_diff, _trans_deriv,
                        normalize_schedule)

_TWO_PI = 2.0 * np.pi


@dataclasses.dataclass
class FluidConfig:
    """Knobs of the fluid stepper; ``eps_reg = None`` ties the shear-rate
    regularization to the grid spacing."""

    params: ModelParams
    eps_reg: float | None = None
    advection: str = "central"
    cfl_safety: float = 0.4
    div_tol: float = 1e-10
    dt_max: float = 1.0

    def __post_init__(self):
        if self.params.dim != 2:
            raise ValueError("fluid solver is 2-D; ModelParams.dim must be 2")
        if self.advection not in ("upwind", "central"):
            raise ValueError(f"unknown advection scheme {self.advection!r}")

    def eps_for(self, grid: GridSpec) -> float:
        return min(grid.spacing) if self.eps_reg is None else self.eps_reg


@dataclasses.dataclass
class FluidState:
    velocity: VectorField
    pressure: ScalarField
    time: float = 0.0

    @staticmethod
    def from_velocity(v: VectorField, time: float = 0.0) -> "FluidState":
        return FluidState(v, ScalarField.zeros(v.grid), time)


def _require_periodic(grid: GridSpec):
    if grid.dim != 2 or not all(grid.is_periodic(a) for a in range(2)):
        raise ValueError("fluid operators require a 2-D periodic box")


def kinetic_energy(v: VectorField) -> float:
    return 0.5 * lp_norm(v, 2.0) ** 2


# ---------------------------------------------------------------------------
# viscosity
# ---------------------------------------------------------------------------


def _face_deformation(v: VectorField, axis: int):
    """Deformation-tensor entries at the faces orthogonal to ``axis``."""
    grid = v.grid
    h = grid.spacing[axis]
    other = 1 - axis
    ho = grid.spacing[other]
    per, per_o = grid.is_periodic(axis), grid.is_periodic(other)
    u0, u1 = v.components
    d0_n = _face_diff(u0, axis, h, per)       # d u0 / d x_axis at faces
    d1_n = _face_diff(u1, axis, h, per)
    d0_t = _face_avg(_trans_deriv(u0, other, ho, per_o), axis, per)
    d1_t = _face_avg(_trans_deriv(u1, other, ho, per_o), axis, per)
    if axis == 0:
        d00, d11 = d0_n, d1_t
        d01 = 0.5 * (d0_t + d1_n)
    else:
        d00, d11 = d0_t, d1_n
        d01 = 0.5 * (d0_n + d1_t)
    return d00, d01, d11


def viscous_term(v: VectorField, params: ModelParams,
                 eps_reg: float = 0.0) -> VectorField:
    """``mu1 div(D_reg Du)`` with face-centered tensor fluxes.

    Face flux of component i through a face with normal n is
    ``D_reg (Du)_{i n}``; the divergence telescopes, so the integral of
    the output vanishes to roundoff (momentum conservation).
    """
    grid = v.grid
    _require_periodic(grid)
    p, mu1 = params.p, params.mu1
    out = [np.zeros(grid.shape), np.zeros(grid.shape)]
    for axis in range(2):
        h = grid.spacing[axis]
        d00, d01, d11 = _face_deformation(v, axis)
        mag2 = d00 * d00 + 2.0 * d01 * d01 + d11 * d11
        dreg = mu1 * (mag2 + eps_reg**2) ** ((p - 2.0) / 2.0)
        flux0 = dreg * (d00 if axis == 0 else d01)
        flux1 = dreg * (d01 if axis == 0 else d11)
        out[0] += (flux0 - np.roll(flux0, 1, axis)) / h
        out[1] += (flux1 - np.roll(flux1, 1, axis)) / h
    for comp in out:
        if not np.isfinite(comp).all():
            raise NumericalError("viscous term produced non-finite values")
    return VectorField(grid, tuple(out))


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------


def _centered(vals: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(vals, -1, axis) - np.roll(vals, 1, axis)) / (2.0 * h)


def _advection_tendency(v: VectorField, scheme: str) -> list[np.ndarray]:
    grid = v.grid
    hx, hy = grid.spacing
    u0, u1 = v.components
    tendency = []
    if scheme == "central":
        # skew-symmetric: 0.5 (div(u q) + u . grad q); exactly KE-neutral
        for q in (u0, u1):
            div_form = _centered(u0 * q, 0, hx) + _centered(u1 * q, 1, hy)
            adv_form = u0 * _centered(q, 0, hx) + u1 * _centered(q, 1, hy)
            tendency.append(-0.5 * (div_form + adv_form))
        return tendency
    # conservative upwind fluxes of u q through the faces
    for q in (u0, u1):
        out = np.zeros(grid.shape)
        for axis, (un, h) in enumerate(((u0, hx), (u1, hy))):
            ubar = 0.5 * (un + np.roll(un, -1, axis))
            q_up = np.where(ubar >= 0.0, q, np.roll(q, -1, axis))
            flux = ubar * q_up
            out -= (flux - np.roll(flux, 1, axis)) / h
        tendency.append(out)
    return tendency


def advect(v: VectorField, dt: float, scheme: str = "central",
           cfl_safety: float = 0.4) -> VectorField:
    """Apply the advection tendency for ``dt``; errors on a CFL violation."""
    _require_periodic(v.grid)
    vmax = float(np.max(v.magnitude())) if v.grid.total_nodes else 0.0
    h_min = min(v.grid.spacing)
    if vmax * dt > cfl_safety * h_min * (1.0 + 1e-12):
        raise NumericalError(
            f"advective CFL violated: |u|max dt = {vmax * dt:.3e} > "
            f"{cfl_safety:.3g} h = {cfl_safety * h_min:.3e}")
    tend = _advection_tendency(v, scheme)
    return VectorField(v.grid, tuple(c + dt * t for c, t in zip(v.components, tend)))


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def _modified_wavenumbers(grid: GridSpec):
    sines = []
    for axis in range(2):
        n = grid.node_count(axis)
        h = grid.spacing[axis]
        k = _TWO_PI * np.fft.fftfreq(n, d=h)
        sines.append(np.sin(k * h) / h)
    return sines[0][:, None], sines[1][None, :]


def project(v: VectorField, dt: float = 1.0) -> tuple[VectorField, ScalarField]:
    """Remove the centered-difference divergence spectrally.

    Returns the projected field and ``phi/dt`` as the pressure.
    Idempotent; the measured divergence afterwards is at roundoff.
    """
    grid = v.grid
    _require_periodic(grid)
    sx, sy = _modified_wavenumbers(grid)
    v0_hat = np.fft.fft2(v.components[0])
    v1_hat = np.fft.fft2(v.components[1])
    div_hat = 1j * (sx * v0_hat + sy * v1_hat)
    s2 = sx**2 + sy**2
    inv = np.divide(1.0, s2, out=np.zeros_like(s2), where=s2 > 0)
    phi_hat = -div_hat * inv
    v0_new = np.real(np.fft.ifft2(v0_hat - 1j * sx * phi_hat))
    v1_new = np.real(np.fft.ifft2(v1_hat - 1j * sy * phi_hat))
    out = VectorField(grid, (v0_new, v1_new))
    phi = np.real(np.fft.ifft2(phi_hat))
    scale = max(1.0, float(np.max(np.abs(v0_new))), float(np.max(np.abs(v1_new))))
    resid = float(np.max(np.abs(divergence(out).values)))
    if resid > 1e-10 * scale:
        raise NumericalError(f"projection left divergence residual {resid:.3e}")
    return out, ScalarField(grid, phi / dt)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def viscous_cfl_dt(v: VectorField, cfg: FluidConfig) -> float:
    p, mu1 = cfg.params.p, cfg.params.mu1
    eps = cfg.eps_for(v.grid)
    dmax = 0.0
    for axis in range(2):
        d00, d01, d11 = _face_deformation(v, axis)
        mag2 = d00 * d00 + 2.0 * d01 * d01 + d11 * d11
        m = float(mag2.max()) if mag2.size else 0.0
        dmax = max(dmax, mu1 * (m + eps**2) ** ((p - 2.0) / 2.0))
    if dmax == 0.0:
        return cfg.dt_max
    h_min = min(v.grid.spacing)
    p_eff = max(p - 1.0, 1.0)
    return float(min(cfg.dt_max, cfg.cfl_safety * h_min**2 / (4.0 * dmax * p_eff)))


def advective_cfl_dt(v: VectorField, cfg: FluidConfig) -> float:
    vmax = float(np.max(v.magnitude()))
    if vmax == 0.0:
        return cfg.dt_max
    return float(min(cfg.dt_max, cfg.cfl_safety * min(v.grid.spacing) / vmax))


def fluid_step(state: FluidState, cfg: FluidConfig, dt: float) -> FluidState:
    """advect -> add dt * viscous term -> project; advances time by dt."""
    v = advect(state.velocity, dt, cfg.advection, cfg.cfl_safety)
    visc = viscous_term(v, cfg.params, cfg.eps_for(v.grid))
    v = VectorField(v.grid, tuple(c + dt * w for c, w in zip(v.components, visc.components)))
    v, pressure = project(v, dt)
    return FluidState(v, pressure, state.time + dt)


def simulate_fluid(v0: VectorField, cfg: FluidConfig, T: float,
                   snapshot_times=None, dt_fixed: float | None = None) -> Trajectory:
    """Run the fluid from ``v0`` (projected first) to horizon ``T``.

    ``dt_fixed`` pins the step (reproducible refinement studies);
    otherwise the step adapts to the advective and viscous CFL bounds.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, T, 33)
    sched = normalize_schedule(snapshot_times, T)

    v, _ = project(v0, 1.0)
    state = FluidState.from_velocity(v, 0.0)
    fields = [state.velocity.copy()]
    times = [0.0]
    t = 0.0
    for t_next in sched[1:]:
        while t < t_next - 1e-13 * max(1.0, t_next):
            if dt_fixed is None:
                dt = min(advective_cfl_dt(state.velocity, cfg),
                         viscous_cfl_dt(state.velocity, cfg),
                         t_next - t)
            else:
                dt = min(dt_fixed, t_next - t)
            state = fluid_step(state, cfg, dt)
            t = state.time
        times.append(t_next)
        state = FluidState(state.velocity, state.pressure, t_next)
        fields.append(state.velocity.copy())
        t = t_next
    return Trajectory(np.asarray(times), fields)


# ---------------------------------------------------------------------------
# weak-form residual
# ---------------------------------------------------------------------------


def _inner(a: VectorField, b: VectorField) -> float:
    vol = a.grid.volumes()
    return float(sum(np.sum(ca * cb * vol) for ca, cb in zip(a.components, b.components)))


def weak_residual(traj: Trajectory, phi: VectorField, params: ModelParams) -> float:
    """Time-integrated residual of the weak form against a fixed
    divergence-free test field.

    Computes ``| sum_t w_t ( <u_t, phi> + <(u.grad)u, phi>
    + mu1 <|Du|^(p-2) Du, D phi> ) |`` with snapshot-centered time
    differencing for ``u_t`` and trapezoid weights over the interior
    snapshots.  The pressure drops because ``div phi = 0``.
    """
    grid = phi.grid
    div_phi = float(np.max(np.abs(divergence(phi).values)))
    scale = max(1.0, float(np.max(phi.magnitude())))
    if div_phi > 1e-10 * scale:
        raise ValueError(f"test field is not divergence-free (max div {div_phi:.3e})")
    if not all(grid.is_periodic(a) for a in range(grid.dim)):
        # embedded whole-space runs need interior support
        mag = phi.magnitude()
        ring = np.concatenate([mag[0, :], mag[-1, :], mag[:, 0], mag[:, -1]])
        if np.any(ring != 0.0):
            raise ValueError("test field must be compactly supported inside the box")
    if len(traj) < 3:
        raise ValueError("need at least 3 snapshots for centered time differencing")

    hx, hy = grid.spacing
    dphi = deformation_tensor(phi)
    p, mu1 = params.p, params.mu1
    times = traj.times
    totals = []
    for k in range(1, len(traj) - 1):
        u_prev, u_now, u_next = traj.fields[k - 1], traj.fields[k], traj.fields[k + 1]
        dt2 = times[k + 1] - times[k - 1]
        ut = VectorField(grid, tuple(
            (cn - cp) / dt2 for cn, cp in zip(u_next.components, u_prev.components)))
        term1 = _inner(ut, phi)
        u0, u1 = u_now.components
        adv = VectorField(grid, tuple(
            u0 * _centered(q, 0, hx) + u1 * _centered(q, 1, hy)
            for q in u_now.components))
        term2 = _inner(adv, phi)
        du = deformation_tensor(u_now)
        mag2 = np.einsum("ij...,ij...->...", du, du)
        dreg = mu1 * mag2 ** ((p - 2.0) / 2.0) if p != 2.0 else mu1
        pairing = np.einsum("ij...,ij...->...", du, dphi)
        term3 = float(np.sum(dreg * pairing * grid.volumes()))
        totals.append(term1 + term2 + term3)
    ts = times[1:-1]
    if len(totals) == 1:
        return abs(totals[0] * (times[-1] - times[0]))
    w = np.zeros(len(ts))
    w[1:] += 0.5 * np.diff(ts)
    w[:-1] += 0.5 * np.diff(ts)
    return float(abs(np.dot(w, np.asarray(totals))))


def random_stream_coeffs(rng: np.random.Generator, kmax: int = 3) -> list:
    """Fourier coefficients of a random band-limited stream function.

    Kept separate from sampling so the *same* continuous test field can
    be evaluated on grids of different resolution.
    """
    coeffs = []
    for kx in range(0, kmax + 1):
        for ky in range(0, kmax + 1):
            if kx == 0 and ky == 0:
                continue
            a, b = rng.normal(size=2) / (1 + kx * kx + ky * ky)
            coeffs.append((kx, ky, float(a), float(b)))
    return coeffs


def stream_field(grid: GridSpec, coeffs, amplitude: float = 1.0) -> VectorField:
    """Divergence-free field: discrete curl of the sampled stream function.

    The curl uses the package's centered differences, so the measured
    divergence commutes away to roundoff.
    """
    _require_periodic(grid)
    xx, yy = grid.mesh()
    lx = grid.upper[0] - grid.lower[0]
    ly = grid.upper[1] - grid.lower[1]
    psi = np.zeros(grid.shape)
    for kx, ky, a, b in coeffs:
        arg = _TWO_PI * (kx * xx / lx + ky * yy / ly)
        psi += a * np.cos(arg) + b * np.sin(arg)
    psi *= amplitude
    hx, hy = grid.spacing
    return VectorField(grid, (_centered(psi, 1, hy), -_centered(psi, 0, hx)))


def stream_function_field(grid: GridSpec, rng: np.random.Generator,
                          kmax: int = 3, amplitude: float = 1.0) -> VectorField:
    """Random divergence-free field (fresh coefficients every call)."""
    return stream_field(grid, random_stream_coeffs(rng, kmax), amplitude)


def band_initial_data(grid: GridSpec, center_y: float, halfwidth: float,
                      amplitude: float = 1.0, kx: int = 2) -> VectorField:
    """Divergence-free band of vorticity supported in a horizontal strip.

    Built as the discrete curl of a compactly supported stream function,
    so the velocity support sits inside the strip exactly.
    """
    _require_periodic(grid)
    xx, yy = grid.mesh()
    lx = grid.upper[0] - grid.lower[0]
    s2 = ((yy - center_y) / halfwidth) ** 2
    band = np.zeros(grid.shape)
    inside = s2 < 1.0
    band[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
    psi = amplitude * band * np.sin(_TWO_PI * kx * xx / lx)
    hx, hy = grid.spacing
    return VectorField(grid, (_centered(psi, 1, hy), -_centered(psi, 0, hx)))
