"""Scalar degenerate diffusion ``u_t = mu1 div(|grad u|^(p-2) grad u)``.

Two steppers share one spatial discretization idea (face-centered
diffusivities built from the full gradient magnitude):

* ``explicit``: conservative face-flux update.  Monotone under the CFL
  bound, mass-exact, preserves positivity and, with ``eps_reg = 0``,
  grows the support by at most one cell per axis per step.  The stepper
  of choice for sharp-front studies.
* ``implicit``: backward Euler realized as a proximal step, i.e. the
  minimizer of ``|v - u|^2 / (2 dt) + (mu1/p) * sum |grad v|^p`` over the
  grid, solved by damped Newton with a monotone line search (exact
  banded solve in 1-D, Jacobi-preconditioned CG in 2-D).  No CFL limit,
  so it is the stepper for long-horizon exponent fits.

With ``eps_reg = 0`` both steppers propagate exact zeros: fluxes vanish
where the solution vanishes, and the Newton linearization decouples
outside the support, so neither stepper contaminates the far field.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.linalg import solve_banded

from .core import GridSpec, ModelParams, ScalarField, VectorField
from .errors import BoundarySentinelError, NumericalError

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pure-numpy fallback keeps everything working
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _rhs_1d_p3_kernel(v, h, mu1, eps2):
        """Fused face-flux loop for p = 3 on a 1-D dirichlet grid.

        Arithmetic mirrors the vectorized path operation by operation,
        so both give bit-identical results.
        """
        n = v.shape[0]
        out = np.empty_like(v)
        f_prev = 0.0
        for i in range(n - 1):
            g = (v[i + 1] - v[i]) / h
            f = mu1 * np.sqrt(g * g + eps2) * g
            out[i] = (f - f_prev) / h
            f_prev = f
        out[n - 1] = (0.0 - f_prev) / h
        return out

    @_njit(cache=True)
    def _step_1d_p3_kernel(v, h, dt, mu1, eps2):
        """Fused explicit step ``v + dt * rhs`` with the same arithmetic
        order as the vector path (bit-identical results)."""
        n = v.shape[0]
        out = np.empty_like(v)
        f_prev = 0.0
        for i in range(n - 1):
            g = (v[i + 1] - v[i]) / h
            f = mu1 * np.sqrt(g * g + eps2) * g
            out[i] = ((f - f_prev) / h) * dt + v[i]
            f_prev = f
        out[n - 1] = ((0.0 - f_prev) / h) * dt + v[n - 1]
        return out


@dataclasses.dataclass
class SolverConfig:
    """Knobs of the scalar solver.

    ``eps_reg`` regularizes the gradient magnitude (0 keeps exact compact
    support); ``tol`` is the inner first-order optimality tolerance of
    the proximal step, measured as the grid-L2 norm of the objective
    gradient.
    """

    params: ModelParams
    eps_reg: float = 0.0
    stepper: str = "explicit"
    cfl_safety: float = 0.9
    dt_min: float = 1e-14
    dt_max: float = 1.0
    tol: float = 1e-10
    max_inner: int = 60
    substeps: int = 1
    sentinel: bool = True
    sentinel_margin: float = 0.1
    sentinel_tau_frac: float = 1e-8
    sentinel_stride: int = 100
    cfl_stride: int = 8
    audit_locality: bool = True

    def __post_init__(self):
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.stepper not in ("explicit", "implicit"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclasses.dataclass
class Trajectory:
    """Snapshots ``(t_k, field_k)`` with strictly increasing times,
    starting at t = 0 with the initial data."""

    times: np.ndarray
    fields: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields must have equal length")
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    def __len__(self):
        return len(self.fields)

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    @property
    def end_time(self) -> float:
        return float(self.times[-1])


def flux_diffusivity(g, cfg: SolverConfig):
    """Nonlinear diffusivity ``mu1 (g^2 + eps^2)^((p-2)/2)`` at gradient
    magnitude ``g >= 0``; degenerates to 0 at g = 0 when p > 2, eps = 0."""
    p, mu1 = cfg.params.p, cfg.params.mu1
    g = np.asarray(g, dtype=float)
    out = mu1 * (g * g + cfg.eps_reg**2) ** ((p - 2.0) / 2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# face geometry helpers
# ---------------------------------------------------------------------------


def _sl(ndim: int, axis: int, sl) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def _face_diff(v: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis) - v) / h
    nd = v.ndim
    return (v[_sl(nd, axis, slice(1, None))] - v[_sl(nd, axis, slice(None, -1))]) / h


def _face_diff_adj(w: np.ndarray, node_shape: tuple, axis: int, h: float,
                   periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(w, 1, axis) - w) / h
    out = np.zeros(node_shape)
    nd = out.ndim
    out[_sl(nd, axis, slice(None, -1))] -= w / h
    out[_sl(nd, axis, slice(1, None))] += w / h
    return out


def _face_avg(z: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return 0.5 * (z + np.roll(z, -1, axis))
    nd = z.ndim
    return 0.5 * (z[_sl(nd, axis, slice(None, -1))] + z[_sl(nd, axis, slice(1, None))])


def _face_avg_adj(w: np.ndarray, node_shape: tuple, axis: int,
                  periodic: bool) -> np.ndarray:
    if periodic:
        return 0.5 * (w + np.roll(w, 1, axis))
    out = np.zeros(node_shape)
    nd = out.ndim
    out[_sl(nd, axis, slice(None, -1))] += 0.5 * w
    out[_sl(nd, axis, slice(1, None))] += 0.5 * w
    return out


def _trans_deriv(v: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Node-centered derivative along ``axis``: centered inside, 2-point
    one-sided at dirichlet ends (kept first order there so the exact
    adjoint stays a short slice expression)."""
    if periodic:
        return (np.roll(v, -1, axis) - np.roll(v, 1, axis)) / (2.0 * h)
    nd = v.ndim
    out = np.empty_like(v)
    out[_sl(nd, axis, slice(1, -1))] = (
        v[_sl(nd, axis, slice(2, None))] - v[_sl(nd, axis, slice(None, -2))]
    ) / (2.0 * h)
    out[_sl(nd, axis, 0)] = (v[_sl(nd, axis, 1)] - v[_sl(nd, axis, 0)]) / h
    out[_sl(nd, axis, -1)] = (v[_sl(nd, axis, -1)] - v[_sl(nd, axis, -2)]) / h
    return out


def _trans_deriv_adj(w: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(w, 1, axis) - np.roll(w, -1, axis)) / (2.0 * h)
    nd = w.ndim
    out = np.zeros_like(w)
    out[_sl(nd, axis, slice(None, -2))] -= w[_sl(nd, axis, slice(1, -1))] / (2.0 * h)
    out[_sl(nd, axis, slice(2, None))] += w[_sl(nd, axis, slice(1, -1))] / (2.0 * h)
    out[_sl(nd, axis, 0)] -= w[_sl(nd, axis, 0)] / h
    out[_sl(nd, axis, 1)] += w[_sl(nd, axis, 0)] / h
    out[_sl(nd, axis, -2)] -= w[_sl(nd, axis, -1)] / h
    out[_sl(nd, axis, -1)] += w[_sl(nd, axis, -1)] / h
    return out


def _face_gradients(v: np.ndarray, grid: GridSpec, axis: int):
    """Normal and (2-D) transverse-averaged gradient components at the
    faces orthogonal to ``axis``."""
    h = grid.spacing[axis]
    gn = _face_diff(v, axis, h, grid.is_periodic(axis))
    if grid.dim == 1:
        return gn, None
    other = 1 - axis
    dt_node = _trans_deriv(v, other, grid.spacing[other], grid.is_periodic(other))
    gt = _face_avg(dt_node, axis, grid.is_periodic(axis))
    return gn, gt


def _face_a2(gn, gt, eps: float):
    a2 = gn * gn
    if eps:
        a2 = a2 + eps * eps
    if gt is not None:
        a2 = a2 + gt * gt
    return a2


def _diffusivity_of_a2(a2, p: float, mu1: float):
    e = (p - 2.0) / 2.0
    if e == 0.5:  # p = 3, the common acceptance case: sqrt beats pow
        return mu1 * np.sqrt(a2)
    if e == 0.0:
        return np.full_like(a2, mu1)
    return mu1 * a2**e


# ---------------------------------------------------------------------------
# explicit stepper
# ---------------------------------------------------------------------------


def _diffusion_rhs(v: np.ndarray, grid: GridSpec, cfg: SolverConfig) -> np.ndarray:
    p, mu1 = cfg.params.p, cfg.params.mu1
    if grid.dim == 1 and not grid.is_periodic(0):
        # hot path of the 1-D sharp-front studies
        h = grid.spacing[0]
        if _HAVE_NUMBA and p == 3.0:
            return _rhs_1d_p3_kernel(v, h, mu1, cfg.eps_reg**2)
        gn = (v[1:] - v[:-1]) / h
        a2 = _face_a2(gn, None, cfg.eps_reg)
        flux = _diffusivity_of_a2(a2, p, mu1)
        flux *= gn
        out = np.empty_like(v)
        out[0] = flux[0]
        out[-1] = -flux[-1]
        np.subtract(flux[1:], flux[:-1], out=out[1:-1])
        out /= h
        return out
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        gn, gt = _face_gradients(v, grid, axis)
        a2 = _face_a2(gn, gt, cfg.eps_reg)
        flux = _diffusivity_of_a2(a2, p, mu1) * gn
        if grid.is_periodic(axis):
            out += (flux - np.roll(flux, 1, axis)) / h
        else:
            out += np.diff(flux, axis=axis, prepend=0.0, append=0.0) / h
    return out


def diffusion_operator(u: ScalarField, cfg: SolverConfig) -> ScalarField:
    """Conservative discretization of ``mu1 div(|grad u|^(p-2) grad u)``.

    Face flux = diffusivity (from the full face gradient magnitude)
    times the normal difference; dirichlet axes close with zero boundary
    flux (the sentinel keeps the support away from the box anyway).
    """
    return ScalarField(u.grid, _diffusion_rhs(u.values, u.grid, cfg))


def _check_finite(arr: np.ndarray, what: str):
    total = float(np.sum(arr)) if arr.size else 0.0
    if not np.isfinite(total):
        bad = np.argwhere(~np.isfinite(arr))
        node = tuple(int(i) for i in bad[0])
        raise NumericalError(f"{what}: non-finite value at node {node}")


def step_explicit(u: ScalarField, cfg: SolverConfig, dt: float) -> ScalarField:
    """One conservative explicit step; caller is responsible for the CFL
    bound (see :func:`cfl_dt`)."""
    grid = u.grid
    if (_HAVE_NUMBA and grid.dim == 1 and not grid.is_periodic(0)
            and cfg.params.p == 3.0):
        new = _step_1d_p3_kernel(u.values, grid.spacing[0], dt,
                                 cfg.params.mu1, cfg.eps_reg**2)
        _check_finite(new, "explicit step")
        return ScalarField(grid, new)
    rhs = _diffusion_rhs(u.values, u.grid, cfg)
    rhs *= dt
    rhs += u.values
    _check_finite(rhs, "explicit step")
    return ScalarField(u.grid, rhs)


def max_face_diffusivity(u: ScalarField, cfg: SolverConfig) -> float:
    p, mu1 = cfg.params.p, cfg.params.mu1
    dmax = 0.0
    for axis in range(u.grid.dim):
        gn, gt = _face_gradients(u.values, u.grid, axis)
        a2 = _face_a2(gn, gt, cfg.eps_reg)
        m = a2.max() if a2.size else 0.0
        dmax = max(dmax, mu1 * float(m) ** ((p - 2.0) / 2.0))
    return float(dmax)


def cfl_dt(u: ScalarField, cfg: SolverConfig) -> float:
    """Stable explicit step ``safety * h_min^2 / (2 N D_max (p-1))``;
    an all-zero diffusivity yields ``dt_max``."""
    _check_finite(u.values, "cfl_dt input")
    dmax = max_face_diffusivity(u, cfg)
    if dmax == 0.0:
        return cfg.dt_max
    h_min = min(u.grid.spacing)
    p_eff = max(cfg.params.p - 1.0, 1.0)
    dt = cfg.cfl_safety * h_min**2 / (2.0 * u.grid.dim * dmax * p_eff)
    return float(min(max(dt, cfg.dt_min), cfg.dt_max))


# ---------------------------------------------------------------------------
# implicit (proximal) stepper
# ---------------------------------------------------------------------------


def _face_weight(grid: GridSpec) -> float:
    w = float(np.prod(grid.spacing))
    return w if grid.dim == 1 else w / 2.0


def grad_energy(v_field: ScalarField, cfg: SolverConfig) -> float:
    """Discrete stored energy ``(mu1/p) * sum_faces |face grad|^p * w``."""
    grid = v_field.grid
    p, mu1 = cfg.params.p, cfg.params.mu1
    w = _face_weight(grid)
    total = 0.0
    for axis in range(grid.dim):
        gn, gt = _face_gradients(v_field.values, grid, axis)
        a2 = _face_a2(gn, gt, cfg.eps_reg)
        total += float(np.sum(a2 ** (p / 2.0)))
    return (mu1 / p) * w * total


class _ProxProblem:
    """Objective ``J(v) = |v - u|^2/(2 dt) + E(v)`` and its derivatives."""

    def __init__(self, u: np.ndarray, grid: GridSpec, cfg: SolverConfig, dt: float):
        self.u = u
        self.grid = grid
        self.cfg = cfg
        self.dt = dt
        self.vol = grid.volumes()
        self.w = _face_weight(grid)
        self._faces = None  # per-axis (gn, gt, a2, D) at the last grad point

    def value(self, v: np.ndarray) -> float:
        p, mu1 = self.cfg.params.p, self.cfg.params.mu1
        e = 0.0
        for axis in range(self.grid.dim):
            gn, gt = _face_gradients(v, self.grid, axis)
            a2 = _face_a2(gn, gt, self.cfg.eps_reg)
            e += float(np.sum(a2 ** (p / 2.0)))
        e *= (mu1 / p) * self.w
        quad = 0.5 / self.dt * float(np.sum((v - self.u) ** 2 * self.vol))
        return quad + e

    def value_and_grad(self, v: np.ndarray):
        p, mu1 = self.cfg.params.p, self.cfg.params.mu1
        grid = self.grid
        e = 0.0
        g = self.vol * (v - self.u) / self.dt
        faces = []
        for axis in range(grid.dim):
            h = grid.spacing[axis]
            per = grid.is_periodic(axis)
            gn, gt = _face_gradients(v, grid, axis)
            a2 = _face_a2(gn, gt, self.cfg.eps_reg)
            e += float(np.sum(a2 ** (p / 2.0)))
            D = mu1 * a2 ** ((p - 2.0) / 2.0)
            g += self.w * _face_diff_adj(D * gn, grid.shape, axis, h, per)
            if gt is not None:
                other = 1 - axis
                z = _face_avg_adj(D * gt, grid.shape, axis, per)
                g += self.w * _trans_deriv_adj(
                    z, other, grid.spacing[other], grid.is_periodic(other))
            faces.append((gn, gt, a2, D))
        self._faces = faces
        e *= (mu1 / p) * self.w
        quad = 0.5 / self.dt * float(np.sum((v - self.u) ** 2 * self.vol))
        return quad + e, g

    def hess_vec(self, dv: np.ndarray) -> np.ndarray:
        """Exact Hessian action at the last gradient point."""
        p = self.cfg.params.p
        grid = self.grid
        out = self.vol * dv / self.dt
        for axis in range(grid.dim):
            gn, gt, a2, D = self._faces[axis]
            h = grid.spacing[axis]
            per = grid.is_periodic(axis)
            sq = np.sqrt(a2)
            mn = np.divide(gn, sq, out=np.zeros_like(gn), where=a2 > 0)
            dgn = _face_diff(dv, axis, h, per)
            if gt is None:
                s = mn * dgn
                tn = D * dgn + (p - 2.0) * D * s * mn
                out += self.w * _face_diff_adj(tn, grid.shape, axis, h, per)
            else:
                other = 1 - axis
                mt = np.divide(gt, sq, out=np.zeros_like(gt), where=a2 > 0)
                dtn = _trans_deriv(dv, other, grid.spacing[other],
                                   grid.is_periodic(other))
                dgt = _face_avg(dtn, axis, per)
                s = mn * dgn + mt * dgt
                tn = D * dgn + (p - 2.0) * D * s * mn
                tt = D * dgt + (p - 2.0) * D * s * mt
                out += self.w * _face_diff_adj(tn, grid.shape, axis, h, per)
                z = _face_avg_adj(tt, grid.shape, axis, per)
                out += self.w * _trans_deriv_adj(
                    z, other, grid.spacing[other], grid.is_periodic(other))
        return out

    def hess_diag(self) -> np.ndarray:
        """Approximate Hessian diagonal for Jacobi preconditioning
        (cross terms at dirichlet transverse ends are dropped)."""
        p = self.cfg.params.p
        grid = self.grid
        diag = self.vol / self.dt
        for axis in range(grid.dim):
            gn, gt, a2, D = self._faces[axis]
            h = grid.spacing[axis]
            per = grid.is_periodic(axis)
            qn = self.w * (D + (p - 2.0) * D * np.divide(
                gn * gn, a2, out=np.zeros_like(gn), where=a2 > 0)) / h**2
            add = np.zeros(grid.shape)
            nd = add.ndim
            if per:
                add += qn + np.roll(qn, 1, axis)
            else:
                add[_sl(nd, axis, slice(None, -1))] += qn
                add[_sl(nd, axis, slice(1, None))] += qn
            if gt is not None:
                other = 1 - axis
                ho = grid.spacing[other]
                qt = self.w * (D + (p - 2.0) * D * np.divide(
                    gt * gt, a2, out=np.zeros_like(gt), where=a2 > 0))
                # squared coefficients of face-average then transverse stencil
                if per:
                    zz = 0.25 * (qt + np.roll(qt, 1, axis))
                else:
                    zz = np.zeros(grid.shape)
                    zz[_sl(nd, axis, slice(None, -1))] += 0.25 * qt
                    zz[_sl(nd, axis, slice(1, None))] += 0.25 * qt
                if grid.is_periodic(other):
                    add += (np.roll(zz, 1, other) + np.roll(zz, -1, other)) / (4.0 * ho**2)
                else:
                    tmp = np.zeros(grid.shape)
                    tmp[_sl(nd, other, slice(None, -2))] += zz[_sl(nd, other, slice(1, -1))] / (4.0 * ho**2)
                    tmp[_sl(nd, other, slice(2, None))] += zz[_sl(nd, other, slice(1, -1))] / (4.0 * ho**2)
                    tmp[_sl(nd, other, 0)] += zz[_sl(nd, other, 0)] / ho**2
                    tmp[_sl(nd, other, 1)] += zz[_sl(nd, other, 0)] / ho**2
                    tmp[_sl(nd, other, -2)] += zz[_sl(nd, other, -1)] / ho**2
                    tmp[_sl(nd, other, -1)] += zz[_sl(nd, other, -1)] / ho**2
                    add += tmp
            diag = diag + add
        return diag

    def banded_hessian(self) -> np.ndarray:
        """Tridiagonal Hessian in solve_banded layout (1-D dirichlet only)."""
        p = self.cfg.params.p
        grid = self.grid
        h = grid.spacing[0]
        gn, _, a2, D = self._faces[0]
        coef = self.w * (D + (p - 2.0) * D * np.divide(
            gn * gn, a2, out=np.zeros_like(gn), where=a2 > 0)) / h**2
        n = grid.shape[0]
        ab = np.zeros((3, n))
        ab[1, :] = self.vol / self.dt
        ab[1, :-1] += coef
        ab[1, 1:] += coef
        ab[0, 1:] = -coef
        ab[2, :-1] = -coef
        return ab


def _pcg(apply_h, b: np.ndarray, inv_diag: np.ndarray, rtol: float,
         maxiter: int) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients, deterministic."""
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(np.sum(r * z))
    b_norm = float(np.sqrt(np.sum(b * b))) or 1.0
    for _ in range(maxiter):
        hp = apply_h(p)
        alpha = rz / float(np.sum(p * hp))
        x += alpha * p
        r -= alpha * hp
        if np.sqrt(np.sum(r * r)) <= rtol * b_norm:
            break
        z = inv_diag * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def _grad_residual(g: np.ndarray, vol: np.ndarray) -> float:
    """Grid-L2 norm of the objective gradient in the functional sense."""
    return float(np.sqrt(np.sum(g * g / vol)))


def step_implicit_proximal(u: ScalarField, cfg: SolverConfig, dt: float,
                           v0: np.ndarray | None = None) -> ScalarField:
    """Proximal (backward Euler) step by damped Newton.

    Guarantees the energy inequality
    ``E(v) + |v - u|^2/(2 dt) <= E(u) + tol`` because the line search
    never accepts an objective increase from the start point ``u``.
    """
    if cfg.params.p < 2:
        raise ValueError("proximal stepper requires p >= 2")
    grid = u.grid
    prob = _ProxProblem(u.values, grid, cfg, dt)
    v = u.values.copy() if v0 is None else np.asarray(v0, dtype=float).copy()
    j_u = prob.value(u.values)
    j, g = prob.value_and_grad(v)
    if j > j_u:  # extrapolated warm start went uphill; fall back
        v = u.values.copy()
        j, g = prob.value_and_grad(v)
    banded = grid.dim == 1 and not grid.is_periodic(0)
    res0 = _grad_residual(g, prob.vol)
    for _ in range(cfg.max_inner):
        res = _grad_residual(g, prob.vol)
        if res <= cfg.tol:
            _check_finite(v, "implicit step")
            return ScalarField(grid, v)
        if banded:
            delta = solve_banded((1, 1), prob.banded_hessian(), -g)
        else:
            rtol = min(0.1, np.sqrt(res / res0)) if res0 > 0 else 0.1
            delta = _pcg(prob.hess_vec, -g, 1.0 / prob.hess_diag(),
                         rtol=max(rtol, 1e-12), maxiter=600)
        slope = float(np.sum(g * delta))
        if slope >= 0:  # CG returned a non-descent direction; steepest descent
            delta = -g / prob.hess_diag()
            slope = float(np.sum(g * delta))
        # Armijo with a roundoff-scale slack so terminal Newton steps are
        # accepted once genuine decreases fall below the resolution of J
        slack = 32.0 * np.finfo(float).eps * max(1.0, abs(j))
        step = 1.0
        while True:
            j_new = prob.value(v + step * delta)
            if j_new <= j + 1e-4 * step * slope + slack:
                break
            step *= 0.5
            if step < 1e-14:
                raise NumericalError(
                    f"proximal line search stalled at residual {res:.3e}")
        v = v + step * delta
        j, g = prob.value_and_grad(v)
    raise NumericalError(
        f"proximal step: {cfg.max_inner} Newton iterations exhausted, "
        f"residual {_grad_residual(g, prob.vol):.3e} > tol {cfg.tol:.3e}")


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------


def _support_bounds(values: np.ndarray, tau: float):
    """Per-axis (lo, hi) index bounds of ``|values| > tau``; None if empty."""
    mask = values != 0.0 if tau == 0.0 else np.abs(values) > tau
    if not mask.any():
        return None
    bounds = []
    for axis in range(values.ndim):
        other = tuple(a for a in range(values.ndim) if a != axis)
        line = mask.any(axis=other) if other else mask
        idx = np.flatnonzero(line)
        bounds.append((int(idx[0]), int(idx[-1])))
    return bounds


def _check_sentinel(values: np.ndarray, grid: GridSpec, tau: float,
                    margin: float, t: float):
    bounds = _support_bounds(values, tau)
    if bounds is None:
        return
    for axis, (lo_i, hi_i) in enumerate(bounds):
        width = grid.upper[axis] - grid.lower[axis]
        x = grid.coords(axis)
        lo_gap = x[lo_i] - grid.lower[axis]
        hi_gap = grid.upper[axis] - x[hi_i]
        if lo_gap < margin * width or hi_gap < margin * width:
            raise BoundarySentinelError(
                f"support reached within {margin:.0%} of the box on axis "
                f"{axis} at t = {t:.6g} (gaps {lo_gap:.3g}/{hi_gap:.3g}, "
                f"width {width:.3g}); enlarge the box")


def normalize_schedule(snapshot_times, T: float) -> np.ndarray:
    """Sorted snapshot times covering [0, T]: 0 and T added when missing,
    near-duplicates from schedule arithmetic merged, endpoint snapped."""
    sched = np.asarray(sorted(set(float(t) for t in snapshot_times)))
    tiny = 1e-12 * max(T, 1.0)
    if len(sched) == 0 or sched[0] > tiny:
        sched = np.concatenate([[0.0], sched])
    sched[0] = max(sched[0], 0.0)
    if abs(sched[-1] - T) <= tiny:
        sched[-1] = T
    elif sched[-1] < T:
        sched = np.concatenate([sched, [T]])
    if sched[0] < 0.0 or sched[-1] > T + tiny:
        raise ValueError("snapshot times must lie in [0, T]")
    keep = [0]
    for i in range(1, len(sched)):
        if sched[i] - sched[keep[-1]] > tiny:
            keep.append(i)
    sched = sched[keep]
    sched[-1] = min(sched[-1], T)
    return sched


def simulate(u0: ScalarField, cfg: SolverConfig, T: float,
             snapshot_times=None) -> Trajectory:
    """Advance ``u0`` to time ``T`` recording snapshots.

    ``snapshot_times`` is an increasing sequence of times in ``[0, T]``
    (0 and T are added when missing); defaults to 33 uniform snapshots.
    The boundary-proximity sentinel and, for degenerate explicit runs,
    the per-step support-locality audit run during stepping.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    _check_finite(u0.values, "initial data")
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, T, 33)
    sched = normalize_schedule(snapshot_times, T)

    grid = u0.grid
    scale = float(np.max(np.abs(u0.values)))
    tau_sent = cfg.sentinel_tau_frac * scale
    audit = (cfg.audit_locality and cfg.stepper == "explicit"
             and cfg.eps_reg == 0.0 and cfg.params.degenerate)

    u = u0.copy()
    t = 0.0
    fields = [u.copy()]
    times = [0.0]
    if cfg.sentinel and scale > 0:
        _check_sentinel(u.values, grid, tau_sent, cfg.sentinel_margin, t)

    prev_bounds = _support_bounds(u.values, 0.0) if audit else None
    steps_since_checks = 0
    dt_cfl = cfl_dt(u, cfg) if cfg.stepper == "explicit" else None
    v_prev = None

    for t_next in sched[1:]:
        if cfg.stepper == "explicit":
            while t < t_next - 1e-15 * max(t_next, 1.0):
                if steps_since_checks % cfg.cfl_stride == 0:
                    dt_cfl = cfl_dt(u, cfg)
                dt = min(dt_cfl, t_next - t)
                u = step_explicit(u, cfg, dt)
                t += dt
                steps_since_checks += 1
                if audit:
                    new_bounds = _support_bounds(u.values, 0.0)
                    if prev_bounds is not None and new_bounds is not None:
                        for ax, ((plo, phi), (nlo, nhi)) in enumerate(
                                zip(prev_bounds, new_bounds)):
                            if nlo < plo - 1 or nhi > phi + 1:
                                raise NumericalError(
                                    f"support grew more than one cell on axis "
                                    f"{ax} in one step at t = {t:.6g}")
                    prev_bounds = new_bounds
                if (cfg.sentinel and scale > 0
                        and steps_since_checks % cfg.sentinel_stride == 0):
                    _check_sentinel(u.values, grid, tau_sent,
                                    cfg.sentinel_margin, t)
        else:
            dt_sub = (t_next - t) / cfg.substeps
            for _ in range(cfg.substeps):
                guess = None
                if v_prev is not None:
                    guess = u.values + (u.values - v_prev)
                v_prev = u.values
                u = step_implicit_proximal(u, cfg, dt_sub, v0=guess)
                t += dt_sub
            t = t_next
        if cfg.sentinel and scale > 0:
            _check_sentinel(u.values, grid, tau_sent, cfg.sentinel_margin, t)
        times.append(t_next)
        fields.append(u.copy())
        t = t_next

    return Trajectory(np.asarray(times), fields)


def mass_series(traj: Trajectory) -> np.ndarray:
    """Signed integral of every snapshot."""
    from .core import integral

    return np.array([integral(f) for f in traj.fields])


def l2_series(traj: Trajectory) -> np.ndarray:
    from .core import lp_norm

    return np.array([lp_norm(f, 2.0) for f in traj.fields])
