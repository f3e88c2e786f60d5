"""Deterministic limit solvers: renewal-type Volterra systems for all four
models, a generic two-unknown linear Volterra solver, and the Markovian-ODE
and deterministic-duration delay special cases used as cross-checks.

Discretization: uniform grid, product-trapezoidal convolution. Kernel jump
discontinuities are carried separately as (lag, jump) atoms whose
contribution is a shifted cumulative of the rate path, so deterministic
period laws stay exact up to the trapezoid order. The kernel value at lag 0
enters each step implicitly; the within-step scalar fixed point is iterated
to 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agent_sim import ModelSpec
from .distributions import (
    DurationDist,
    JointDurationDist,
    KernelTable,
    grid_step,
    tabulate_kernels,
    uniform_grid,
)

__all__ = [
    "ConvKernel",
    "FluidSolution",
    "survival_kernel",
    "cdf_kernel",
    "table_kernel",
    "conv_full",
    "solve_fluid",
    "solve_linear_volterra_2d",
    "solve_markovian_ode",
    "solve_deterministic_delay",
]

_TOL = 1e-12
_MAX_ITER = 20
_MAX_HALVINGS = 4


@dataclass(frozen=True)
class ConvKernel:
    """Kernel split into a continuous part on grid lags plus jump atoms.

    The represented kernel is cont[k] + sum of jumps with lag index <= k.
    Atoms must sit exactly on grid nodes.
    """

    cont: np.ndarray
    atoms: tuple = ()


def _atom_lag(loc: float, dt: float) -> int:
    lag = loc / dt
    r = round(lag)
    if abs(lag - r) > 1e-9 * max(1.0, abs(lag)):
        raise ValueError(f"kernel jump at t={loc:g} does not lie on a grid node (dt={dt:g})")
    return int(r)


def survival_kernel(d: DurationDist, grid) -> ConvKernel:
    """K(t) = 1 - CDF(t) with the jumps carried as atoms."""
    dt = grid_step(grid)
    cont = 1.0 - d.cdf_continuous(grid)
    atoms = tuple((_atom_lag(b, dt), -j) for b, j in d.atoms())
    return ConvKernel(cont=cont, atoms=atoms)


def cdf_kernel(d: DurationDist, grid) -> ConvKernel:
    dt = grid_step(grid)
    cont = np.asarray(d.cdf_continuous(grid), dtype=float)
    atoms = tuple((_atom_lag(b, dt), j) for b, j in d.atoms())
    return ConvKernel(cont=cont, atoms=atoms)


def table_kernel(values: np.ndarray, atom_pairs, grid) -> ConvKernel:
    """ConvKernel from tabulated kernel values whose jumps are listed separately."""
    grid = np.asarray(grid, dtype=float)
    dt = grid_step(grid)
    cont = np.array(values, dtype=float, copy=True)
    atoms = []
    for loc, j in atom_pairs:
        lag = _atom_lag(loc, dt)
        if lag < len(cont):
            cont[lag:] -= j
        atoms.append((lag, j))
    return ConvKernel(cont=cont, atoms=tuple(atoms))


def conv_full(ker: ConvKernel, q: np.ndarray, dt: float) -> np.ndarray:
    """int_0^{t_k} K(t_k - s) q(s) ds for a fully known rate path q."""
    q = np.asarray(q, dtype=float)
    k1 = len(q)
    cont = ker.cont[:k1]
    out = dt * (np.convolve(cont, q)[:k1] - 0.5 * cont * q[0] - 0.5 * cont[0] * q)
    if ker.atoms:
        qc = _cumtrapz(q, dt)
        for lag, j in ker.atoms:
            if lag == 0:
                out += j * qc
            elif lag < k1:
                out[lag:] += j * qc[: k1 - lag]
    return out


def _cumtrapz(q, dt):
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    out[..., 0] = 0.0
    np.cumsum(0.5 * dt * (q[..., 1:] + q[..., :-1]), axis=-1, out=out[..., 1:])
    return out


class _StepKernel:
    """Per-step convolution bookkeeping for one kernel against the rate path."""

    __slots__ = ("cont", "atoms", "lag0", "w", "dt")

    def __init__(self, ker: ConvKernel, dt: float):
        self.cont = np.ascontiguousarray(ker.cont, dtype=float)
        self.atoms = tuple((lag, j) for lag, j in ker.atoms if lag > 0)
        self.lag0 = sum(j for lag, j in ker.atoms if lag == 0)
        # implicit weight of q_k: half-cell of the lag-0 kernel value
        self.w = 0.5 * dt * (self.cont[0] + self.lag0)
        self.dt = dt

    def known(self, k, q, qr, qcum, kk):
        """Contribution of q[0..k-1]; q[k]'s share is self.w * q[k]."""
        s = 0.5 * self.cont[k] * q[0]
        if k > 1:
            s += np.dot(self.cont[1:k], qr[kk - k + 1 : kk])
        v = self.dt * s
        if self.lag0:
            v += self.lag0 * (qcum[k - 1] + 0.5 * self.dt * q[k - 1])
        for lag, j in self.atoms:
            if lag <= k:
                v += j * qcum[k - lag]
        return v


class _StepDiverged(Exception):
    pass


@dataclass
class FluidSolution:
    """Deterministic compartment fractions on a uniform grid.

    A is the cumulative infection fraction and L the cumulative onset
    fraction (equal to A except for SEIR). diagnostics records the grid
    step actually used, internal halvings, fixed-point iteration counts,
    and probe residuals of the discretized equations.
    """

    kind: str
    grid: np.ndarray
    S: np.ndarray
    E: np.ndarray
    I: np.ndarray
    R: np.ndarray
    A: np.ndarray
    L: np.ndarray
    spec: object = field(repr=False, default=None)
    diagnostics: dict = field(default_factory=dict)


def _fixed_point_scalar(update, q0):
    """Iterate q = update(q) from q0; returns (q, iterations) or raises."""
    # Divergence is detected and handled, so silence transient overflows.
    q = q0
    delta = float("inf")
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, _MAX_ITER + 1):
            qn = update(q)
            if not math.isfinite(qn):
                raise _StepDiverged(float("inf"))
            delta = abs(qn - q)
            if delta <= _TOL * max(1.0, abs(qn)):
                return qn, it
            q = qn
    raise _StepDiverged(delta)


def _init_guess(mode, q, k):
    if mode == "extrapolate" and k >= 2:
        return 2.0 * q[k - 1] - q[k - 2]
    return q[k - 1]


def _require_nodes(grid, dists):
    dt = grid_step(grid)
    for d in dists:
        if d is None:
            continue
        for loc, _ in d.atoms():
            _atom_lag(loc, dt)


def solve_fluid(
    spec: ModelSpec,
    grid,
    kernels: KernelTable | None = None,
    step_init: str = "previous",
) -> FluidSolution:
    """Solve the deterministic limit system of spec's model on the grid."""
    grid = np.asarray(grid, dtype=float)
    grid_step(grid)  # validate uniformity
    horizon = float(grid[-1])
    dt0 = float(grid[1] - grid[0])

    last = None
    for halving in range(_MAX_HALVINGS + 1):
        dt = dt0 / (1 << halving)
        g = uniform_grid(horizon, dt) if halving else grid
        try:
            sol = _solve_fluid_on(spec, g, kernels if not halving else None, step_init)
        except _StepDiverged as e:
            last = e
            continue
        if halving:
            stride = 1 << halving
            idx = np.arange(0, len(g), stride)
            sol = FluidSolution(
                kind=sol.kind,
                grid=grid,
                S=sol.S[idx],
                E=sol.E[idx],
                I=sol.I[idx],
                R=sol.R[idx],
                A=sol.A[idx],
                L=sol.L[idx],
                spec=spec,
                diagnostics=dict(sol.diagnostics, halvings=halving, dt=dt),
            )
        return sol
    raise RuntimeError(
        f"within-step fixed point failed to converge after {_MAX_HALVINGS} grid "
        f"halvings (last residual {last.args[0]:.3e})"
    )


def _solve_fluid_on(spec, grid, kernels, step_init):
    kind = spec.kind
    dt = float(grid[1] - grid[0])
    kk = len(grid) - 1
    lam = spec.lam_on_grid(grid)
    i0, e0, r0 = spec.i0, spec.e0, spec.r0

    q = np.zeros(kk + 1)
    qr = np.zeros(kk + 1)  # qr[kk - j] = q[j], kept for contiguous dots
    qcum = np.zeros(kk + 1)
    max_it = 0

    if kind in ("SIS", "SIR"):
        _require_nodes(grid, [spec.f, spec.f0])
        ker_i = _StepKernel(survival_kernel(spec.f, grid), dt)
        forc_i = i0 * spec.f0.sf(grid)
        ii = np.empty(kk + 1)
        ii[0] = forc_i[0]
        s_base = 1.0 - i0
        ss = np.empty(kk + 1)
        ss[0] = (1.0 - ii[0]) if kind == "SIS" else s_base
        q[0] = lam[0] * ss[0] * ii[0]
        qr[kk] = q[0]
        for k in range(1, kk + 1):
            kn = ker_i.known(k, q, qr, qcum, kk)
            lam_k = lam[k]
            base = forc_i[k] + kn
            if kind == "SIS":

                def upd(qk):
                    ik = base + ker_i.w * qk
                    return lam_k * (1.0 - ik) * ik

            else:
                s_known = s_base - (qcum[k - 1] + 0.5 * dt * q[k - 1])

                def upd(qk):
                    ik = base + ker_i.w * qk
                    sk = s_known - 0.5 * dt * qk
                    return lam_k * sk * ik

            qk, it = _fixed_point_scalar(upd, _init_guess(step_init, q, k))
            max_it = max(max_it, it)
            q[k] = qk
            qr[kk - k] = qk
            qcum[k] = qcum[k - 1] + 0.5 * dt * (q[k - 1] + qk)
            ii[k] = base + ker_i.w * qk
            ss[k] = (1.0 - ii[k]) if kind == "SIS" else s_base - qcum[k]
        if kind == "SIS":
            rr = np.zeros(kk + 1)
        else:
            rr = i0 * spec.f0.cdf(grid) + conv_full(cdf_kernel(spec.f, grid), q, dt)
        ee = np.zeros(kk + 1)
        ll = qcum.copy()
        aa = qcum.copy()
        resid = _probe_residual(ii, forc_i, survival_kernel(spec.f, grid), q, dt)

    elif kind == "SEIR":
        h0 = spec.h0 if spec.h0 is not None else spec.h
        kt = kernels if kernels is not None else tabulate_kernels(spec.h, h0, grid)
        _check_table(kt, grid)
        ker_i = _StepKernel(table_kernel(kt.psi, kt.psi_atoms, grid), dt)
        forc_i = e0 * kt.psi0
        if i0 > 0:
            forc_i = forc_i + i0 * spec.f0.sf(grid)
        s_base = 1.0 - i0 - e0
        ii = np.empty(kk + 1)
        ii[0] = forc_i[0]
        ss = np.empty(kk + 1)
        ss[0] = s_base
        q[0] = lam[0] * s_base * ii[0]
        qr[kk] = q[0]
        for k in range(1, kk + 1):
            kn = ker_i.known(k, q, qr, qcum, kk)
            lam_k = lam[k]
            base = forc_i[k] + kn
            s_known = s_base - (qcum[k - 1] + 0.5 * dt * q[k - 1])

            def upd(qk):
                return lam_k * (s_known - 0.5 * dt * qk) * (base + ker_i.w * qk)

            qk, it = _fixed_point_scalar(upd, _init_guess(step_init, q, k))
            max_it = max(max_it, it)
            q[k] = qk
            qr[kk - k] = qk
            qcum[k] = qcum[k - 1] + 0.5 * dt * (q[k - 1] + qk)
            ii[k] = base + ker_i.w * qk
            ss[k] = s_base - qcum[k]
        gker = survival_kernel(spec.h.g, grid)
        ee = e0 * (1.0 - h0.g.cdf(grid)) + conv_full(gker, q, dt)
        rr = e0 * kt.phi0 + conv_full(table_kernel(kt.phi, kt.phi_atoms, grid), q, dt)
        if i0 > 0:
            rr = rr + i0 * spec.f0.cdf(grid)
        ll = e0 * h0.g.cdf(grid) + conv_full(cdf_kernel(spec.h.g, grid), q, dt)
        aa = qcum.copy()
        resid = _probe_residual(ii, forc_i, table_kernel(kt.psi, kt.psi_atoms, grid), q, dt)

    elif kind == "SIRS":
        h0 = spec.h0 if spec.h0 is not None else spec.h
        kt = kernels if kernels is not None else tabulate_kernels(spec.h, h0, grid)
        _check_table(kt, grid)
        ker_i = _StepKernel(survival_kernel(spec.h.g, grid), dt)
        ker_r = _StepKernel(table_kernel(kt.psi, kt.psi_atoms, grid), dt)
        forc_i = i0 * (1.0 - h0.g.cdf(grid))
        forc_r = i0 * kt.psi0
        if r0 > 0:
            forc_r = forc_r + r0 * spec.f0.sf(grid)
        ii = np.empty(kk + 1)
        rr = np.empty(kk + 1)
        ii[0] = forc_i[0]
        rr[0] = forc_r[0]
        q[0] = lam[0] * (1.0 - ii[0] - rr[0]) * ii[0]
        qr[kk] = q[0]
        for k in range(1, kk + 1):
            kn_i = ker_i.known(k, q, qr, qcum, kk)
            kn_r = ker_r.known(k, q, qr, qcum, kk)
            lam_k = lam[k]
            base_i = forc_i[k] + kn_i
            base_r = forc_r[k] + kn_r

            def upd(qk):
                ik = base_i + ker_i.w * qk
                rk = base_r + ker_r.w * qk
                return lam_k * (1.0 - ik - rk) * ik

            qk, it = _fixed_point_scalar(upd, _init_guess(step_init, q, k))
            max_it = max(max_it, it)
            q[k] = qk
            qr[kk - k] = qk
            qcum[k] = qcum[k - 1] + 0.5 * dt * (q[k - 1] + qk)
            ii[k] = base_i + ker_i.w * qk
            rr[k] = base_r + ker_r.w * qk
        ss = 1.0 - ii - rr
        ee = np.zeros(kk + 1)
        ll = qcum.copy()
        aa = qcum.copy()
        resid = _probe_residual(ii, forc_i, survival_kernel(spec.h.g, grid), q, dt)

    else:  # pragma: no cover - ModelSpec already validates
        raise ValueError(f"unsupported kind {kind}")

    return FluidSolution(
        kind=kind,
        grid=grid,
        S=ss,
        E=ee,
        I=ii,
        R=rr,
        A=aa,
        L=ll,
        spec=spec,
        diagnostics={
            "dt": dt,
            "halvings": 0,
            "max_iterations": max_it,
            "probe_residual": resid,
        },
    )


def _check_table(kt: KernelTable, grid):
    if len(kt.grid) != len(grid) or abs(kt.grid[-1] - grid[-1]) > 1e-9:
        raise ValueError("kernel table must be tabulated on the solver grid")


def _probe_residual(x, forcing, ker, q, dt):
    """Discretized-equation residual at a handful of probe nodes."""
    kk = len(q) - 1
    probes = np.unique(np.linspace(0, kk, 9, dtype=int))
    conv = conv_full(ker, q, dt)
    return float(np.max(np.abs(x[probes] - forcing[probes] - conv[probes])))


def _as_conv_kernel(K, n_nodes) -> ConvKernel:
    if isinstance(K, ConvKernel):
        if len(K.cont) != n_nodes:
            raise ValueError("kernel path length must match the grid")
        return K
    K = np.asarray(K, dtype=float)
    if K.ndim != 1 or len(K) != n_nodes:
        raise ValueError("kernel path length must match the grid")
    return ConvKernel(cont=K, atoms=())


def solve_linear_volterra(forcings, kernels, coefs, weights, grid, residual_check=False):
    """Linear Volterra system solver shared by the limit-process machinery.

    Solves X_i(t) = f_i(t) + c_i int_0^t K_i(t-s) r(s) ds with the coupling
    r = sum_i z_i X_i. Forcings may be (P, K+1) path bundles; the step solve
    is exact (the implicit weight enters linearly) and vectorized across
    paths. Returns (list of X_i, r) with the forcings' shape.
    """
    grid = np.asarray(grid, dtype=float)
    dt = grid_step(grid)
    kk = len(grid) - 1
    n = kk + 1
    kers = [_StepKernel(_as_conv_kernel(K, n), dt) for K in kernels]
    m = len(kers)
    if not (len(forcings) == len(coefs) == len(weights) == m):
        raise ValueError("forcings, kernels, coefs, weights must have equal length")
    fs = [np.asarray(f, dtype=float) for f in forcings]
    shape = np.broadcast_shapes(*(f.shape for f in fs))
    if shape[-1] != n or len(shape) > 2:
        raise ValueError("forcings must be (n,) or (paths, n) on the grid")
    flat = len(shape) == 1
    fs = [np.ascontiguousarray(np.broadcast_to(f, shape)).reshape(-1, n) for f in fs]
    p = fs[0].shape[0]
    zs = []
    for z in weights:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            z = np.full(n, float(z))
        if z.shape != (n,):
            raise ValueError("coupling weights must be scalars or (n,) paths")
        zs.append(z)
    cs = [float(c) for c in coefs]

    r = np.zeros((p, n))
    rrev = np.zeros((p, n))  # rrev[:, kk - j] = r[:, j], for contiguous dots
    rcum = np.zeros((p, n))
    xs = [np.empty((p, n)) for _ in range(m)]

    r0 = np.zeros(p)
    for i in range(m):
        xs[i][:, 0] = fs[i][:, 0]
        r0 += zs[i][0] * fs[i][:, 0]
    r[:, 0] = r0
    rrev[:, kk] = r0

    for k in range(1, n):
        den = 1.0
        num = np.zeros(p)
        knowns = []
        for i, ker in enumerate(kers):
            kn = 0.5 * ker.cont[k] * r[:, 0]
            if k > 1:
                kn = kn + rrev[:, kk - k + 1 : kk] @ ker.cont[1:k]
            kn *= dt
            if ker.lag0:
                kn += ker.lag0 * (rcum[:, k - 1] + 0.5 * dt * r[:, k - 1])
            for lag, j in ker.atoms:
                if lag <= k:
                    kn += j * rcum[:, k - lag]
            knowns.append(kn)
            num += zs[i][k] * (fs[i][:, k] + cs[i] * kn)
            den -= zs[i][k] * cs[i] * ker.w
        rk = num / den
        r[:, k] = rk
        rrev[:, kk - k] = rk
        rcum[:, k] = rcum[:, k - 1] + 0.5 * dt * (r[:, k - 1] + rk)
        for i in range(m):
            xs[i][:, k] = fs[i][:, k] + cs[i] * (knowns[i] + kers[i].w * rk)

    if residual_check:
        worst = 0.0
        for i, K in enumerate(kernels):
            ker = _as_conv_kernel(K, n)
            for pp in range(p):
                conv = conv_full(ker, r[pp], dt)
                worst = max(worst, float(np.max(np.abs(xs[i][pp] - fs[i][pp] - cs[i] * conv))))
        if worst > 1e-10:
            raise RuntimeError(f"discretized-equation residual {worst:.3e} above 1e-10")
    if flat:
        return [x[0] for x in xs], r[0]
    return xs, r


def solve_linear_volterra_2d(a, x, y, z, w, c, K, grid):
    """Two-unknown linear system: phi(t) = a + x(t) + c int (phi z + w psi) ds,
    psi(t) = y(t) + c int K(t-s)(phi z + w psi)(s) ds. Returns (phi, psi)."""
    grid = np.asarray(grid, dtype=float)
    n = len(grid)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    for name, arr in (("x", x), ("y", y), ("z", z), ("w", w)):
        if arr.shape != (n,):
            raise ValueError(f"path {name} must have the grid's length")
    ones = ConvKernel(cont=np.ones(n), atoms=())
    xs, _ = solve_linear_volterra(
        forcings=[float(a) + x, y],
        kernels=[ones, _as_conv_kernel(K, n)],
        coefs=[float(c), float(c)],
        weights=[z, w],
        grid=grid,
        residual_check=True,
    )
    return xs[0], xs[1]


_ODE_INIT_KEYS = {"i0", "e0", "r0"}


def solve_markovian_ode(kind, lam, gamma, mu, init, grid) -> FluidSolution:
    """Classic RK4 for the exponential-period special case.

    Rates: lam infection; mu exit from I (SIS: back to S, SIR/SEIR: to R);
    gamma E->I for SEIR. For SIRS gamma is the I->R rate and mu the R->S
    rate, matching the equilibrium formulas.
    """
    if kind not in ("SIS", "SIR", "SIRS", "SEIR"):
        raise ValueError(f"unknown kind {kind!r}")
    if lam < 0 or mu <= 0 or (kind == "SEIR" and gamma <= 0) or (kind == "SIRS" and gamma <= 0):
        raise ValueError("rates must be positive")
    if not _ODE_INIT_KEYS.issuperset(init):
        raise ValueError(f"init keys must be among {sorted(_ODE_INIT_KEYS)}")
    i0 = float(init.get("i0", 0.0))
    e0 = float(init.get("e0", 0.0))
    r0 = float(init.get("r0", 0.0))
    grid = np.asarray(grid, dtype=float)
    dt = grid_step(grid)
    n = len(grid)

    def vf(u):
        s, e, i, r = u
        inf = lam * s * i
        if kind == "SIS":
            return np.array([-inf + mu * i, 0.0, inf - mu * i, 0.0])
        if kind == "SIR":
            return np.array([-inf, 0.0, inf - mu * i, mu * i])
        if kind == "SEIR":
            return np.array([-inf, inf - gamma * e, gamma * e - mu * i, mu * i])
        return np.array([-inf + mu * r, 0.0, inf - gamma * i, gamma * i - mu * r])

    def flux(v):
        return lam * v[0] * v[2]

    out = np.empty((n, 4))
    u = np.array([1.0 - i0 - e0 - r0, e0, i0, r0])
    out[0] = u
    acum = np.empty(n)
    acum[0] = 0.0
    for k in range(1, n):
        k1 = vf(u)
        u2 = u + 0.5 * dt * k1
        k2 = vf(u2)
        u3 = u + 0.5 * dt * k2
        k3 = vf(u3)
        u4 = u + dt * k3
        k4 = vf(u4)
        # the cumulative infection flux rides along at the same order
        acum[k] = acum[k - 1] + dt / 6.0 * (flux(u) + 2.0 * flux(u2) + 2.0 * flux(u3) + flux(u4))
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = u

    ll = acum.copy()
    if kind == "SEIR":
        ll = e0 + acum - out[:, 1]  # onsets = E(0) + infections - current E
    return FluidSolution(
        kind=kind,
        grid=grid,
        S=out[:, 0],
        E=out[:, 1],
        I=out[:, 2],
        R=out[:, 3],
        A=acum,
        L=ll,
        spec={"lam": lam, "gamma": gamma, "mu": mu, "init": dict(init)},
        diagnostics={"dt": dt, "method": "rk4"},
    )


def solve_deterministic_delay(kind, lam, xi, eta, init, grid) -> FluidSolution:
    """Delay-equation form of the SIRS system with point-mass periods.

    Infectious period exactly xi, immune period exactly eta; initially
    infectious (immune) agents carry uniform residuals on [0, xi] ([0, eta]).
    The grid step must divide both xi and eta so the moving integration
    limits land on nodes.
    """
    if kind != "SIRS":
        raise ValueError("the delay form is implemented for SIRS only")
    if xi <= 0 or eta <= 0:
        raise ValueError("xi and eta must be positive")
    grid = np.asarray(grid, dtype=float)
    dt = grid_step(grid)
    mx = xi / dt
    me = eta / dt
    if abs(mx - round(mx)) > 1e-9 or abs(me - round(me)) > 1e-9:
        raise ValueError(f"grid step {dt:g} must divide xi={xi:g} and eta={eta:g}")
    mx = int(round(mx))
    me = int(round(me))
    i0 = float(init.get("i0", 0.0))
    r0 = float(init.get("r0", 0.0))
    kk = len(grid) - 1

    # uniform residuals: still-infectious fraction (1 - t/xi)^+, etc.
    forc_i = i0 * np.clip(1.0 - grid / xi, 0.0, None)
    psi0 = (np.minimum(grid, xi) - np.minimum(np.clip(grid - eta, 0.0, None), xi)) / xi
    forc_r = r0 * np.clip(1.0 - grid / eta, 0.0, None) + i0 * psi0

    # q = (1 - I - R) I; the lam factor stays outside the integrals
    q = np.zeros(kk + 1)
    qcum = np.zeros(kk + 1)
    ii = np.empty(kk + 1)
    rr = np.empty(kk + 1)
    ii[0] = forc_i[0]
    rr[0] = forc_r[0]
    q[0] = (1.0 - ii[0] - rr[0]) * ii[0]
    max_it = 0
    for k in range(1, kk + 1):
        lag_x = qcum[k - mx] if k >= mx else 0.0
        lag_xe = qcum[k - mx - me] if k >= mx + me else 0.0
        rr[k] = forc_r[k] + lam * (lag_x - lag_xe)
        base_cum = qcum[k - 1] + 0.5 * dt * q[k - 1]
        rk = rr[k]
        fk = forc_i[k]

        def upd(qk):
            ik = fk + lam * (base_cum + 0.5 * dt * qk - lag_x)
            return (1.0 - ik - rk) * ik

        qk, it = _fixed_point_scalar(upd, q[k - 1])
        max_it = max(max_it, it)
        q[k] = qk
        qcum[k] = base_cum + 0.5 * dt * qk
        ii[k] = fk + lam * (qcum[k] - lag_x)

    aa = lam * qcum
    ss = 1.0 - ii - rr
    return FluidSolution(
        kind="SIRS",
        grid=grid,
        S=ss,
        E=np.zeros(kk + 1),
        I=ii,
        R=rr,
        A=aa,
        L=aa.copy(),
        spec={"lam": lam, "xi": xi, "eta": eta, "init": dict(init)},
        diagnostics={"dt": dt, "max_iterations": max_it, "method": "delay"},
    )
