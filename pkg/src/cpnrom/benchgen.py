"""Deterministic snapshot generators for the benchmark problems.

Three data sets are produced:

* a closed-form one-parameter curve in R^3 whose coordinates are
  polynomials of a single parameter,
* a soliton of the Korteweg-de Vries equation
  ``u_t + 4 u u_x + u_xxx = 0`` on a periodic domain, solved
  pseudo-spectrally with a fourth-order exponential integrator,
* the Allen-Cahn equation ``u_t = c u_xx + u - u^3`` with Dirichlet
  boundary values, solved with a semi-implicit finite-difference scheme.

All generators are deterministic: parameter lists are fixed and the PDE
paths involve no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .snapdata import SnapshotSet

__all__ = [
    "BenchSpec",
    "toy_coordinates",
    "gen_toy",
    "gen_kdv",
    "gen_allen_cahn",
]


@dataclass(frozen=True)
class BenchSpec:
    """Echoable description of one benchmark run."""

    name: str
    grid_size: int
    dt_record: float
    horizon: float
    substeps: int
    parameters: tuple = ()
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "grid_size": self.grid_size,
            "dt_record": self.dt_record,
            "horizon": self.horizon,
            "substeps": self.substeps,
            "parameters": list(self.parameters),
            **self.extra,
        }


# Toy manifold ================================================================

def toy_coordinates(t: np.ndarray) -> np.ndarray:
    """The three coordinate functions of the closed-form curve, stacked
    as rows: ``t``, ``5 t^3 - 4 t``, and
    ``625 t^10 - 1500 t^8 + 1200 t^6 - 340 t^4 + 16 t^2``."""
    t = np.asarray(t, dtype=np.float64)
    a1 = t
    a2 = 5.0 * t**3 - 4.0 * t
    a3 = 625.0 * t**10 - 1500.0 * t**8 + 1200.0 * t**6 - 340.0 * t**4 + 16.0 * t**2
    return np.vstack([a1, a2, a3])


def gen_toy(num_t: int = 201) -> SnapshotSet:
    """Sample the curve at ``num_t`` equispaced parameters in [-1, 1]."""
    if num_t < 2:
        raise ValueError("num_t must be at least 2")
    t = np.linspace(-1.0, 1.0, num_t)
    return SnapshotSet(toy_coordinates(t))


# Korteweg-de Vries ===========================================================

def _etdrk4_tables(lin: np.ndarray, dt: float, n_contour: int = 32):
    """Exponential integrator coefficients via complex contour means.

    The contour trick avoids cancellation in the phi functions for small
    ``dt * lin``; see Kassam & Trefethen, SIAM J. Sci. Comput. 26 (2005).
    """
    z = dt * lin
    theta = np.exp(2j * np.pi * (np.arange(n_contour) + 0.5) / n_contour)
    zc = z[:, None] + theta[None, :]
    ez = np.exp(zc)
    e_full = np.exp(z)
    e_half = np.exp(z / 2.0)
    q = dt * ((np.exp(zc / 2.0) - 1.0) / zc).mean(axis=1)
    f1 = dt * ((-4.0 - zc + ez * (4.0 - 3.0 * zc + zc**2)) / zc**3).mean(axis=1)
    f2 = dt * ((2.0 + zc + ez * (zc - 2.0)) / zc**3).mean(axis=1)
    f3 = dt * ((-4.0 - 3.0 * zc - zc**2 + ez * (4.0 - zc)) / zc**3).mean(axis=1)
    return e_full, e_half, q, f1, f2, f3


def gen_kdv(
    grid_size: int = 256,
    dt_record: float = 2e-4,
    horizon: float = 1.0,
    train_horizon: float = 0.2,
    substeps: int = 4,
) -> tuple[SnapshotSet, SnapshotSet, BenchSpec]:
    """Soliton snapshots on ``[-pi, pi)`` with periodic boundaries.

    The initial condition is ``1 + 24 sech^2(sqrt(8) x)``.  The solution
    is recorded every ``dt_record`` time units up to ``horizon``; samples
    with ``t <= train_horizon`` form the training set and the remainder
    the test set.  Derivatives are spectral and the advection term is
    dealiased with the 2/3 rule; the integrator takes ``substeps``
    internal steps per recording interval.
    """
    d = grid_size
    x = -np.pi + 2.0 * np.pi * np.arange(d) / d
    u0 = 1.0 + 24.0 / np.cosh(np.sqrt(8.0) * x) ** 2

    k = np.fft.rfftfreq(d, 1.0 / d)  # integer wavenumbers 0..d/2
    lin = 1j * k**3  # from -u_xxx
    ik = 1j * k.copy()
    if d % 2 == 0:
        ik[-1] = 0.0  # odd derivative of the Nyquist mode is not representable
    dealias = k <= (2.0 / 3.0) * (d / 2)

    dt = dt_record / substeps
    e_full, e_half, q, f1, f2, f3 = _etdrk4_tables(lin, dt)

    def nonlin(vhat):
        u = np.fft.irfft(vhat, n=d)
        what = np.fft.rfft(u * u)
        what[~dealias] = 0.0
        return -2.0 * ik * what

    n_rec = int(round(horizon / dt_record))
    snaps = np.empty((d, n_rec + 1))
    snaps[:, 0] = u0
    vhat = np.fft.rfft(u0)
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up detected below
        for rec in range(1, n_rec + 1):
            for _ in range(substeps):
                n_u = nonlin(vhat)
                a = e_half * vhat + q * n_u
                n_a = nonlin(a)
                b = e_half * vhat + q * n_a
                n_b = nonlin(b)
                c = e_half * a + q * (2.0 * n_b - n_u)
                n_c = nonlin(c)
                vhat = e_full * vhat + f1 * n_u + 2.0 * f2 * (n_a + n_b) + f3 * n_c
            u = np.fft.irfft(vhat, n=d)
            if not np.all(np.isfinite(u)):
                raise FloatingPointError(
                    f"KdV field became non-finite at t = {rec * dt_record:.6g}"
                )
            snaps[:, rec] = u

    n_train = int(round(train_horizon / dt_record))
    spec = BenchSpec(
        name="kdv",
        grid_size=d,
        dt_record=dt_record,
        horizon=horizon,
        substeps=substeps,
        extra={
            "train_horizon": train_horizon,
            "column_order": "time increasing",
        },
    )
    return (
        SnapshotSet(snaps[:, : n_train + 1]),
        SnapshotSet(snaps[:, n_train + 1 :]),
        spec,
    )


# Allen-Cahn ==================================================================

def _reaction_flow(u: np.ndarray, tau: float) -> np.ndarray:
    """Exact solution of ``u' = u - u^3`` after time ``tau`` (the cubic
    reaction ODE integrates in closed form; the states +-1 and 0 are
    fixed points)."""
    decay = np.exp(-2.0 * tau)
    return u / np.sqrt(u**2 + (1.0 - u**2) * decay)


def _allen_cahn_path(
    lam: float, d: int, diffusion: float, dt_record: float, horizon: float, substeps: int
) -> np.ndarray:
    """One trajectory of the Allen-Cahn equation for initial-condition
    parameter ``lam``.

    Strang splitting per internal step: half an exact reaction flow,
    one Crank-Nicolson diffusion step (prefactored banded Cholesky),
    half a reaction flow.  Second order in time, unconditionally stable,
    and the Dirichlet values +-1 are preserved exactly.
    """
    x = np.linspace(-1.0, 1.0, d)
    dx = x[1] - x[0]
    dt = dt_record / substeps
    mu = 0.5 * dt * diffusion / dx**2

    n_int = d - 2
    # banded (upper) storage of I + mu * tridiag(-1, 2, -1)
    ab = np.zeros((2, n_int))
    ab[0, 1:] = -mu
    ab[1, :] = 1.0 + 2.0 * mu
    cb = cholesky_banded(ab)

    u = lam * x + (1.0 - lam) * np.sin(-1.5 * np.pi * x)
    u[0], u[-1] = -1.0, 1.0
    n_rec = int(round(horizon / dt_record))
    out = np.empty((d, n_rec + 1))
    out[:, 0] = u
    bc = np.zeros(n_int)
    bc[0], bc[-1] = -mu, mu  # Dirichlet contributions u(-1) = -1, u(1) = 1
    for rec in range(1, n_rec + 1):
        for _ in range(substeps):
            u = _reaction_flow(u, 0.5 * dt)
            ui = u[1:-1]
            # the stencil term carries one boundary contribution, the
            # implicit side needs the other
            rhs = ui + mu * (u[:-2] - 2.0 * ui + u[2:]) + bc
            u[1:-1] = cho_solve_banded((cb, False), rhs)
            u = _reaction_flow(u, 0.5 * dt)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(
                f"Allen-Cahn field became non-finite at t = {rec * dt_record:.6g}"
            )
        out[:, rec] = u
    return out


def gen_allen_cahn(
    grid_size: int = 512,
    diffusion: float = 1e-2,
    dt_record: float = 0.1,
    horizon: float = 60.0,
    substeps: int = 10,
    train_lambdas: tuple = (0.5, 0.55, 0.60),
    num_test_lambdas: int = 10,
) -> tuple[SnapshotSet, SnapshotSet, BenchSpec]:
    """Phase-separation snapshots on [-1, 1] with pinned boundary values.

    Initial conditions are ``lam * x + (1 - lam) * sin(-1.5 pi x)``.
    Training trajectories use the fixed ``train_lambdas``; test
    trajectories use ``num_test_lambdas`` equispaced values in the same
    range (deterministic by construction).  Columns are ordered with time
    varying fastest and the parameter slowest.
    """
    test_lambdas = np.linspace(min(train_lambdas), max(train_lambdas), num_test_lambdas)

    def stack(lams):
        return np.hstack(
            [
                _allen_cahn_path(lam, grid_size, diffusion, dt_record, horizon, substeps)
                for lam in lams
            ]
        )

    train = SnapshotSet(stack(train_lambdas))
    test = SnapshotSet(stack(test_lambdas))
    spec = BenchSpec(
        name="allen_cahn",
        grid_size=grid_size,
        dt_record=dt_record,
        horizon=horizon,
        substeps=substeps,
        parameters=tuple(train_lambdas),
        extra={
            "diffusion": diffusion,
            "test_parameters": [float(v) for v in test_lambdas],
            "column_order": "time fastest, lambda slowest",
        },
    )
    return train, test, spec
