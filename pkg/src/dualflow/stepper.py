"""Staggered dual-field time integration.

Vorticity, pressure and particle concentration live at integer time
levels, velocity at half levels.  After an implicit fixed-point startup
for u^{1/2}, every step is a fixed sequence of single linear solves:

  1. weak curl recovery       N om~ = <u^{k+1/2}, curl xi>
  2. particle transport       (M/dt + K/2) phi^{k+1} = (M/dt - K/2) phi^k
  3. vorticity transport      (N/dt + (C + nu L)/2) om^{k+1} = ... + sources
  4. velocity/pressure saddle (M/dt + R/2) u^{k+3/2} - D^T p = f,  D u = 0

with K = skew transport + diffusion, C the skew vorticity convection,
R the (exactly skew) rotation.  The skewness of R and C is what keeps
kinetic energy and enstrophy free of artificial dissipation; the
divergence constraint is enforced to solver precision every step.

The homogeneous mode (periodic box, no particles) drops steps 1-2 and
the wall terms and uses a prescribed viscosity instead of Gr^(-1/2).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import assemble
from .linsolve import (
    CachedLU,
    LinearSystem,
    SolverError,
    lu_solve,
    solve_saddle,
)
from .mesh import TAG_LEFT, TAG_RIGHT
from .spaces import (
    Field,
    constant_coefficients,
    discrete_curl,
    free_dofs,
    interpolate,
    make_space,
    normal_trace_dofs,
    project,
    wall_trace_dofs,
)

MODES = ("turbidity", "homogeneous")
DIV_TOL = 1e-10


class StartupError(RuntimeError):
    pass


@dataclass
class PhysicsConfig:
    mode: str = "turbidity"
    grashof: float = 5.0e6
    schmidt: float = 1.0
    settling_velocity: float = 0.02
    nu: float = 0.0  # homogeneous mode only
    gravity: tuple = (0.0, -1.0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "turbidity":
            if self.grashof <= 0 or self.schmidt <= 0:
                raise ValueError("Grashof and Schmidt numbers must be positive")
            if self.settling_velocity < 0:
                raise ValueError("settling velocity must be nonnegative")
        elif self.nu < 0:
            raise ValueError("viscosity must be nonnegative")
        gx, gy = self.gravity
        if abs(math.hypot(gx, gy) - 1.0) > 1e-12:
            raise ValueError("gravity direction must be a unit vector")

    @property
    def effective_viscosity(self):
        return 1.0 / math.sqrt(self.grashof) if self.mode == "turbidity" else self.nu

    @property
    def particle_diffusivity(self):
        return 1.0 / math.sqrt(self.grashof * self.schmidt**2)


@dataclass
class TimeConfig:
    dt: float
    t_end: float
    startup_tol: float = 1e-10
    startup_max_iter: int = 25

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least one time step")

    @property
    def num_steps(self):
        return max(1, int(math.floor(self.t_end / self.dt + 1e-9)))


@dataclass
class SimulationState:
    k: int
    u_half: Field            # velocity at t^{k+1/2}
    omega: Field             # vorticity at t^k
    phi: Field = None        # particle concentration at t^k (turbidity mode)
    p_bar: Field = None      # total pressure at t^k (diagnostic)
    omega_tilde: Field = None  # weak curl of u at t^{k-1/2} (diagnostic)


@dataclass
class StepAudit:
    """Per-step solver reports and budget bookkeeping."""

    reports: dict
    div_inf: float
    eps_v: float
    exchange: float          # <phi^{k+1} e_g, u^{k+3/2}>
    eps_s: float = 0.0
    mass_residual: float = 0.0
    phi_mid_bottom: float = 0.0  # int_{Gamma3} phi^{k+1/2}


class Model:
    """Spaces, static operators and cached factorizations for one run."""

    def __init__(self, mesh, degree, physics, time, paper_literal_signs=False,
                 solver_tol=1e-10, saddle_strategy="lu"):
        if physics.mode == "turbidity" and mesh.periodic:
            raise ValueError("turbidity mode needs a tagged channel mesh")
        if physics.mode == "homogeneous" and not mesh.periodic:
            raise ValueError("homogeneous mode runs on periodic meshes")
        self.mesh = mesh
        self.degree = degree
        self.physics = physics
        self.time = time
        self.paper_literal_signs = paper_literal_signs
        self.solver_tol = solver_tol
        self.saddle_strategy = saddle_strategy

        self.W = make_space(mesh, "CG", degree)
        self.U = make_space(mesh, "RT", degree)
        self.Q = make_space(mesh, "DG", degree - 1)
        self.qdeg = 2 * degree + 2
        self.bdeg = degree + 2

        if mesh.periodic:
            self.u_fixed = np.array([], dtype=np.int64)
            self.w_fixed = np.array([], dtype=np.int64)
        else:
            self.u_fixed = normal_trace_dofs(self.U)
            self.w_fixed = wall_trace_dofs(self.W, (TAG_RIGHT, TAG_LEFT))
        self.iu = free_dofs(self.U, self.u_fixed)
        self.iw = free_dofs(self.W, self.w_fixed)

        self.M = assemble.assemble_mass(self.U, self.qdeg)
        self.Nw = assemble.assemble_mass(self.W, self.qdeg)
        self.L = assemble.assemble_curlcurl(self.W, self.qdeg)
        self.D, self.P = assemble.assemble_div(self.U, self.Q, self.qdeg)
        self.MQ = assemble.assemble_mass(self.Q, self.qdeg)

        self.ones_w = constant_coefficients(self.W)
        self.ones_q = constant_coefficients(self.Q)
        self.area = mesh.total_area()
        self.y_w = interpolate(self.W, lambda x, y: y).coefficients

        self.M_r = self.M[self.iu][:, self.iu].tocsr()
        self.D_r = self.D[:, self.iu].tocsr()
        self.Nw_c = self.Nw[self.iw][:, self.iw].tocsr()
        self.L_c = self.L[self.iw][:, self.iw].tocsr()
        self._lu_curl = CachedLU(self.Nw_c)

        if physics.mode == "turbidity":
            from .mesh import TAG_BOTTOM, TAG_TOP

            self.B_top = assemble.assemble_wall_mass(self.W, TAG_TOP, self.bdeg)
            self.B_bottom = assemble.assemble_wall_mass(self.W, TAG_BOTTOM, self.bdeg)
            self.grad_dot_g = assemble.assemble_gradient_dot(self.W, self.qdeg, physics.gravity)
        else:
            self.B_top = self.B_bottom = None
            self.grad_dot_g = None

        self.nu = physics.effective_viscosity
        self.kappa = physics.particle_diffusivity if physics.mode == "turbidity" else 0.0

    # -- scalar functionals -------------------------------------------------

    def integral_w(self, coef):
        """<f, 1> for a CG coefficient vector."""
        return float(self.ones_w @ (self.Nw @ coef))

    def kinetic_energy(self, u):
        return 0.5 * float(u.coefficients @ (self.M @ u.coefficients))

    def enstrophy(self, omega):
        return 0.5 * float(omega.coefficients @ (self.Nw @ omega.coefficients))

    def total_vorticity(self, omega):
        return self.integral_w(omega.coefficients)

    def potential_energy(self, phi):
        return float(phi.coefficients @ (self.Nw @ self.y_w))

    def bottom_integral(self, coef):
        """int over Gamma3 of a CG field (assembly quadrature)."""
        return float(self.ones_w @ (self.B_bottom @ coef))

    def div_inf(self, u):
        return float(np.max(np.abs(self.D @ u.coefficients)))

    # -- sub-solves ----------------------------------------------------------

    def curl_h(self, u):
        """Weak curl recovery: find om~ with <om~, xi> = <u, curl xi>."""
        r = assemble.assemble_curl_rhs(u, self.W, self.qdeg)
        coef = np.zeros(self.W.dim)
        sol, rep = lu_solve(LinearSystem(self.Nw_c, r[self.iw]), cached=self._lu_curl)
        coef[self.iw] = sol
        return Field(self.W, coef), rep

    def solve_transport(self, u, phi, dt):
        """Particle step: midpoint skew transport plus diffusion."""
        A_du = assemble.assemble_particle_convection(
            u, self.physics.settling_velocity, self.W, self.qdeg, self.bdeg,
            paper_literal_signs=self.paper_literal_signs,
        )
        K = A_du + self.kappa * self.L
        Mdt = (1.0 / dt) * self.Nw
        rhs = (Mdt - 0.5 * K) @ phi.coefficients
        coef, rep = lu_solve(LinearSystem((Mdt + 0.5 * K).tocsr(), rhs), rtol=self.solver_tol)
        return Field(self.W, coef), rep

    def solve_vorticity(self, u, omega, dt, phi_mid=None, omega_tilde=None):
        """Vorticity step: skew convection, midpoint viscosity, wall/baroclinic sources."""
        C = assemble.skew_part(assemble.assemble_vorticity_convection(u, self.W, self.qdeg))
        K = (C + self.nu * self.L)[self.iw][:, self.iw]
        Mdt = (1.0 / dt) * self.Nw_c
        rhs = (Mdt - 0.5 * K) @ omega.coefficients[self.iw]
        if phi_mid is not None:
            rhs = rhs + assemble.assemble_baroclinic(phi_mid, self.W, self.qdeg, self.physics.gravity)[self.iw]
        if omega_tilde is not None:
            rhs = rhs + self.nu * assemble.assemble_vorticity_neumann(omega_tilde, self.W, self.bdeg)[self.iw]
        coef = np.zeros(self.W.dim)
        sol, rep = lu_solve(LinearSystem((Mdt + 0.5 * K).tocsr(), rhs), rtol=self.solver_tol)
        coef[self.iw] = sol
        return Field(self.W, coef), rep

    def solve_momentum(self, omega, u_old, dt, phi_buoy=None):
        """Velocity/pressure saddle step with rotation at the midpoint velocity."""
        R, l = assemble.assemble_rotation(omega, self.U, self.qdeg)
        R_r = R[self.iu][:, self.iu]
        Mdt = (1.0 / dt) * self.M_r
        A = (Mdt + 0.5 * R_r).tocsr()
        uo = u_old.coefficients[self.iu]
        f = (Mdt - 0.5 * R_r) @ uo - self.nu * l[self.iu]
        b = None
        if phi_buoy is not None:
            b = assemble.assemble_buoyancy(phi_buoy, self.U, self.qdeg, self.physics.gravity)
            f = f + b[self.iu]
        u_red, p, rep = solve_saddle(
            A, self.D_r, f, self.MQ, self.ones_q, self.area,
            rtol=self.solver_tol, strategy=self.saddle_strategy,
        )
        coef = np.zeros(self.U.dim)
        coef[self.iu] = u_red
        return Field(self.U, coef), Field(self.Q, p), l, b, rep


def _check_div(model, u, where):
    d = model.div_inf(u)
    if d > DIV_TOL:
        raise SolverError(f"{where}: ||D u||_inf = {d:.3e} exceeds {DIV_TOL}")
    return d


def step_turbidity(state, model):
    """Advance one step of the particle-laden scheme; returns (state, audit)."""
    if model.physics.mode != "turbidity":
        raise ValueError("step_turbidity requires a turbidity-mode model")
    dt = model.time.dt
    k = state.k
    u, omega, phi = state.u_half, state.omega, state.phi
    try:
        omega_tilde, rep1 = model.curl_h(u)                       # step 1
        phi_new, rep2 = model.solve_transport(u, phi, dt)         # step 2
        phi_mid = Field(model.W, 0.5 * (phi_new.coefficients + phi.coefficients))
        omega_new, rep3 = model.solve_vorticity(                  # step 3
            u, omega, dt, phi_mid=phi_mid, omega_tilde=omega_tilde
        )
        u_new, p_new, l_vec, b_vec, rep4 = model.solve_momentum(  # step 4
            omega_new, u, dt, phi_buoy=phi_new
        )
        div = _check_div(model, u_new, "step 4")
    except SolverError as exc:
        raise SolverError(f"step {k + 1} failed: {exc}") from exc

    u_s = model.physics.settling_velocity
    phi_mid_bottom = model.bottom_integral(phi_mid.coefficients)
    mass_residual = (
        model.integral_w(phi_new.coefficients - phi.coefficients)
        + dt * u_s * phi_mid_bottom
    )
    eps_v = model.nu * float(l_vec @ (0.5 * (u.coefficients + u_new.coefficients)))
    eps_s = u_s * model.integral_w(phi_mid.coefficients) - model.kappa * float(
        model.grad_dot_g @ phi_mid.coefficients
    )
    exchange = float(b_vec @ u_new.coefficients)
    audit = StepAudit(
        reports={"curl": rep1, "transport": rep2, "vorticity": rep3, "momentum": rep4},
        div_inf=div, eps_v=eps_v, eps_s=eps_s, exchange=exchange,
        mass_residual=mass_residual, phi_mid_bottom=phi_mid_bottom,
    )
    new_state = SimulationState(
        k=k + 1, u_half=u_new, omega=omega_new, phi=phi_new,
        p_bar=p_new, omega_tilde=omega_tilde,
    )
    return new_state, audit


def step_homogeneous(state, model):
    """Advance one step of the homogeneous periodic scheme."""
    if model.physics.mode != "homogeneous":
        raise ValueError("step_homogeneous requires a homogeneous-mode model")
    dt = model.time.dt
    k = state.k
    u, omega = state.u_half, state.omega
    try:
        omega_new, rep3 = model.solve_vorticity(u, omega, dt)
        u_new, p_new, l_vec, _, rep4 = model.solve_momentum(omega_new, u, dt)
        div = _check_div(model, u_new, "step 4")
    except SolverError as exc:
        raise SolverError(f"step {k + 1} failed: {exc}") from exc
    eps_v = model.nu * float(l_vec @ (0.5 * (u.coefficients + u_new.coefficients)))
    audit = StepAudit(
        reports={"vorticity": rep3, "momentum": rep4},
        div_inf=div, eps_v=eps_v, eps_s=0.0, exchange=0.0,
    )
    new_state = SimulationState(k=k + 1, u_half=u_new, omega=omega_new, p_bar=p_new)
    return new_state, audit


def step(state, model):
    if model.physics.mode == "turbidity":
        return step_turbidity(state, model)
    return step_homogeneous(state, model)


# ---------------------------------------------------------------------------
# Initial conditions and startup


@dataclass
class LockInitialCondition:
    """Smoothed lock indicator: phi0 = (1 - tanh(x/delta)) / 2.

    The interface width defaults to twice the smallest edge length; the
    profile is L2-projected, so small over/undershoots are possible and
    are recorded rather than clipped.
    """

    interface_width: float = None

    def build(self, model):
        delta = self.interface_width if self.interface_width else 2.0 * model.mesh.h_min()
        phi0 = project(model.W, lambda x, y: 0.5 * (1.0 - np.tanh(x / delta)), model.qdeg)
        u0 = Field(model.U, np.zeros(model.U.dim))
        om0 = Field(model.W, np.zeros(model.W.dim))
        return u0, om0, phi0


@dataclass
class TaylorGreenInitialCondition:
    """Decaying vortex array on [0, 2pi]^2 with exact solution available."""

    def velocity(self, t, nu):
        decay = math.exp(-2.0 * nu * t)

        def fn(x, y):
            return (np.sin(x) * np.cos(y) * decay, -np.cos(x) * np.sin(y) * decay)

        return fn

    def vorticity(self, t, nu):
        decay = math.exp(-2.0 * nu * t)
        return lambda x, y: 2.0 * np.sin(x) * np.sin(y) * decay

    def build(self, model):
        nu = model.physics.nu
        u0 = interpolate(model.U, self.velocity(0.0, nu))
        om0 = interpolate(model.W, self.vorticity(0.0, nu))
        return u0, om0, None


@dataclass
class RandomSolenoidalInitialCondition:
    """Random stream function -> exactly divergence-free RT velocity."""

    seed: int = 0

    def build(self, model):
        rng = np.random.default_rng(self.seed)
        psi = Field(model.W, rng.standard_normal(model.W.dim))
        u0 = discrete_curl(psi, model.U)
        scale = math.sqrt(2.0 * model.kinetic_energy(u0))
        u0 = Field(model.U, u0.coefficients / scale)  # unit L2 norm
        om0, _ = model.curl_h(u0)
        return u0, om0, None


@dataclass
class StartupReport:
    iterations: int
    update: float
    residual_history: list = field(default_factory=list)


def initialize(model, ic=None):
    """Implicit startup: fixed-point iteration for u^{1/2} over [0, dt/2].

    Each pass solves the momentum saddle with the rotation frozen at the
    current vorticity iterate and (in turbidity mode) buoyancy frozen at
    phi^0; the vorticity iterate is then refreshed as the weak curl of
    the midpoint velocity.
    """
    if ic is None:
        ic = LockInitialCondition() if model.physics.mode == "turbidity" else TaylorGreenInitialCondition()
    u0, omega0, phi0 = ic.build(model)
    tol, cap = model.time.startup_tol, model.time.startup_max_iter
    omega_star = omega0
    u_prev = u0
    p = Field(model.Q, np.zeros(model.Q.dim))
    history = []
    converged = False
    iterations = 0
    for it in range(1, cap + 1):
        u_new, p, _, _, _ = model.solve_momentum(
            omega_star, u0, 0.5 * model.time.dt, phi_buoy=phi0
        )
        du = u_new.coefficients - u_prev.coefficients
        scale = float(np.linalg.norm(u_new.coefficients))
        rel = float(np.linalg.norm(du)) / (scale if scale > 0 else 1.0)
        history.append(rel)
        u_prev = u_new
        iterations = it
        if rel <= tol:
            converged = True
            break
        mid = Field(model.U, 0.5 * (u0.coefficients + u_new.coefficients))
        omega_star, _ = model.curl_h(mid)
    if not converged:
        raise StartupError(
            f"startup fixed point did not reach {tol:.1e} within {cap} iterations "
            f"(last update {history[-1]:.3e})"
        )
    _check_div(model, u_prev, "startup")
    omega_tilde, _ = model.curl_h(u_prev)
    state = SimulationState(
        k=0, u_half=u_prev, omega=omega0, phi=phi0, p_bar=p, omega_tilde=omega_tilde,
    )
    return state, StartupReport(iterations=iterations, update=history[-1], residual_history=history)


def run(config, **kwargs):
    """Execute a configured run; see driver.run for the full signature."""
    from .driver import run as _run

    return _run(config, **kwargs)
