"""Time integrators and comparison experiments on the space of Gram matrices.

The balancing flow moves a Gram matrix with ON-frame Gram rate
2 pi k^2 mu0_bar, which is the direction in which ||mu0_bar|| dissipates
(d ||mu0||^2 / dt = -4 pi k^2 * int |xi_perp|^2); the iteration counterpart
re-Grams the unit-density fiber metric.  Both settle on balanced points.
The comparison experiments integrate the curvature potential flow, push it
through the L2 Gram map at each time, and measure how far the matrix flow
drifts from that path in the rescaled symmetric-space distance.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import hermitian as hm
from .bergman import BergmanPoint, EmbeddedPoint, SectionFrame, gram_rate, hilb, point_move
from .calabi import SymmetricProfile, calabi_flow, stable_dt
from .ratefit import fit_rate
from .sphere import S_BAR, TWO_PI, KahlerData, SphereGrid, ZonalBasis

STEP_GUARD = 0.5  # dt * 2 pi k^2 * ||mu0||_op must stay below this


class FlowTrace:
    """Time series of Bergman points with per-step diagnostics."""

    def __init__(self, k: int):
        self.k = k
        self.times: list[float] = []
        self.points: list[BergmanPoint] = []
        self.diagnostics: dict[str, list[float]] = {
            "mu0_norm": [], "mu_bar_op": [], "beta_sup": [],
        }

    def append(self, t: float, b: BergmanPoint, emb: EmbeddedPoint) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("trace times must be strictly increasing")
        mu = emb.mu_bar()
        mu0 = hm.trace_free(mu)
        self.times.append(float(t))
        self.points.append(b)
        self.diagnostics["mu0_norm"].append(hm.killing_norm(mu0))
        self.diagnostics["mu_bar_op"].append(hm.op_norm(mu))
        self.diagnostics["beta_sup"].append(float(np.max(np.abs(emb.balancing_potential()))))

    def __len__(self) -> int:
        return len(self.times)

    # -- persistence: metadata + one matrix file per recorded time --------

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        meta = {
            "k": self.k,
            "times": list(self.times),
            "diagnostics": {key: list(v) for key, v in self.diagnostics.items()},
            "n_points": len(self.points),
        }
        with open(os.path.join(directory, "trace.json"), "w") as fh:
            json.dump(meta, fh, sort_keys=True)
        for i, b in enumerate(self.points):
            with open(os.path.join(directory, f"point_{i:05d}.json"), "w") as fh:
                json.dump(b.to_dict(), fh)

    @classmethod
    def load(cls, directory: str) -> "FlowTrace":
        with open(os.path.join(directory, "trace.json")) as fh:
            meta = json.load(fh)
        tr = cls(int(meta["k"]))
        tr.times = [float(t) for t in meta["times"]]
        tr.diagnostics = {key: [float(x) for x in v] for key, v in meta["diagnostics"].items()}
        for i in range(int(meta["n_points"])):
            with open(os.path.join(directory, f"point_{i:05d}.json")) as fh:
                tr.points.append(BergmanPoint.from_dict(json.load(fh)))
        return tr


def flow_tangent(emb: EmbeddedPoint) -> np.ndarray:
    """ON-frame Gram rate of the balancing flow at a point: 2 pi k^2 mu0_bar."""
    return TWO_PI * emb.frame.k**2 * emb.mu_bar_trace_free()


def balancing_flow(
    b0: BergmanPoint,
    frame: SectionFrame,
    dt: float,
    t_final: float,
    t_start: float = 0.0,
    record_every: int = 1,
) -> FlowTrace:
    """First-order geodesic integration of the balancing flow.

    Each step moves along the geodesic generated by the current flow tangent;
    positivity is automatic.  The step is capped so that
    dt * 2 pi k^2 ||mu0||_op <= 0.5, re-evaluated every step, and the
    schedule depends only on the current state, so a trace continued from a
    recorded point reproduces the original run exactly.
    """
    if dt <= 0 or t_final <= t_start:
        raise ValueError("need dt > 0 and t_final > t_start")
    k = b0.k
    trace = FlowTrace(k)
    b = b0
    t = t_start
    step_idx = 0
    emb = EmbeddedPoint(frame, b)
    trace.append(t, b, emb)
    while t < t_final - 1e-14:
        mu0 = emb.mu_bar_trace_free()
        cap = STEP_GUARD / (TWO_PI * k * k * max(hm.op_norm(mu0), 1e-14))
        h = min(dt, cap, t_final - t)
        b = point_move(b, 0.5 * h * TWO_PI * k * k * mu0, 1.0)
        t += h
        step_idx += 1
        emb = EmbeddedPoint(frame, b)
        if step_idx % record_every == 0 or t >= t_final - 1e-14:
            trace.append(t, b, emb)
    return trace


def t_iteration(b0: BergmanPoint, frame: SectionFrame, iters: int) -> FlowTrace:
    """Fixed-point iteration: re-Gram the unit-density fiber metric of b.

    One sweep maps the ON-frame Gram matrix to mu_bar(b), renormalized to
    unit determinant drift so that balanced points are exactly fixed and the
    iterates stay on the same determinant slice the flow preserves.  The
    trace index plays the role of time.
    """
    if iters < 1:
        raise ValueError("need at least one iteration")
    k = b0.k
    trace = FlowTrace(k)
    b = b0
    emb = EmbeddedPoint(frame, b)
    trace.append(0.0, b, emb)
    for i in range(iters):
        mu = emb.mu_bar()
        lam = np.linalg.eigvalsh(mu)
        if lam[0] <= 0:
            raise RuntimeError("moment-map average lost positivity")
        g_new = mu / np.exp(np.mean(np.log(lam)))
        l = b.chol()
        b = BergmanPoint(k, l @ g_new @ l.conj().T)
        emb = EmbeddedPoint(frame, b)
        trace.append(float(i + 1), b, emb)
    return trace


def unitary_gauge(b: BergmanPoint, u: np.ndarray) -> BergmanPoint:
    """Congruence of the Gram matrix by a unitary: H -> U* H U."""
    return BergmanPoint(b.k, u.conj().T @ b.h @ u)


# ---------------------------------------------------------------------------
# The curvature-flow path through the Gram map, and its comparisons.
# ---------------------------------------------------------------------------


def grid_for_degree(k: int, l_extra: int = 8) -> SphereGrid:
    """Quadrature grid sized for degree-k section integrands.

    Polynomial exactness needs n_theta >= k + 2; the analytic factor
    e^{-k psi} and gauged embeddings get a fixed latitude margin, and the
    azimuthal count covers mode differences up to k plus test bandwidth.
    """
    n_theta = k + 28
    n_phi = k + 2 * l_extra + 2
    return SphereGrid(n_theta, max(n_phi, 12))


class CalabiBergmanPath:
    """Gram-map samples of the curvature potential flow at a fixed degree."""

    def __init__(self, times, profiles: list[SymmetricProfile], k: int, grid: SphereGrid):
        self.k = k
        self.grid = grid
        self.times = [float(t) for t in times]
        self.profiles = profiles
        self.metrics = [p.to_kahler(grid) for p in profiles]
        self.frames = [SectionFrame(grid, k, m) for m in self.metrics]
        self.points = [hilb(m, k, f) for m, f in zip(self.metrics, self.frames)]

    def trace(self) -> FlowTrace:
        tr = FlowTrace(self.k)
        t0 = self.times[0]
        for t, b, f in zip(self.times, self.points, self.frames):
            shifted = t - t0 if t > t0 else 0.0
            tr.append(shifted if tr.times else 0.0, b, EmbeddedPoint(f, b))
        return tr

    def path_tangent(self, i: int) -> np.ndarray:
        """ON-frame Gram rate of this path at sample i (analytic formula)."""
        m = self.metrics[i]
        s_dot = m.s_profile - S_BAR
        return gram_rate(m, self.k, s_dot, self.frames[i], self.points[i])

    def bf_tangent(self, i: int) -> np.ndarray:
        """ON-frame Gram rate of the balancing flow through sample i."""
        return flow_tangent(EmbeddedPoint(self.frames[i], self.points[i]))


def calabi_bergman_path(
    profile: SymmetricProfile, k: int, t_final: float, n_samples: int = 9,
    dt: float | None = None, grid: SphereGrid | None = None,
) -> CalabiBergmanPath:
    """Integrate the potential flow and push the samples through the Gram map."""
    if grid is None:
        grid = grid_for_degree(k)
    sample_times = list(np.linspace(0.0, t_final, n_samples))
    times, states = calabi_flow(profile, t_final, dt=dt, sample_times=sample_times)
    return CalabiBergmanPath(times, states, k, grid)


def compare_flows(
    profile: SymmetricProfile, k_list, t_final: float, n_samples: int = 9,
    bf_substeps: int = 40, dt: float | None = None,
) -> dict:
    """Max-over-time rescaled distance between the matrix flow and the Gram path.

    For each degree k: start the balancing flow at the Gram image of the
    initial metric, sample both at shared times, take the max rescaled
    distance, then fit its decay rate in k.
    """
    k_list = sorted(int(k) for k in k_list)
    if dt is None:
        dt = stable_dt(profile)
    sample_times = list(np.linspace(0.0, t_final, n_samples))
    times, states = calabi_flow(profile, t_final, dt=dt, sample_times=sample_times)
    per_k = {}
    for k in k_list:
        grid = grid_for_degree(k)
        path = CalabiBergmanPath(times, states, k, grid)
        frame = path.frames[0]
        b = path.points[0]
        dists = [0.0]
        for i in range(1, len(times)):
            span = times[i] - times[i - 1]
            h = span / bf_substeps
            tr = balancing_flow(b, frame, h, t_final=times[i], t_start=times[i - 1],
                                record_every=bf_substeps)
            b = tr.points[-1]
            dists.append(hm.scaled_distance(b.h, path.points[i].h, k))
        per_k[k] = {"times": times, "distance_scaled": dists, "max_distance": max(dists)}
    slope, intercept, resid = fit_rate([(k, per_k[k]["max_distance"]) for k in k_list])
    return {"per_k": per_k, "slope": slope, "intercept": intercept, "residual": resid}


def potential_convergence(profile_or_metric, k_list, grid: SphereGrid | None = None) -> dict:
    """Sup-norm gap between the balancing potential at the Gram image and S - S_bar."""
    k_list = sorted(int(k) for k in k_list)
    per_k = {}
    for k in k_list:
        g = grid if grid is not None else grid_for_degree(k)
        if isinstance(profile_or_metric, SymmetricProfile):
            metric = profile_or_metric.to_kahler(g)
        elif isinstance(profile_or_metric, KahlerData):
            metric = profile_or_metric if profile_or_metric.grid is g else KahlerData(g, _resample(profile_or_metric, g))
        else:
            raise TypeError("expected a SymmetricProfile or KahlerData")
        frame = SectionFrame(g, k, metric)
        b = hilb(metric, k, frame)
        beta = EmbeddedPoint(frame, b).balancing_potential()
        target = np.repeat(metric.s_profile - S_BAR, g.n_phi)
        per_k[k] = float(np.max(np.abs(beta - target)))
    slope, intercept, resid = fit_rate([(k, max(v, 1e-300)) for k, v in per_k.items()])
    return {
        "sup_gap": per_k, "slope": slope, "intercept": intercept, "residual": resid,
        "s_bar": S_BAR,
    }


def _resample(metric: KahlerData, grid: SphereGrid) -> np.ndarray:
    c = metric.grid.zonal.analyze(metric.psi_profile)
    if grid.lmax + 1 < c.size:
        c = c[: grid.lmax + 1]
    return grid.zonal.p0[: c.size].T @ c
