"""Holomorphic sections of O(k) and the geometry of their embeddings.

The degree-k monomials z^alpha embed the line as a degree-k curve in CP^k;
a positive Hermitian matrix (the L2 Gram matrix of the monomials) fixes an
orthonormal frame and hence an embedding up to unitaries.  This module
computes the L2 Gram map of a metric (``hilb``), its one-sided inverse
(``fs``), the section density ``rho`` and smoothing kernel, the moment-map
matrix mu with its average mu_bar, and the vector-field/derivative identities
that control mu_bar along geodesics of the space of Gram matrices.

Frame and sign conventions (fixed by the identity suite in the tests):

* inner products are conjugate-linear in the second slot, so the Gram
  matrix is H_ab = int s_a conj(s_b) and mu_ab = x_a conj(x_b) / |x|^2;
* the orthonormal frame of H is t = s C with C = L^{-T}, H = L L^dagger
  (Cholesky, lower, positive diagonal);
* ``point_move(b, A, t)`` is the unit-speed geodesic with Gram e^{2tA} in
  the moving orthonormal frame, so distance(b, move(b, A, t)) = t ||A||;
* ``d_mu_bar(b, A)`` differentiates mu_bar along the geodesic with
  ON-frame Gram rate -A, carrying the frame along; with the real
  Fubini-Study pairing of vector fields this makes
  tr(B d_mu_bar(A)) = int (xi_A-perp, xi_B-perp) dV_FS hold with no
  spurious constants.
"""

from __future__ import annotations

import numpy as np

from . import hermitian as hm
from .sphere import TWO_PI, KahlerData, SphereGrid

# Central finite-difference steps accepted by d_mu_bar.
FD_EPS_MIN = 1e-5
FD_EPS_MAX = 1e-2

KERNEL_NODE_GUARD = 4000


class SectionFrame:
    """Weighted evaluations of the monomial sections of O(k) on a grid.

    ``values[p, a]`` is z^a at node p times exp(log_weight/2), where the
    log-weight is -k (log(1+|z|^2) + psi); pairing a row with its conjugate
    therefore gives the pointwise fiber inner products (s_a, s_b).  The
    magnitudes are sin^a(theta/2) cos^{k-a}(theta/2) e^{-k psi / 2}, bounded
    for every k, so no overflow occurs at high degree.
    """

    def __init__(self, grid: SphereGrid, k: int, metric: KahlerData | None = None):
        if k < 1:
            raise ValueError("k must be a positive integer")
        if metric is not None and metric.grid is not grid:
            raise ValueError("metric lives on a different grid")
        self.grid = grid
        self.k = int(k)
        self.dim = self.k + 1
        th = grid.theta2d.ravel()
        ph = grid.phi2d.ravel()
        log_s2 = np.log(np.sin(th / 2.0))
        log_c2 = np.log(np.cos(th / 2.0))
        psi = np.zeros_like(th) if metric is None else np.repeat(metric.psi_profile, grid.n_phi)
        al = np.arange(self.dim)
        # log |z^a e^{lw/2}| = a log sin(th/2) + (k-a) log cos(th/2) - k psi/2
        logmag = al[None, :] * log_s2[:, None] + (self.k - al)[None, :] * log_c2[:, None]
        self.values = np.exp(logmag - 0.5 * self.k * psi[:, None] + 1j * al[None, :] * ph[:, None])
        self.deriv = np.zeros_like(self.values)
        lm1 = (al[1:] - 1)[None, :] * log_s2[:, None] + (self.k - al[1:] + 1)[None, :] * log_c2[:, None]
        self.deriv[:, 1:] = al[1:][None, :] * np.exp(
            lm1 - 0.5 * self.k * psi[:, None] + 1j * (al[1:] - 1)[None, :] * ph[:, None]
        )
        self.log_weight = -self.k * (np.log1p(grid.r**2)[:, None] * np.ones(grid.n_phi)).ravel() - self.k * psi
        self.metric = metric

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]


class BergmanPoint:
    """Inner product on the degree-k sections, as a Gram matrix of monomials."""

    def __init__(self, k: int, h: np.ndarray):
        self.k = int(k)
        self.h = hm.check_positive(h)
        if self.h.shape[0] != self.k + 1:
            raise ValueError("Gram matrix must have size k+1")
        self.dim = self.k + 1
        self._chol: np.ndarray | None = None

    def chol(self) -> np.ndarray:
        if self._chol is None:
            self._chol = np.linalg.cholesky(self.h)
        return self._chol

    def on_transform(self) -> np.ndarray:
        """Coefficients C of the orthonormal frame t = s C (C = L^{-T})."""
        return np.linalg.inv(self.chol()).T

    def to_dict(self) -> dict:
        return {"k": self.k, "matrix": hm.matrix_to_dict(self.h)}

    @classmethod
    def from_dict(cls, d: dict) -> "BergmanPoint":
        return cls(int(d["k"]), hm.matrix_from_dict(d["matrix"]))


def point_move(b: BergmanPoint, a: np.ndarray, t: float) -> BergmanPoint:
    """Unit-speed geodesic from b generated by the Hermitian direction a.

    The Gram matrix in the moving orthonormal frame is e^{2 t a}, so the
    distance travelled is exactly t ||a||.
    """
    a = hm.check_hermitian(a)
    if a.shape[0] != b.dim:
        raise ValueError("direction has wrong dimension")
    l = b.chol()
    return BergmanPoint(b.k, l @ hm.herm_exp(2.0 * t * a) @ l.conj().T)


class EmbeddedPoint:
    """Pointwise geometry of the embedding attached to a Bergman point.

    All quantities are ratios of frame values, so they do not depend on the
    potential used to weight the frame.  ``nu`` is the density of the
    pulled-back Fubini-Study volume against the round form (total mass k,
    the degree of the curve).
    """

    def __init__(self, frame: SectionFrame, b: BergmanPoint, frame_transform: np.ndarray | None = None):
        if frame.dim != b.dim:
            raise ValueError("frame and point have different section counts")
        c = b.on_transform() if frame_transform is None else frame_transform
        self.frame = frame
        self.point = b
        self.u = frame.values @ c
        self.u1 = frame.deriv @ c
        self.n2 = np.einsum("pa,pa->p", self.u, np.conj(self.u)).real
        if np.min(self.n2) <= 0.0:
            raise RuntimeError("sections vanish simultaneously at a node")
        uu = np.einsum("pa,pa->p", self.u1, np.conj(self.u1)).real
        cross = np.abs(np.einsum("pa,pa->p", self.u1, np.conj(self.u))) ** 2
        g_chart = (uu * self.n2 - cross) / self.n2**2
        r2 = (np.tan(frame.grid.theta2d / 2.0) ** 2).ravel()
        self.nu = g_chart * (1.0 + r2) ** 2
        self.w_fs = frame.grid.weights.ravel() * self.nu

    # -- moment map ------------------------------------------------------

    def mu_point(self, node: int) -> np.ndarray:
        """Rank-one trace-1 projector mu at one node, in the ON frame."""
        u = self.u[node]
        return np.outer(u, np.conj(u)) / self.n2[node]

    def mu_bar(self) -> np.ndarray:
        """Average of mu against the pulled-back Fubini-Study volume."""
        return np.einsum("p,pa,pb->ab", self.w_fs / self.n2, self.u, np.conj(self.u))

    def mu_bar_trace_free(self) -> np.ndarray:
        return hm.trace_free(self.mu_bar())

    # -- potentials -------------------------------------------------------

    def h_samples(self, a: np.ndarray) -> np.ndarray:
        """tr(a mu) at every node (real)."""
        return np.einsum("pa,ab,pb->p", np.conj(self.u), a, self.u).real / self.n2

    def tr2_samples(self, a: np.ndarray, bmat: np.ndarray) -> np.ndarray:
        """tr(a b mu) at every node (complex)."""
        return np.einsum("pa,ab,bc,pc->p", np.conj(self.u), a, bmat, self.u) / self.n2

    def fs_log_weight(self) -> np.ndarray:
        """Log-weight of the fiber metric with unit section density.

        For the balanced round point this is the round log-weight shifted by
        -log(k+1).
        """
        return self.frame.log_weight - np.log(self.n2)

    def balancing_potential(self) -> np.ndarray:
        """-2 pi k tr(mu0_bar mu) sampled on the grid."""
        return -TWO_PI * self.frame.k * self.h_samples(self.mu_bar_trace_free())

    # -- vector fields -----------------------------------------------------

    def _pair_herm(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hermitian Fubini-Study pairing of ambient representatives."""
        ip = np.einsum("pa,pa->p", np.conj(u), v)
        pu = np.einsum("pa,pa->p", np.conj(u), self.u)
        pv = np.einsum("pa,pa->p", np.conj(self.u), v)
        return (ip * self.n2 - pu * pv) / self.n2**2

    def xi_ambient(self, a: np.ndarray) -> np.ndarray:
        """Ambient representative of the vector field of a at each node."""
        return self.u @ a.T

    def xi_products(self, a: np.ndarray, bmat: np.ndarray | None = None) -> dict:
        """Fubini-Study products of the fields of a and b along the curve.

        Returns the full, tangential and normal products, both as Hermitian
        (complex) pairings and as the real Riemannian pairing (their real
        part).  full = tan + perp holds exactly by construction; the content
        is in the identities they satisfy against mu and d(mu_bar).
        """
        if bmat is None:
            bmat = a
        xa, xb = self.xi_ambient(a), self.xi_ambient(bmat)
        full = self._pair_herm(xa, xb)
        tt = self._pair_herm(self.u1, self.u1).real
        tan = self._pair_herm(xa, self.u1) * self._pair_herm(self.u1, xb) / tt
        perp = full - tan
        return {
            "full": full.real, "tan": tan.real, "perp": perp.real,
            "full_herm": full, "tan_herm": tan, "perp_herm": perp,
        }

    def l21_inner(self, a: np.ndarray, bmat: np.ndarray | None = None) -> float:
        """First-order inner product int (H_a H_b + (grad H_a, grad H_b)) dV_FS."""
        if bmat is None:
            bmat = a
        prods = self.xi_products(a, bmat)
        vals = self.h_samples(a) * self.h_samples(bmat) + prods["tan"]
        return float(np.sum(self.w_fs * vals))


def hilb(metric: KahlerData, k: int, frame: SectionFrame | None = None) -> BergmanPoint:
    """L2 Gram matrix of the monomial sections for a metric and its volume.

    The grid must integrate degree-2k integrands exactly; with the
    Gauss-Legendre x uniform grid this needs n_theta >= k + 2 and
    n_phi >= k + 1 (plus margin for the analytic weight e^{-k psi}).
    """
    if frame is None:
        frame = SectionFrame(metric.grid, k, metric)
    w = metric.weights.ravel()
    v = frame.values
    gram = (v.T * w) @ np.conj(v)
    gram = hm.hermitian_part(gram)
    lam = np.linalg.eigvalsh(gram)
    if lam[0] <= 0 or lam[0] < 1e-15 * lam[-1]:
        raise RuntimeError("Gram matrix is numerically rank deficient; refine the grid")
    return BergmanPoint(k, gram)


def fs(b: BergmanPoint, frame: SectionFrame) -> np.ndarray:
    """Fiber-metric log-weight with unit section density for b's frame."""
    return EmbeddedPoint(frame, b).fs_log_weight()


def rho(metric: KahlerData, k: int, frame: SectionFrame | None = None) -> np.ndarray:
    """Section density sum |t_a|^2 of the L2-orthonormal frame (2-D samples).

    Integrates to k+1 against the metric volume; identically k+1 exactly
    when the metric is balanced at degree k (the round metric).
    """
    if frame is None:
        frame = SectionFrame(metric.grid, k, metric)
    emb = EmbeddedPoint(frame, hilb(metric, k, frame))
    return metric.grid.unflat(emb.n2)


def tian_density(metric: KahlerData, k: int) -> np.ndarray:
    """Density of the algebraic approximation (pullback FS / k) vs the round form."""
    frame = SectionFrame(metric.grid, k, metric)
    emb = EmbeddedPoint(frame, hilb(metric, k, frame))
    return metric.grid.unflat(emb.nu / k)


def bergman_kernel(metric: KahlerData, k: int) -> np.ndarray:
    """Node-by-node kernel |B_k(p,q)|^2 / k (n = 1), symmetric and >= 0."""
    n_nodes = metric.grid.n_nodes
    if n_nodes > KERNEL_NODE_GUARD:
        raise MemoryError(f"kernel matrix limited to {KERNEL_NODE_GUARD} nodes, got {n_nodes}")
    frame = SectionFrame(metric.grid, k, metric)
    emb = EmbeddedPoint(frame, hilb(metric, k, frame))
    bmat = emb.u @ emb.u.conj().T
    return (np.abs(bmat) ** 2) / k


def qk_apply(metric: KahlerData, k: int, f: np.ndarray, frame: SectionFrame | None = None) -> np.ndarray:
    """Smoothing operator: integrate the kernel against f and the metric volume.

    Factored through the section frame (cost n (k+1)^2, no node-by-node
    matrix), exactly equal to integrating ``bergman_kernel`` rows.
    """
    if frame is None:
        frame = SectionFrame(metric.grid, k, metric)
    emb = EmbeddedPoint(frame, hilb(metric, k, frame))
    wf = metric.weights.ravel() * np.asarray(f, dtype=float).ravel()
    c = np.einsum("q,qa,qb->ab", wf, np.conj(emb.u), emb.u)
    out = np.einsum("pa,ab,pb->p", emb.u, c, np.conj(emb.u)).real / k
    return metric.grid.unflat(out)


def mu_bar(b: BergmanPoint, frame: SectionFrame) -> np.ndarray:
    return EmbeddedPoint(frame, b).mu_bar()


def h_a(b: BergmanPoint, frame: SectionFrame, a: np.ndarray) -> np.ndarray:
    """Potential tr(a mu) of the vector field of a, sampled along the curve."""
    return EmbeddedPoint(frame, b).h_samples(hm.check_hermitian(a))


def xi_decompose(b: BergmanPoint, frame: SectionFrame, a: np.ndarray, bmat: np.ndarray | None = None) -> dict:
    """Tangential/normal Fubini-Study products of the fields of a (and b)."""
    return EmbeddedPoint(frame, b).xi_products(
        hm.check_hermitian(a), None if bmat is None else hm.check_hermitian(bmat)
    )


def d_mu_bar(b: BergmanPoint, frame: SectionFrame, a: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Derivative of mu_bar along the geodesic with ON-frame Gram rate -a.

    Central differences with one Richardson step; the orthonormal frame is
    parallel-transported (t_eps = t_0 e^{eps a^T / 2}), which is what makes
    the derivative well defined rather than gauge-dependent.
    """
    a = hm.check_hermitian(a)
    if not FD_EPS_MIN <= eps <= FD_EPS_MAX:
        raise ValueError(f"eps must lie in [{FD_EPS_MIN}, {FD_EPS_MAX}]")
    c0 = b.on_transform()

    def mu_at(e: float) -> np.ndarray:
        ce = c0 @ hm.herm_exp(0.5 * e * a.T)
        be = point_move(b, -0.5 * a, e)
        return EmbeddedPoint(frame, be, frame_transform=ce).mu_bar()

    d1 = (mu_at(eps) - mu_at(-eps)) / (2.0 * eps)
    d2 = (mu_at(0.5 * eps) - mu_at(-0.5 * eps)) / eps
    return hm.hermitian_part((4.0 * d2 - d1) / 3.0)


def balancing_potential(b: BergmanPoint, frame: SectionFrame) -> np.ndarray:
    """-2 pi k tr(mu0_bar mu) as 2-D samples on the frame's grid."""
    emb = EmbeddedPoint(frame, b)
    return frame.grid.unflat(emb.balancing_potential())


def gram_rate(metric: KahlerData, k: int, psi_dot: np.ndarray, frame: SectionFrame | None = None,
              b: BergmanPoint | None = None) -> np.ndarray:
    """ON-frame Gram rate of the L2 inner product under a potential motion.

    If the potential evolves by d(psi)/dt = psi_dot (zonal profile), the Gram
    matrix of the instantaneous orthonormal frame moves at
    -[ k A_{psi_dot} + A_{lap psi_dot} / (4 pi) ], with A_f the matrix of
    multiplication by f compressed to the sections.
    """
    if frame is None:
        frame = SectionFrame(metric.grid, k, metric)
    if b is None:
        b = hilb(metric, k, frame)
    emb = EmbeddedPoint(frame, b)
    w = metric.weights.ravel()
    f_fib = np.repeat(psi_dot, metric.grid.n_phi)
    f_vol = np.repeat(metric.grid.zonal.lap(psi_dot) / metric.sigma_profile, metric.grid.n_phi)
    a_fib = np.einsum("p,pa,pb->ab", w * f_fib, np.conj(emb.u), emb.u)
    a_vol = np.einsum("p,pa,pb->ab", w * f_vol, np.conj(emb.u), emb.u)
    return hm.hermitian_part(-(k * a_fib + a_vol / (2.0 * TWO_PI)))


def compression_matrix(metric: KahlerData, k: int, f: np.ndarray,
                       frame: SectionFrame | None = None,
                       b: BergmanPoint | None = None) -> np.ndarray:
    """Matrix A_f of multiplication by f compressed to the holomorphic sections.

    Its operator norm is bounded by sup |f| (multiplication followed by
    orthogonal projection).
    """
    if frame is None:
        frame = SectionFrame(metric.grid, k, metric)
    if b is None:
        b = hilb(metric, k, frame)
    emb = EmbeddedPoint(frame, b)
    w = metric.weights.ravel() * np.asarray(f, dtype=float).ravel()
    return hm.hermitian_part(np.einsum("p,pa,pb->ab", w, np.conj(emb.u), emb.u))
