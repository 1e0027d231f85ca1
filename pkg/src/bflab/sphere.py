"""Geometry of the projective line with its unit-area round metric.

Grids are Gauss-Legendre in cos(theta) tensored with a uniform phi grid, so
integrals of band-limited integrands are exact and all spectral operations
(Laplacian, heat semigroup, gradients) reduce to associated-Legendre
transforms per azimuthal mode.

Conventions, fixed once and used everywhere:

* volume forms are normalized so the round metric has total area 1;
* the Laplacian is positive, with eigenvalue ``4 pi l (l+1)`` on degree-l
  spherical harmonics of the round metric;
* a metric in the fixed Kahler class is described by a zonal relative
  potential ``psi``; its area density against the round form is exactly
  ``sigma = 1 - lap_round(psi) / (4 pi)``;
* scalar curvature is normalized so the round metric has S = 2 pi (half the
  Gaussian curvature), hence mean value S_bar = 2 pi for every metric.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh
from scipy.special import roots_legendre

TWO_PI = 2.0 * np.pi
S_BAR = TWO_PI  # mean scalar curvature in this normalization


class MetricPositivityError(ValueError):
    """The relative potential does not define a positive metric."""


def legendre_rows(lmax: int, m: int, x: np.ndarray) -> np.ndarray:
    """Normalized associated Legendre functions P~_l^m(x) for l = 0..lmax.

    Rows are orthonormal on [-1, 1]: integral of P~_l^m * P~_l'^m dx equals
    delta_{l l'}.  Rows with l < m are zero.  Uses the standard stable
    three-term recurrence (no factorial overflow).
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((lmax + 1, x.size))
    if m > lmax:
        return out
    sx = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    # Seed P~_m^m.
    pmm = np.full_like(x, np.sqrt(0.5))
    for mu in range(1, m + 1):
        pmm = -np.sqrt((2 * mu + 1) / (2.0 * mu)) * sx * pmm
    out[m] = pmm
    if m + 1 <= lmax:
        out[m + 1] = np.sqrt(2 * m + 3.0) * x * pmm
    for l in range(m + 2, lmax + 1):
        a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[l] = a * (x * out[l - 1] - b * out[l - 2])
    return out


def legendre_theta_deriv_rows(lmax: int, m: int, x: np.ndarray) -> np.ndarray:
    """d/d(theta) of the normalized P~_l^m(cos theta) at x = cos theta."""
    p = legendre_rows(lmax, m, x)
    sx = np.sqrt(np.maximum(1.0 - x * x, 1e-300))
    out = np.zeros_like(p)
    for l in range(m, lmax + 1):
        term = l * x * p[l]
        if l - 1 >= m:
            e = np.sqrt((l * l - m * m) * (2.0 * l + 1.0) / (2.0 * l - 1.0))
            term = term - e * p[l - 1]
        # (1 - x^2) dP/dx = l x P_l - e_l P_{l-1};  d/dtheta = -sin(theta) d/dx
        out[l] = -term / sx
    return out


class ZonalBasis:
    """Gauss-Legendre collocation in x = cos(theta) with Legendre transforms.

    Used both as the latitude factor of the 2-D sphere grid and as the 1-D
    discretization of rotation-invariant fields.
    """

    def __init__(self, n_nodes: int):
        if n_nodes < 4:
            raise ValueError("need at least 4 latitude nodes")
        x, w = roots_legendre(n_nodes)
        self.n_nodes = n_nodes
        self.x = x  # ascending, poles excluded
        self.w = w  # sums to 2
        self.theta = np.arccos(x)
        self.sin_theta = np.sqrt(1.0 - x * x)
        self.lmax = n_nodes - 1
        self.p0 = legendre_rows(self.lmax, 0, x)
        self.dp0 = legendre_theta_deriv_rows(self.lmax, 0, x)
        self.ell = np.arange(self.lmax + 1)
        self.lap_eigs = 2.0 * TWO_PI * self.ell * (self.ell + 1.0)

    def analyze(self, f: np.ndarray) -> np.ndarray:
        """Legendre coefficients of nodal samples f(theta_i)."""
        return self.p0 @ (self.w * f)

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        return self.p0.T @ c

    def lap(self, f: np.ndarray) -> np.ndarray:
        """Positive round Laplacian of a zonal field."""
        return self.p0.T @ (self.lap_eigs * self.analyze(f))

    def dtheta(self, f: np.ndarray) -> np.ndarray:
        return self.dp0.T @ self.analyze(f)

    def integrate_round(self, f: np.ndarray) -> float:
        """Integral against the unit-area round form (zonal integrand)."""
        return 0.5 * float(np.dot(self.w, f))


def zonal_density(basis: ZonalBasis, psi: np.ndarray) -> np.ndarray:
    """Area density sigma = 1 - lap(psi)/(4 pi) of the metric with potential psi."""
    return 1.0 - basis.lap(psi) / (2.0 * TWO_PI)


def zonal_scalar_curvature(basis: ZonalBasis, sigma: np.ndarray) -> np.ndarray:
    """Scalar curvature from the density: (2 pi + lap(log sigma)/4) / sigma."""
    if np.min(sigma) <= 0.0:
        raise MetricPositivityError(
            f"metric density is not positive (min = {np.min(sigma):.4g})"
        )
    return (S_BAR + 0.25 * basis.lap(np.log(sigma))) / sigma


class SphereGrid:
    """Tensor quadrature grid on the sphere with spherical-harmonic transforms.

    Latitude: ``n_theta`` Gauss-Legendre nodes in cos(theta); longitude:
    ``n_phi`` uniform nodes.  Fields are arrays of shape (n_theta, n_phi).
    The chart coordinate is z = tan(theta/2) e^{i phi}; poles are excluded.
    """

    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 8 or n_phi < 8:
            raise ValueError("grid too small: need n_theta >= 8 and n_phi >= 8")
        self.n_theta = n_theta
        self.n_phi = n_phi
        self.zonal = ZonalBasis(n_theta)
        self.theta = self.zonal.theta
        self.phi = TWO_PI * np.arange(n_phi) / n_phi
        self.lmax = self.zonal.lmax
        self.exactness_degree = 2 * n_theta - 1
        # FFT-ordered integer wavenumbers.
        self.m_values = np.fft.fftfreq(n_phi, 1.0 / n_phi).astype(int)
        self._plm: dict[int, np.ndarray] = {0: self.zonal.p0}
        self._dplm: dict[int, np.ndarray] = {0: self.zonal.dp0}
        # Round quadrature weights (2-D), summing to the total round area 1.
        self.weights = np.outer(self.zonal.w / (2.0 * n_phi), np.ones(n_phi))
        # Chart data.
        self.r = np.tan(self.theta / 2.0)
        th2d, ph2d = np.meshgrid(self.theta, self.phi, indexing="ij")
        self.theta2d = th2d
        self.phi2d = ph2d
        self.z = np.tan(th2d / 2.0) * np.exp(1j * ph2d)

    # -- associated Legendre caches -------------------------------------

    def plm(self, m: int) -> np.ndarray:
        m = abs(int(m))
        if m not in self._plm:
            self._plm[m] = legendre_rows(self.lmax, m, self.zonal.x)
        return self._plm[m]

    def dplm(self, m: int) -> np.ndarray:
        m = abs(int(m))
        if m not in self._dplm:
            self._dplm[m] = legendre_theta_deriv_rows(self.lmax, m, self.zonal.x)
        return self._dplm[m]

    # -- transforms ------------------------------------------------------

    def fourier(self, f: np.ndarray) -> np.ndarray:
        """Azimuthal Fourier coefficients f_m(theta): f = sum_m f_m e^{i m phi}."""
        return np.fft.fft(np.asarray(f, dtype=complex), axis=1) / self.n_phi

    def unfourier(self, fm: np.ndarray) -> np.ndarray:
        return np.fft.ifft(fm * self.n_phi, axis=1)

    def analyze(self, f: np.ndarray) -> np.ndarray:
        """Spherical-harmonic analysis; coefficients indexed (l, fft-m)."""
        fm = self.fourier(f)
        out = np.zeros((self.lmax + 1, self.n_phi), dtype=complex)
        for mi, m in enumerate(self.m_values):
            out[:, mi] = self.plm(m) @ (self.zonal.w * fm[:, mi])
        return out

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        fm = np.zeros((self.n_theta, self.n_phi), dtype=complex)
        for mi, m in enumerate(self.m_values):
            fm[:, mi] = self.plm(m).T @ c[:, mi]
        return self.unfourier(fm)

    def project(self, f: np.ndarray) -> np.ndarray:
        """Band-limit projection (identity on resolved smooth fields)."""
        out = self.synthesize(self.analyze(f))
        return out.real if np.isrealobj(f) else out

    def lap_round(self, f: np.ndarray) -> np.ndarray:
        """Positive Laplacian of the unit-area round metric."""
        c = self.analyze(f)
        out = self.synthesize(self.zonal.lap_eigs[:, None] * c)
        return out.real if np.isrealobj(f) else out

    def grad_round_sq(self, f: np.ndarray) -> np.ndarray:
        """|grad f|^2 for the unit-area round metric.

        Computed spectrally as 4 pi [ (d_theta f)^2 + (d_phi f / sin theta)^2 ].
        """
        c = self.analyze(f)
        fm_th = np.zeros((self.n_theta, self.n_phi), dtype=complex)
        for mi, m in enumerate(self.m_values):
            fm_th[:, mi] = self.dplm(m).T @ c[:, mi]
        f_th = self.unfourier(fm_th)
        fm = self.fourier(self.project(f))
        f_ph = self.unfourier(1j * self.m_values[None, :] * fm)
        f_ph = f_ph / self.zonal.sin_theta[:, None]
        g = 2.0 * TWO_PI * (np.abs(f_th) ** 2 + np.abs(f_ph) ** 2)
        return g.real

    # -- harmonics and integrals ------------------------------------------

    def harmonic(self, l: int, m: int = 0) -> np.ndarray:
        """Round-L2-orthonormal harmonic sqrt(2) P~_l^m(cos theta) e^{i m phi}.

        Real-valued for m = 0; eigenfunction of lap_round with eigenvalue
        4 pi l (l+1).
        """
        if not 0 <= abs(m) <= l <= self.lmax:
            raise ValueError("need 0 <= |m| <= l <= lmax")
        prow = self.plm(m)[l]
        fld = np.sqrt(2.0) * np.outer(prow, np.exp(1j * m * self.phi))
        return fld.real if m == 0 else fld

    def integrate_round(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * np.asarray(f).real))

    def flat(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f).reshape(self.n_theta * self.n_phi)

    def unflat(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v).reshape(self.n_theta, self.n_phi)

    @property
    def n_nodes(self) -> int:
        return self.n_theta * self.n_phi

    def spec(self) -> dict:
        return {"n_theta": self.n_theta, "n_phi": self.n_phi}

    @classmethod
    def from_spec(cls, spec: dict) -> "SphereGrid":
        return cls(int(spec["n_theta"]), int(spec["n_phi"]))


def build_grid(n_theta: int, n_phi: int) -> SphereGrid:
    """Gauss-Legendre x uniform-phi quadrature grid (round weights)."""
    return SphereGrid(n_theta, n_phi)


def integrate(f: np.ndarray, weights: np.ndarray) -> float:
    """Plain weighted sum; weight array fixes the volume form."""
    f = np.asarray(f)
    w = np.asarray(weights)
    if f.shape != w.shape:
        raise ValueError(f"sample shape {f.shape} does not match weights {w.shape}")
    return float(np.sum(w * f))


class KahlerData:
    """A metric in the fixed class, given by a zonal relative potential.

    Carries the grid, the potential profile psi(theta), the density sigma,
    scalar curvature samples, and (lazily) the per-azimuthal-mode spectral
    data of its Laplacian used for the heat semigroup.
    """

    def __init__(self, grid: SphereGrid, psi_profile: np.ndarray | None = None):
        self.grid = grid
        zb = grid.zonal
        if psi_profile is None:
            psi_profile = np.zeros(grid.n_theta)
        psi_profile = np.asarray(psi_profile, dtype=float)
        if psi_profile.shape != (grid.n_theta,):
            raise ValueError("psi profile must have one sample per latitude node")
        self.psi_profile = psi_profile
        self.sigma_profile = zonal_density(zb, psi_profile)
        if np.min(self.sigma_profile) <= 0.0:
            raise MetricPositivityError(
                f"relative potential gives non-positive density "
                f"(min sigma = {np.min(self.sigma_profile):.4g})"
            )
        self.s_profile = zonal_scalar_curvature(zb, self.sigma_profile)
        self._heat_blocks: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- constructors ------------------------------------------------------

    @classmethod
    def round(cls, grid: SphereGrid) -> "KahlerData":
        return cls(grid, None)

    @classmethod
    def from_legendre(cls, grid: SphereGrid, coeffs: dict[int, float] | None) -> "KahlerData":
        """Potential psi = sum_l c_l P_l(cos theta) (plain Legendre polynomials)."""
        psi = np.zeros(grid.n_theta)
        if coeffs:
            for l, c in coeffs.items():
                l = int(l)
                if l > grid.lmax:
                    raise ValueError(f"Legendre degree {l} exceeds grid band limit")
                # plain P_l = P~_l / sqrt(l + 1/2)
                psi += float(c) * grid.zonal.p0[l] / np.sqrt(l + 0.5)
        return cls(grid, psi)

    # -- samples -----------------------------------------------------------

    @property
    def rel_potential(self) -> np.ndarray:
        return np.broadcast_to(self.psi_profile[:, None], self.grid.z.shape)

    @property
    def density(self) -> np.ndarray:
        return np.broadcast_to(self.sigma_profile[:, None], self.grid.z.shape)

    @property
    def scalar_curvature(self) -> np.ndarray:
        return np.broadcast_to(self.s_profile[:, None], self.grid.z.shape)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for the metric volume form (total mass 1)."""
        return self.grid.weights * self.density

    def is_round(self) -> bool:
        return bool(np.all(self.psi_profile == 0.0))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * np.asarray(f).real))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.sum(self.weights * np.conj(f) * g))

    def norm_l2(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(f) ** 2)))

    # -- differential operators ---------------------------------------------

    def laplacian_apply(self, f: np.ndarray) -> np.ndarray:
        """Positive Laplacian of this metric: sigma^{-1} lap_round(f)."""
        return self.grid.lap_round(f) / self.density

    def grad_sq(self, f: np.ndarray) -> np.ndarray:
        """|grad f|^2 in this metric (conformal scaling of the round one)."""
        return self.grid.grad_round_sq(f) / self.density

    def linearized_scalar_curvature(self, eta: np.ndarray) -> np.ndarray:
        """Derivative of the curvature map at this metric in direction eta.

        If the potential is perturbed to psi + eps * eta then the curvature
        samples move by eps * L(eta) + O(eps^2).
        """
        g = self.grid
        sig = self.density
        dsig = -g.lap_round(eta) / (2.0 * TWO_PI)
        s = self.scalar_curvature
        return (0.25 * g.lap_round(dsig / sig) - s * dsig) / sig

    # -- heat semigroup ------------------------------------------------------

    def _heat_block(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        m = abs(int(m))
        if m not in self._heat_blocks:
            g = self.grid
            p = g.plm(m)
            wt = g.zonal.w
            a = (p * wt).T @ (self.grid.zonal.lap_eigs[:, None] * (p * wt))
            b = np.diag(wt * self.sigma_profile)
            lam, vec = eigh(a, b)
            lam = np.where(np.abs(lam) < 1e-9, 0.0, lam)
            if np.min(lam) < -1e-8:
                raise RuntimeError("Laplacian block has a significantly negative mode")
            self._heat_blocks[m] = (lam, vec)
        return self._heat_blocks[m]

    def heat_semigroup(self, s: float, f: np.ndarray) -> np.ndarray:
        """exp(-s Delta) f by eigenfunction expansion, one azimuthal mode at a time."""
        if s < 0:
            raise ValueError("heat time must be nonnegative")
        g = self.grid
        fm = g.fourier(f)
        out = np.zeros_like(fm)
        bw = g.zonal.w * self.sigma_profile
        for mi, m in enumerate(g.m_values):
            lam, vec = self._heat_block(m)
            coef = vec.T @ (bw * fm[:, mi])
            out[:, mi] = vec @ (np.exp(-s * np.maximum(lam, 0.0)) * coef)
        res = g.unfourier(out)
        return res.real if np.isrealobj(f) else res

    def eigenpairs(self, count: int, m: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """First eigenvalues/eigenvectors of the Laplacian in one azimuthal mode.

        Returns (lam, profiles) with profiles[:, j] the theta-profile of the
        j-th eigenfunction, orthonormal for the metric volume.
        """
        lam, vec = self._heat_block(m)
        count = min(count, lam.size)
        return lam[:count], vec[:, :count]

    def laplacian_matrix(self) -> np.ndarray:
        """Dense nodal operator matrix of the positive Laplacian.

        Self-adjoint for the metric inner product (weights * density); only
        intended for small grids.
        """
        g = self.grid
        if g.n_nodes > 3200:
            raise MemoryError("dense Laplacian matrix limited to grids <= 3200 nodes")
        blocks = np.zeros((g.n_phi, g.n_theta, g.n_theta))
        for mi, m in enumerate(g.m_values):
            p = g.plm(m)
            blocks[mi] = p.T @ (g.zonal.lap_eigs[:, None] * (p * g.zonal.w))
        # Inverse DFT over the mode index gives the phi-difference kernel.
        kern = np.fft.ifft(blocks, axis=0)
        dj = (np.arange(g.n_phi)[:, None] - np.arange(g.n_phi)[None, :]) % g.n_phi
        big = kern[dj]  # (n_phi, n_phi, n_theta, n_theta)
        big = np.transpose(big, (2, 0, 3, 1)).reshape(g.n_nodes, g.n_nodes)
        if np.max(np.abs(big.imag)) > 1e-9:
            raise RuntimeError("round Laplacian kernel should be real")
        return big.real / np.repeat(self.sigma_profile, g.n_phi)[:, None]

    # -- persistence -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "grid_spec": self.grid.spec(),
            "rel_potential": [float(v) for v in self.psi_profile],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KahlerData":
        grid = SphereGrid.from_spec(d["grid_spec"])
        return cls(grid, np.asarray(d["rel_potential"], dtype=float))


def scalar_curvature(m: KahlerData) -> np.ndarray:
    """Scalar curvature samples of a metric (mean value 2 pi)."""
    return m.scalar_curvature
