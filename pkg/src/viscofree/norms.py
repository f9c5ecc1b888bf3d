"""Discrete Sobolev norms on the reference strip and scaling checks.

Spatial norms live on the logical rectangle ``[0, Lx) x [0, Ly]``: spectral
in the periodic direction, finite differences across the depth, fractional
orders by geometric interpolation between neighbouring integer orders.
Temporal norms on ``(0, T)`` use the Gagliardo double sum with a diagonal
correction; a reflection-based spectral variant is available for
trajectories that vanish at ``t = 0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .geometry import wavenumbers, xi_from_eta

SPATIAL, TEMPORAL, KCOMPOSITE, SURFACEK = "SpatialH", "TemporalH", "KComposite", "SurfaceK"


@dataclass(frozen=True)
class NormSpec:
    s_space: float = 0.0
    s_time: float = 0.0
    kind: str = KCOMPOSITE

    def __post_init__(self):
        if not (np.isfinite(self.s_space) and np.isfinite(self.s_time)):
            raise ValueError("norm exponents must be finite")
        if self.s_space < 0 or self.s_time < 0:
            raise ValueError("norm exponents must be >= 0")
        if self.kind not in (SPATIAL, TEMPORAL, KCOMPOSITE, SURFACEK):
            raise ValueError(f"unknown norm kind {self.kind!r}")

    def __call__(self, traj: "SampledTrajectory") -> float:
        if self.kind == SPATIAL:
            return l2_time_norm(traj, self.s_space)
        if self.kind == TEMPORAL:
            return temporal_norm(traj, self.s_time, s_space=self.s_space)
        return k_norm(traj, self.s_space)


@dataclass
class SampledTrajectory:
    """Samples ``values[n, ...]`` at ``t_n = n * dt``.

    The last axis is the periodic X1 direction of length ``Lx``; if ``Ly`` is
    given the axis before it spans the depth ``[0, Ly]``. Remaining middle
    axes are components and are summed in every norm.
    """
    values: np.ndarray
    dt: float
    Lx: float = 2 * np.pi
    Ly: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_mesh(cls, values, dt, mesh):
        return cls(values, dt, mesh.profile.period, float(np.mean(mesh.profile.height)))

    @property
    def T(self):
        return self.dt * (self.values.shape[0] - 1)

    @property
    def times(self):
        return self.dt * np.arange(self.values.shape[0])

    def scaled(self, c):
        return SampledTrajectory(c * self.values, self.dt, self.Lx, self.Ly)


# ---------------------------------------------------------------------------
# spatial

def _integer_sq(f, m, Lx, Ly, keep):
    """Squared integer-order norm; sums all axes except the leading ``keep``."""
    nx = f.shape[-1]
    k = wavenumbers(nx, Lx)
    fh = np.fft.fft(f, axis=-1) / nx
    # Parseval: (1/Lx) int |f|^2 dx = sum |fh|^2
    sym = 1.0 + k ** 2
    if Ly is None:
        dens = Lx * np.sum(sym ** m * np.abs(fh) ** 2, axis=-1)
    else:
        nz = f.shape[-2]
        dy = Ly / (nz - 1)
        w = np.full(nz, dy)
        w[0] = w[-1] = dy / 2
        dens = 0.0
        d = fh
        for j in range(int(m) + 1):
            if j > 0:
                d = np.gradient(d, dy, axis=-2, edge_order=2)
            e = Lx * np.sum(sym ** (m - j) * np.abs(d) ** 2, axis=-1)
            dens = dens + np.tensordot(e, w, axes=([-1], [0]))
    axes = tuple(range(keep, dens.ndim))
    return np.sum(dens, axis=axes) if axes else dens


def _spatial(f, s, Lx, Ly, keep=0):
    f = np.asarray(f, dtype=float)
    if Ly is None:
        return np.sqrt(_integer_sq(f, s, Lx, None, keep))
    lo = math.floor(s)
    th = s - lo
    nlo = np.sqrt(_integer_sq(f, lo, Lx, Ly, keep))
    if th == 0:
        return nlo
    nhi = np.sqrt(_integer_sq(f, lo + 1, Lx, Ly, keep))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = nlo ** (1 - th) * nhi ** th
    return np.where(nlo == 0, 0.0, out)


def spatial_norm(field, s, Lx=2 * np.pi, Ly=None) -> float:
    """H^s norm of a field sampled on the reference strip (all leading axes summed).

    With ``Ly=None`` the field is one-dimensional along the periodic direction
    and the spectral symbol is used for every ``s``.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    return float(_spatial(field, s, Lx, Ly))


# ---------------------------------------------------------------------------
# temporal

def _trap_weights(n, dt):
    w = np.full(n, dt)
    if n > 1:
        w[0] = w[-1] = dt / 2
    return w


def _gagliardo_sq(vals, dt, theta, xnorm):
    """[g]_theta^2 on (0, T) for X-valued samples; ``xnorm`` maps (k, ...) -> (k,)."""
    n = vals.shape[0]
    if n < 2 or theta <= 0:
        return 0.0
    t = dt * np.arange(n)
    T = t[-1]
    w = _trap_weights(n, dt)
    p = 1.0 - 2.0 * theta
    total = 0.0
    for i in range(n - 1):
        d = xnorm(vals[i + 1:] - vals[i]) ** 2
        dist = t[i + 1:] - t[i]
        total += 2.0 * w[i] * np.sum(w[i + 1:] * d / dist ** (1.0 + 2.0 * theta))
    # diagonal: integrand ~ |g'(t)|^2 |t - t'|^p near t = t'
    gp = np.gradient(vals, dt, axis=0, edge_order=2) if n > 2 else np.repeat(
        (vals[1:] - vals[:1]) / dt, n, axis=0)
    gp2 = xnorm(gp) ** 2
    exact = (t ** (p + 1) + (T - t) ** (p + 1)) / (p + 1)
    dist = np.abs(t[:, None] - t[None, :])
    np.fill_diagonal(dist, 1.0)
    kern = dist ** p
    np.fill_diagonal(kern, 0.0)
    corr = exact - kern @ w
    return float(total + np.sum(w * gp2 * corr))


def _xnorm_factory(traj: SampledTrajectory, s_space):
    def xn(v):
        return _spatial(v, s_space, traj.Lx, traj.Ly, keep=1)
    return xn


def temporal_norm(traj: SampledTrajectory, sigma, s_space=0.0, method="gagliardo") -> float:
    """Norm in H^sigma(0, T; H^s_space), 0 <= sigma < 2."""
    if not 0 <= sigma < 2:
        raise ValueError("temporal order must lie in [0, 2)")
    if method == "spectral":
        return _spectral_temporal(traj, sigma, s_space)
    if method != "gagliardo":
        raise ValueError(f"unknown method {method!r}")
    xn = _xnorm_factory(traj, s_space)
    v = traj.values
    n = v.shape[0]
    w = _trap_weights(n, traj.dt)
    m = int(math.floor(sigma))
    th = sigma - m
    sq = 0.0
    d = v
    for j in range(m + 1):
        if j > 0:
            d = np.gradient(d, traj.dt, axis=0, edge_order=2)
        sq += float(np.sum(w * xn(d) ** 2))
    sq += _gagliardo_sq(d, traj.dt, th, xn)
    return math.sqrt(max(sq, 0.0))


def _spectral_temporal(traj, sigma, s_space):
    """Reflection shortcut for initially vanishing trajectories.

    Even reflection about T, then odd about 0, gives a 4T-periodic extension;
    the periodic symbol norm is divided by the four copies.
    """
    v = traj.values
    if np.max(np.abs(v[0])) > 1e-12 * max(np.max(np.abs(v)), 1e-300):
        raise ValueError("spectral temporal norm requires a trajectory vanishing at t = 0")
    half = np.concatenate([v, v[-2:0:-1]], axis=0)         # even about T: [0, 2T)
    # odd about 0 over [-2T, 0); the sample at -2T equals f(0) = 0
    ext = np.concatenate([half, np.zeros_like(half[:1]), -half[1:][::-1]], axis=0)
    n = ext.shape[0]
    L = n * traj.dt
    om = 2 * np.pi * np.fft.fftfreq(n, d=traj.dt)
    eh = np.fft.fft(ext, axis=0) / n
    xn = _xnorm_factory(traj, s_space)
    amp = np.array([xn(np.real(eh[i:i + 1]))[0] ** 2 + xn(np.imag(eh[i:i + 1]))[0] ** 2
                    for i in range(n)])
    return math.sqrt(L * np.sum((1 + om ** 2) ** sigma * amp) / 4.0)


def l2_time_norm(traj: SampledTrajectory, s_space) -> float:
    """Norm in L2(0, T; H^s_space) by the trapezoid rule."""
    xn = _xnorm_factory(traj, s_space)
    w = _trap_weights(traj.values.shape[0], traj.dt)
    return math.sqrt(float(np.sum(w * xn(traj.values) ** 2)))


def k_norm(traj: SampledTrajectory, s, method="gagliardo") -> float:
    """Anisotropic K^s norm: the larger of the L2(H^s) and H^{s/2}(L2) parts."""
    return max(l2_time_norm(traj, s), temporal_norm(traj, s / 2.0, 0.0, method))


def sup_norm(traj: SampledTrajectory, s_space=0.0) -> float:
    return float(np.max(_xnorm_factory(traj, s_space)(traj.values)))


def fit_slope(T, values):
    T = np.asarray(T, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = (v > 0) & np.isfinite(v)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(T[ok]), np.log(v[ok]), 1)[0])


# ---------------------------------------------------------------------------
# band-limited corpus

CORPUS_FILE = "lemma_corpus.json"
DEFAULT_SEED = 20240611


@dataclass
class CorpusSample:
    """Sum of separable modes ``A cos(kx x + px) cos(ky y + py) tau(omega t)``.

    ``tau`` is ``sin`` or ``1 - cos``, so every sample vanishes at t = 0.
    """
    name: str
    terms: list = field(default_factory=list)   # dicts with comp, A, kx, ky, px, py, omega, tkind
    ncomp: int = 2

    def evaluate(self, t, X1, X2):
        t = np.asarray(t, dtype=float)
        out = np.zeros((t.size, self.ncomp) + np.shape(X1))
        for tm in self.terms:
            tau = np.sin(tm["omega"] * t) if tm["tkind"] == "sin" else 1 - np.cos(tm["omega"] * t)
            sp = tm["A"] * np.cos(tm["kx"] * X1 + tm["px"]) * np.cos(tm["ky"] * X2 + tm["py"])
            out[:, tm["comp"]] += tau[:, None, None] * sp
        return out

    def time_factor(self, t):
        tm = self.terms[0]
        t = np.asarray(t, dtype=float)
        return np.sin(tm["omega"] * t) if tm["tkind"] == "sin" else 1 - np.cos(tm["omega"] * t)

    def to_dict(self):
        return {"name": self.name, "ncomp": self.ncomp, "terms": self.terms}


def generate_corpus(seed=DEFAULT_SEED, n_samples=6, n_terms=4, ncomp=2):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_samples):
        terms = []
        for _ in range(n_terms):
            terms.append({
                "comp": int(rng.integers(ncomp)),
                "A": round(float(rng.uniform(-0.1, 0.1)), 12),
                "kx": int(rng.integers(0, 4)),
                "ky": round(float(rng.uniform(0.0, 3.0)), 12),
                "px": round(float(rng.uniform(0, 2 * np.pi)), 12),
                "py": round(float(rng.uniform(0, 2 * np.pi)), 12),
                "omega": round(float(rng.uniform(0.5, 3.0)), 12),
                "tkind": "sin" if rng.random() < 0.5 else "1-cos",
            })
        out.append(CorpusSample(f"sample{i}", terms, ncomp))
    return out


def corpus_to_json(samples, seed=DEFAULT_SEED):
    return json.dumps({"seed": seed, "samples": [s.to_dict() for s in samples]}, indent=1)


def load_corpus(path=None):
    if path is None:
        text = resources.files("viscofree").joinpath("data", CORPUS_FILE).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    d = json.loads(text)
    return [CorpusSample(s["name"], s["terms"], s["ncomp"]) for s in d["samples"]]


# ---------------------------------------------------------------------------
# scaling checks

@dataclass
class ScalingReport:
    name: str
    T: list
    values: list
    slope: float
    predicted: float
    passed: bool
    vacuous: bool = False
    detail: str = ""

    def line(self):
        tag = "vacuous" if self.vacuous else ("pass" if self.passed else "FAIL")
        return f"{self.name}: slope={self.slope:.4f} predicted={self.predicted:.4f} [{tag}] {self.detail}"


@dataclass
class StripGrid:
    """Uniform logical grid of the reference strip used by the lemma checks."""
    nx: int = 16
    nz: int = 9
    Lx: float = 2 * np.pi
    Ly: float = 1.0

    @property
    def coords(self):
        x = self.Lx * np.arange(self.nx) / self.nx
        y = np.linspace(-self.Ly, 0.0, self.nz)
        return np.meshgrid(x, y)


def _as_fn(v, grid: StripGrid):
    if isinstance(v, CorpusSample):
        X1, X2 = grid.coords
        return lambda t: v.evaluate(t, X1, X2)
    return v


def _traj(fn, T, nt, grid):
    t = np.linspace(0.0, T, nt + 1)
    return SampledTrajectory(fn(t), T / nt, grid.Lx, grid.Ly)


def _all_zero(vals):
    return all(v == 0 for v in vals)


def check_integral_lemma(v, s=0.25, eps_prime=0.1, T_ladder=(1.0, 0.5, 0.25, 0.125), nt=64,
                         grid: StripGrid | None = None) -> ScalingReport:
    """Ratio |V|_{s+1-eps'} / |v|_s for V(t) = int_0^t v, fitted against T."""
    if not 0 <= s < 0.5:
        raise ValueError("s must lie in [0, 1/2)")
    if not 0 <= eps_prime <= s:
        raise ValueError("eps_prime must lie in [0, s]")
    grid = grid or StripGrid()
    fn = _as_fn(v, grid)
    ratios = []
    for T in T_ladder:
        tr = _traj(fn, T, nt, grid)
        V = np.zeros_like(tr.values)
        V[1:] = np.cumsum(0.5 * (tr.values[1:] + tr.values[:-1]) * tr.dt, axis=0)
        num = temporal_norm(SampledTrajectory(V, tr.dt, tr.Lx, tr.Ly), s + 1 - eps_prime)
        den = temporal_norm(tr, s)
        ratios.append(0.0 if den == 0 else num / den)
    if _all_zero(ratios):
        return ScalingReport("integral", list(T_ladder), ratios, float("nan"), eps_prime, True, True)
    sl = fit_slope(T_ladder, ratios)
    return ScalingReport("integral", list(T_ladder), ratios, sl, eps_prime, sl >= 0.8 * eps_prime)


def xi_trajectory(u_traj: SampledTrajectory):
    """xi(t) = (I + int_0^t grad u)^-1 - I on the flat strip, samples (n, 2, 2, nz, nx)."""
    u = u_traj.values
    nz, nx = u.shape[-2:]
    k = wavenumbers(nx, u_traj.Lx)
    dy = u_traj.Ly / (nz - 1)
    dx = np.real(np.fft.ifft(1j * k * np.fft.fft(u, axis=-1), axis=-1))
    dyu = np.gradient(u, dy, axis=-2, edge_order=2)
    g = np.stack([dx, dyu], axis=2)                   # (n, i, j, nz, nx)
    d_eta = np.zeros_like(g)
    d_eta[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * u_traj.dt, axis=0)
    return np.stack([xi_from_eta(d) for d in d_eta])


def sup_negative_control(T_ladder=(1.0, 1 / 64), r=0.25, nt=64) -> ScalingReport:
    """sup / H^{(1+r)/2} for the constant function 1: grows without bound as T -> 0."""
    vals = []
    for T in T_ladder:
        tr = SampledTrajectory(np.ones((nt + 1, 1)), T / nt, Lx=1.0)
        vals.append(sup_norm(tr) / temporal_norm(tr, (1 + r) / 2))
    growth = vals[-1] / vals[0]
    sl = fit_slope(T_ladder, vals)
    return ScalingReport("sup_control", list(T_ladder), vals, sl, -0.5, growth >= 4.0,
                         detail=f"growth={growth:.3f}")


def check_smallness_lemmas(u, T_ladder=tuple(2.0 ** -k for k in range(7)), r=0.25, nt=48,
                           grid: StripGrid | None = None, s_pair=(0.0, 1.0),
                           product_orders=(0.75, 0.25)) -> dict:
    """Four scaling checks on one initially vanishing trajectory generator.

    (a) |xi|_{A'} with A' = H^{(1+r)/2}(0,T; H^{1+r}) has positive slope in T;
    (b) |f|_{H^s}/|f|_{H^r} has slope >= 0.8 (r - s);
    (c) sup/|v|_{H^{(1+r)/2}} varies by at most a factor 2 along the ladder;
    (d) |uv|_{s'}/(|u|_s |v|_{s'}) does not grow past 2x its largest-T value.
    """
    grid = grid or StripGrid()
    fn = _as_fn(u, grid)
    T_ladder = list(T_ladder)
    A, B, C, D = [], [], [], []
    s_lo, s_hi = s_pair
    ps, pps = product_orders
    for T in T_ladder:
        tr = _traj(fn, T, nt, grid)
        xi = SampledTrajectory(xi_trajectory(tr), tr.dt, tr.Lx, tr.Ly)
        A.append(temporal_norm(xi, (1 + r) / 2, s_space=1 + r))
        hi = temporal_norm(tr, s_hi)
        B.append(0.0 if hi == 0 else temporal_norm(tr, s_lo) / hi)
        hc = temporal_norm(tr, (1 + r) / 2)
        C.append(0.0 if hc == 0 else sup_norm(tr) / hc)
        if isinstance(u, CorpusSample):
            a = u.time_factor(tr.times)
        else:
            a = tr.times
        at = SampledTrajectory(a[:, None], tr.dt, Lx=1.0)
        prod = SampledTrajectory(a[:, None, None, None] * tr.values, tr.dt, tr.Lx, tr.Ly)
        den = temporal_norm(at, ps) * temporal_norm(tr, pps)
        D.append(0.0 if den == 0 else temporal_norm(prod, pps) / den)
    out = {}
    if _all_zero(A):
        out["a"] = ScalingReport("xi_small", T_ladder, A, float("nan"), 0.0, True, True)
    else:
        sl = fit_slope(T_ladder, A)
        out["a"] = ScalingReport("xi_small", T_ladder, A, sl, 0.0, sl > 0)
    if _all_zero(B):
        out["b"] = ScalingReport("lower_order", T_ladder, B, float("nan"), s_hi - s_lo, True, True)
    else:
        sl = fit_slope(T_ladder, B)
        out["b"] = ScalingReport("lower_order", T_ladder, B, sl, s_hi - s_lo,
                                 sl >= 0.8 * (s_hi - s_lo))
    if _all_zero(C):
        out["c"] = ScalingReport("sup_embedding", T_ladder, C, float("nan"), 0.0, True, True)
    else:
        nz = [c for c in C if c > 0]
        spread = max(nz) / min(nz)
        out["c"] = ScalingReport("sup_embedding", T_ladder, C, fit_slope(T_ladder, C), 0.0,
                                 spread <= 2.0, detail=f"max/min={spread:.3f}")
    if _all_zero(D):
        out["d"] = ScalingReport("product", T_ladder, D, float("nan"), 0.0, True, True)
    else:
        i0 = int(np.argmax(T_ladder))
        growth = max(D) / D[i0] if D[i0] > 0 else float("inf")
        out["d"] = ScalingReport("product", T_ladder, D, fit_slope(T_ladder, D), 0.0,
                                 growth <= 2.0, detail=f"growth={growth:.3f}")
    return out


def run_lemma_suite(samples=None, T_ladder=tuple(2.0 ** -k for k in range(7)), r=0.25, nt=48,
                    s=0.25, eps_prime=0.1):
    """All checks over a corpus; returns (per-sample reports, negative control)."""
    samples = load_corpus() if samples is None else samples
    rows = []
    for smp in samples:
        rep = check_smallness_lemmas(smp, T_ladder, r, nt)
        rep["integral"] = check_integral_lemma(smp, s, eps_prime, T_ladder[:4], nt)
        rows.append((smp.name, rep))
    return rows, sup_negative_control((T_ladder[0], 1 / 64), r)
