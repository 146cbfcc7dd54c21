"""Cell-tessellated upper-bound chain and its fluid limit.

The torus is cut into square cells of side epsilon and the attenuation is
replaced by its cell-wise worst case

    l_eps(a_i, a_j) = sup { l(|b_i - b_j|) : |b_i - a_i|, |b_j - a_j| in {0, eps} },

realised as l evaluated at the minimum wraparound distance over axis-aligned
and diagonal offsets of each endpoint ({-eps, 0, +eps}^2, 81 combinations).
Cell centers sit on the eps-grid, so the candidate minimum never exceeds
the infimum distance between any two points of the cells: l_eps dominates
the attenuation for every pair of positions, not just the centers, which is
what the coupling below needs.  Translation invariance on the grid makes
every row of l_eps a permutation of row 0, hence equal row sums.

The cell counts then evolve as a countable-state jump chain (births
lam eps^2 per cell; per-customer death rates from the worst-case
interference, carrying the C/L factor for dimensional consistency even
though the usual normalisation sets C = L = 1).  Because gains and
populations only grow under the coarsening, the chain stochastically
dominates the continuum dynamics; ``coupled_dominance_run`` realises the
coupling explicitly by thinning.  The fluid rescaling of the chain obeys

    dx_i/dt = lam eps^2 - C x_i / (L ln 2 sum_k x_k l_eps(a_i, a_k)),

frozen at the origin, whose max coordinate drifts down at least at rate
C / (L ln 2 sum_k l_eps(a_k, 0)) - lam eps^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, NumericsError
from .network import ChannelParams
from .rng import substream
from .torus import PathLossModel, TorusDomain

LN2 = math.log(2.0)


@dataclass(frozen=True)
class Tessellation:
    domain: TorusDomain
    pathloss: PathLossModel
    epsilon: float
    grid_m: int
    centers: np.ndarray  # (n_cells, 2), cell 0 centered at the origin
    l_eps: np.ndarray    # (n_cells, n_cells) worst-case gains

    @property
    def n_cells(self) -> int:
        return self.grid_m * self.grid_m

    @property
    def row0(self) -> np.ndarray:
        return self.l_eps[0]

    def integral(self) -> float:
        """eps^2 sum_k l_eps(a_k, 0) = Int_S l_eps(x, 0) dx."""
        return float(self.epsilon ** 2 * np.sum(self.row0))

    def stability_bound(self, p: ChannelParams) -> float:
        """Arrival intensity below which the coarsened chain is ergodic."""
        return p.C / (p.L * LN2 * self.integral())

    def drift_bound(self, p: ChannelParams, lam: float) -> float:
        """Upper bound on d/dt of the fluid max coordinate."""
        return lam * self.epsilon ** 2 - p.C / (p.L * LN2 * float(np.sum(self.row0)))

    def cell_of(self, point) -> int:
        """Index of the cell containing a point (cells centered on the grid)."""
        per = self.domain.period
        eps = self.epsilon
        ix = int(np.floor((point[0] + eps / 2.0) / eps)) % self.grid_m
        iy = int(np.floor((point[1] + eps / 2.0) / eps)) % self.grid_m
        return ix * self.grid_m + iy


def _grid_geometry(domain: TorusDomain, epsilon: float):
    per = domain.period
    m = int(round(per / epsilon))
    if m < 1 or abs(m * epsilon - per) > 1e-9 * per:
        raise ConfigError(f"cell side {epsilon} must divide 2Q = {per} evenly")
    q = domain.half_side
    coords = (np.arange(m) * epsilon + q) % per - q  # cell 0 at the origin
    return m, coords


def coarsened_gain_row(domain: TorusDomain, pathloss: PathLossModel,
                       epsilon: float) -> np.ndarray:
    """Worst-case gains from every cell to cell 0 (row 0 of l_eps), computed
    in chunks so fine grids stay affordable."""
    if pathloss.unbounded_at_origin:
        raise ConfigError("tessellation needs a bounded attenuation model")
    m, coords = _grid_geometry(domain, epsilon)
    q = domain.half_side
    per = domain.period
    cx, cy = np.meshgrid(coords, coords, indexing="ij")
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    offs = np.array([(dx, dy) for dx in (-epsilon, 0.0, epsilon)
                     for dy in (-epsilon, 0.0, epsilon)])
    diffs = (offs[None, :, :] - offs[:, None, :]).reshape(-1, 2)  # 81 combos
    n = centers.shape[0]
    row0 = np.empty(n)
    step = max(1, 4_000_000 // diffs.shape[0])
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        disp = centers[lo:hi, None, :] + diffs[None, :, :]
        wrapped = (disp + q) % per - q
        dmin = np.min(np.hypot(wrapped[:, :, 0], wrapped[:, :, 1]), axis=1)
        row0[lo:hi] = pathloss.evaluate(dmin)
    return row0


def coarsened_integral(domain: TorusDomain, pathloss: PathLossModel,
                       epsilon: float) -> float:
    """eps^2 sum_k l_eps(a_k, 0); decreases to the attenuation integral a as
    the cells shrink (monotone convergence of the worst-case gains)."""
    return float(epsilon ** 2 * np.sum(coarsened_gain_row(domain, pathloss, epsilon)))


def build_tessellation(domain: TorusDomain, pathloss: PathLossModel,
                       epsilon: float) -> Tessellation:
    m, coords = _grid_geometry(domain, epsilon)
    q = domain.half_side
    per = domain.period
    cx, cy = np.meshgrid(coords, coords, indexing="ij")
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    row0 = coarsened_gain_row(domain, pathloss, epsilon)

    # l_eps[i, j] = row0 at the relative grid displacement j - i
    ix = np.arange(m)
    rel = (ix[None, :] - ix[:, None]) % m
    rel2 = (rel[:, None, :, None] * m + rel[None, :, None, :]).reshape(m * m, m * m)
    l_eps = row0[rel2]

    t = Tessellation(domain, pathloss, float(epsilon), m, centers, l_eps)
    direct = np.asarray(pathloss.evaluate(
        np.hypot(*((centers + q) % per - q).T)), dtype=np.float64)
    if np.any(row0 + 1e-15 < direct):
        raise NumericsError("coarsened gains fail to dominate the attenuation")
    return t


def _death_rates(t: Tessellation, p: ChannelParams, counts, shot) -> np.ndarray:
    """Per-cell death rates X_i (C/L) log2(1 + l(0)/(N0 + I_i)) with the
    worst-case interference I_i = sum_j (X_j - 1{j=i}) l_eps[i, j]."""
    sig = float(t.pathloss.evaluate(0.0))
    inter = np.maximum(shot - np.diag(t.l_eps), 0.0)
    return counts * (p.C / p.L) * np.log2(1.0 + sig / (p.N0 + inter))


def simulate_cell_chain(t: Tessellation, lam: float, p: ChannelParams,
                        horizon: float, seed: int, x0=None,
                        sample_times=None, max_events: int | None = None):
    """Exact jump simulation of the cell-count chain.

    Returns (times, counts) recorded at every event, or at ``sample_times``
    when given (piecewise-constant fill).  Deterministic given seed.
    """
    n = t.n_cells
    x = np.zeros(n, dtype=np.int64) if x0 is None else np.asarray(x0, dtype=np.int64).copy()
    if x.shape != (n,) or np.any(x < 0):
        raise ConfigError("initial counts must be a non-negative vector over the cells")
    rng = substream(seed, 40)
    birth_each = lam * t.epsilon ** 2
    birth_total = birth_each * n
    shot = t.l_eps @ x
    now = 0.0
    events = 0

    grid = None if sample_times is None else np.asarray(sample_times, dtype=np.float64)
    times, states = [], []
    gi = 0
    if grid is None:
        times.append(now)
        states.append(x.copy())

    while True:
        death = _death_rates(t, p, x, shot)
        total = birth_total + float(death.sum())
        if total <= 0:
            tnext = math.inf
        else:
            tnext = now + rng.exponential(1.0 / total)
        if grid is not None:
            # grid points before the next jump see the current state
            while gi < grid.size and grid[gi] < tnext and grid[gi] <= horizon:
                times.append(grid[gi])
                states.append(x.copy())
                gi += 1
        if tnext > horizon:
            break
        now = tnext
        u = rng.uniform(0.0, total)
        if u < birth_total:
            c = min(int(u / birth_each), n - 1)
            x[c] += 1
            shot += t.l_eps[:, c]
        else:
            cum = np.cumsum(death)
            c = min(int(np.searchsorted(cum, u - birth_total, side="right")), n - 1)
            x[c] -= 1
            shot -= t.l_eps[:, c]
        if grid is None:
            times.append(now)
            states.append(x.copy())
        events += 1
        if max_events is not None and events >= max_events:
            break
    return np.array(times), np.array(states, dtype=np.int64)


def coupled_dominance_run(t: Tessellation, lam: float, p: ChannelParams,
                          horizon: float, seed: int,
                          max_events: int = 10_000):
    """Joint thinning construction of the continuum dynamics and the
    coarsened chain sharing births: every continuum particle is also a chain
    particle, chain deaths kill both, and the rate surplus of the continuum
    process (its interference is dominated cell-wise) fires continuum-only
    deaths.  Returns (times, true_counts, chain_counts) per cell; the true
    counts never exceed the chain counts by construction, and the rate
    ordering is asserted along the way.
    """
    n = t.n_cells
    rng = substream(seed, 41)
    sig = float(t.pathloss.evaluate(0.0))
    q = t.domain.half_side
    per = t.domain.period

    pos: list[np.ndarray] = []
    cell: list[int] = []
    alive_true: list[bool] = []

    times = [0.0]
    true_tr = [np.zeros(n, dtype=np.int64)]
    chain_tr = [np.zeros(n, dtype=np.int64)]
    birth_total = lam * t.domain.area()
    now = 0.0

    def counts():
        ct = np.zeros(n, dtype=np.int64)
        cc = np.zeros(n, dtype=np.int64)
        for c, at in zip(cell, alive_true):
            cc[c] += 1
            if at:
                ct[c] += 1
        return ct, cc

    for _ in range(max_events):
        k = len(pos)
        cc = np.zeros(n, dtype=np.int64)
        for c in cell:
            cc[c] += 1
        shot = t.l_eps @ cc
        r_chain = np.empty(k)
        for i in range(k):
            inter = shot[cell[i]] - t.l_eps[cell[i], cell[i]]
            r_chain[i] = (p.C / p.L) * math.log2(1.0 + sig / (p.N0 + max(inter, 0.0)))
        true_idx = [i for i in range(k) if alive_true[i]]
        r_extra = np.zeros(k)
        for i in true_idx:
            it = 0.0
            for j in true_idx:
                if j != i:
                    dx = abs(pos[i][0] - pos[j][0])
                    dy = abs(pos[i][1] - pos[j][1])
                    dx = min(dx, per - dx)
                    dy = min(dy, per - dy)
                    it += float(t.pathloss.evaluate(math.hypot(dx, dy)))
            r_true = (p.C / p.L) * math.log2(1.0 + sig / (p.N0 + it))
            if r_true < r_chain[i] - 1e-12:
                raise NumericsError("rate ordering violated: coupling invalid")
            r_extra[i] = r_true - r_chain[i]
        total = birth_total + float(r_chain.sum()) + float(r_extra.sum())
        if total <= 0:
            break
        dt = rng.exponential(1.0 / total)
        if now + dt > horizon:
            break
        now += dt
        u = rng.uniform(0.0, total)
        if u < birth_total:
            x = rng.uniform(-q, q, 2)
            pos.append(x)
            cell.append(t.cell_of(x))
            alive_true.append(True)
        else:
            w = u - birth_total
            cum = np.cumsum(np.concatenate([r_chain, r_extra]))
            j = int(np.searchsorted(cum, w, side="right"))
            j = min(j, 2 * k - 1)
            if j < k:  # chain death removes the particle from both layers
                del pos[j], cell[j], alive_true[j]
            else:      # continuum-only death leaves a chain ghost
                alive_true[j - k] = False
        ct, cc2 = counts()
        times.append(now)
        true_tr.append(ct)
        chain_tr.append(cc2)
    return np.array(times), np.array(true_tr), np.array(chain_tr)


@dataclass(frozen=True)
class FluidTrajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n_cells)
    t_absorbed: float | None

    def max_norm(self) -> np.ndarray:
        return self.states.max(axis=1)


def fluid_ode(t: Tessellation, lam: float, p: ChannelParams, x0, t_end: float,
              step_tol: float = 1e-9, samples: int = 512) -> FluidTrajectory:
    """Adaptive integration of the fluid field, absorbing at the origin.

    A coordinate at zero with positive total mass keeps its birth drift
    lam eps^2 >= 0; once the max norm hits zero the state is frozen there.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (t.n_cells,) or np.any(x0 < 0):
        raise ConfigError("initial fluid state must be non-negative over the cells")
    birth = lam * t.epsilon ** 2
    coeff = p.C / (p.L * LN2)
    l_eps = t.l_eps

    def field(_time, x):
        xc = np.maximum(x, 0.0)
        if xc.max() <= 0.0:
            return np.zeros_like(xc)
        s = l_eps @ xc
        drain = np.where(s > 0.0, xc / np.where(s > 0.0, s, 1.0), 0.0)
        return birth - coeff * drain

    floor = max(10.0 * step_tol, 1e-12)

    def absorbed(_time, x):
        return float(np.max(x) - floor)

    absorbed.terminal = True
    absorbed.direction = -1

    if x0.max() <= 0.0:
        ts = np.linspace(0.0, t_end, samples)
        return FluidTrajectory(ts, np.zeros((samples, t.n_cells)), 0.0)

    sol = solve_ivp(field, (0.0, t_end), x0, method="RK45", rtol=step_tol,
                    atol=step_tol, events=absorbed, dense_output=True, max_step=t_end / 50)
    if not sol.success:
        raise NumericsError(f"fluid integration failed: {sol.message}")
    t_abs = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    ts = np.linspace(0.0, t_end, samples)
    states = np.empty((samples, t.n_cells))
    for i, tt in enumerate(ts):
        if t_abs is not None and tt >= t_abs:
            states[i] = 0.0
        else:
            states[i] = np.maximum(sol.sol(min(tt, sol.t[-1])), 0.0)
    return FluidTrajectory(ts, states, t_abs)


def drain_time_bound(t: Tessellation, p: ChannelParams, lam: float) -> float:
    """Time by which the fluid max norm starting at 1 must reach 0 when the
    drift bound is negative."""
    d = t.drift_bound(p, lam)
    if d >= 0:
        raise ConfigError("drift bound is non-negative; no finite drain time")
    return 1.0 / (-d)
