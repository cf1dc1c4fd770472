"""Seeded Monte Carlo engine for the controlled regime-switching diffusion.

Euler-Maruyama with left-endpoint cost quadrature:

    X <- X - (b_l(X) + n * rate) dt + sigma_l(X) sqrt(dt) xi,
    sigma sigma^T / 2 = a_l,  r <- r + c_l(X) dt,

costs discounted by exp(-r) at the interval start.  Paths stop at the
first exit from the open domain or at the horizon cap.

Determinism contract: per-path Gaussian streams come from a counter-based
seed split (SeedSequence spawn by absolute path index, consumed in fixed
blocks of BLOCK_STEPS), chunk boundaries are fixed by path index, and the
reduction runs in path-index order -- so estimates are bitwise identical
for a given seed regardless of worker-thread count, and the compiled
backend walks the same streams.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..control import FeedbackPolicy
from ..errors import (
    ChatterGuardError,
    InadmissibleJumpError,
    OutOfDomainError,
)
from ..grid import Grid
from ..penalty import Penalty, legendre_closed, legendre_on_policy
from ..problem import ProblemSpec
from . import backend
from .params import PathCostEstimate, SimParams, estimate_from_costs
from .strategies import AdmissibleStrategy

BLOCK_STEPS = 256
CHUNK_PATHS = 4096
ABSORBED, TRUNCATED = 1, 2

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_LAMBDA = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def _per_regime(fns, x: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """Evaluate one catalog function per regime at per-path positions."""
    out = np.empty(x.shape[0])
    for regime in np.unique(ell):
        sel = ell == regime
        out[sel] = fns[regime](x[sel])
    return out


def _drift_at(spec: ProblemSpec, x: np.ndarray, ell: np.ndarray) -> np.ndarray:
    n, d = x.shape
    out = np.empty((n, d))
    for regime in np.unique(ell):
        sel = ell == regime
        co = spec.coefficients[regime]
        for ax in range(d):
            out[sel, ax] = co.b[ax](x[sel])
    return out


def _noise_at(spec: ProblemSpec, x: np.ndarray, ell: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """sigma_l(X) xi with sigma = chol(2 a_l); closed form for d <= 2."""
    n, d = x.shape
    out = np.empty((n, d))
    for regime in np.unique(ell):
        sel = ell == regime
        co = spec.coefficients[regime]
        if d == 1:
            a = co.a[0][0](x[sel])
            out[sel, 0] = np.sqrt(2.0 * a) * xi[sel, 0]
        else:
            a00 = co.a[0][0](x[sel])
            a01 = 0.5 * (co.a[0][1](x[sel]) + co.a[1][0](x[sel]))
            a11 = co.a[1][1](x[sel])
            l00 = np.sqrt(2.0 * a00)
            l10 = np.where(l00 > 0, 2.0 * a01 / np.where(l00 > 0, l00, 1.0), 0.0)
            l11 = np.sqrt(np.maximum(2.0 * a11 - l10 * l10, 0.0))
            out[sel, 0] = l00 * xi[sel, 0]
            out[sel, 1] = l10 * xi[sel, 0] + l11 * xi[sel, 1]
    return out


def _spawn_generators(seed: int, n_paths: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_paths)


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(s, min(s + CHUNK_PATHS, n)) for s in range(0, n, CHUNK_PATHS)]


def _run_chunks(worker, n_paths: int) -> tuple[np.ndarray, np.ndarray]:
    """Run chunk workers (possibly threaded) and reassemble in index order."""
    costs = np.empty(n_paths)
    status = np.empty(n_paths, dtype=np.int8)
    spans = _chunks(n_paths)
    threads = backend.worker_threads()
    if threads <= 1 or len(spans) == 1:
        for span in spans:
            c, s = worker(span)
            costs[span[0] : span[1]] = c
            status[span[0] : span[1]] = s
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for span, (c, s) in zip(spans, pool.map(worker, spans)):
                costs[span[0] : span[1]] = c
                status[span[0] : span[1]] = s
    return costs, status


# --------------------------------------------------------------------------
# feedback-policy simulation


def simulate_policy(
    policy: FeedbackPolicy,
    x0,
    ell0: int,
    params: SimParams,
    spec: ProblemSpec,
    grid: Grid,
) -> PathCostEstimate:
    """Estimate the penalized cost of the synthesized feedback policy.

    Running cost is h + l_eps evaluated on-policy (closed form); switch
    costs are charged while inside the domain; paths stop at the first exit
    from the open domain or at the horizon.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not bool(spec.domain.contains(x0[None, :])[0]):
        raise OutOfDomainError(f"start point {x0.tolist()} outside the closed domain")
    if not 0 <= ell0 < spec.regimes:
        raise ValueError(f"start regime {ell0} out of range")
    t_max = params.resolve_t_max(spec, grid)
    n_steps = params.n_steps(t_max)
    seeds = _spawn_generators(params.seed, params.n_paths)
    kernel = backend.kernel_enabled() and grid.coeff_tables(spec).diagonal

    def worker(span):
        lo, hi = span
        if kernel:
            return _policy_chunk_kernel(
                policy, spec, grid, x0, ell0, params, n_steps, seeds[lo:hi]
            )
        return _policy_chunk_numpy(policy, spec, x0, ell0, params, n_steps, seeds[lo:hi])

    costs, status = _run_chunks(worker, params.n_paths)
    return estimate_from_costs(
        costs,
        absorbed=int(np.sum(status == ABSORBED)),
        truncated=int(np.sum(status == TRUNCATED)),
        t_max=t_max,
        params=params,
        backend=backend.backend_name() if kernel else "numpy",
    )


def _policy_chunk_numpy(
    policy: FeedbackPolicy,
    spec: ProblemSpec,
    x0: np.ndarray,
    ell0: int,
    params: SimParams,
    n_steps: int,
    seeds,
) -> tuple[np.ndarray, np.ndarray]:
    n = len(seeds)
    d = spec.dimension
    dt = params.dt
    sqrt_dt = np.sqrt(dt)
    theta = spec.costs.matrix
    co = spec.coefficients
    dom = spec.domain

    gens = [np.random.default_rng(s) for s in seeds]
    X = np.tile(x0, (n, 1))
    ell = np.full(n, ell0, dtype=np.int64)
    r = np.zeros(n)
    cost = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)
    alive = np.arange(n)

    step = 0
    while alive.size and step < n_steps:
        block = min(BLOCK_STEPS, n_steps - step)
        normals = np.empty((alive.size, block, d))
        for i, idx in enumerate(alive):
            normals[i] = gens[idx].standard_normal((block, d))

        Xa = X[alive]
        la = ell[alive]
        ra = r[alive]
        ca = cost[alive]
        sub = np.arange(alive.size)

        for j in range(block):
            if sub.size == 0:
                break
            x = Xa[sub]
            l = la[sub]
            # switching rule first (immediate switch allowed at step start)
            sw, targ = policy.switch_decision(x, l)
            if sw.any():
                hit = sub[sw]
                ca[hit] += np.exp(-ra[hit]) * theta[la[hit], targ[sw]]
                la[hit] = targ[sw]
                again, _ = policy.switch_decision(Xa[hit], la[hit])
                if again.any():
                    raise ChatterGuardError(
                        "policy requested a second switch at one time point; "
                        "check the switch tolerance"
                    )
                l = la[sub]
            g_vals = _per_regime([c.g for c in co], x, l)
            rate, direction, gnorm = policy.rate_direction(x, l, g_vals)
            h_vals = _per_regime([c.h for c in co], x, l)
            c_vals = _per_regime([c.c for c in co], x, l)
            disc = np.exp(-ra[sub])
            run_cost = legendre_on_policy(gnorm, g_vals, policy.penalty)
            ca[sub] += disc * (h_vals + run_cost) * dt
            drift = _drift_at(spec, x, l) + direction * rate[:, None]
            if params.zero_diffusion:
                Xa[sub] = x - drift * dt
            else:
                noise = _noise_at(spec, x, l, normals[sub, j, :])
                Xa[sub] = x - drift * dt + sqrt_dt * noise
            ra[sub] += c_vals * dt
            inside = dom.strictly_inside(Xa[sub])
            dead = sub[~inside]
            status[alive[dead]] = ABSORBED
            sub = sub[inside]

        X[alive] = Xa
        ell[alive] = la
        r[alive] = ra
        cost[alive] = ca
        alive = alive[sub]
        step += block

    status[status == 0] = TRUNCATED
    return cost, status


def _policy_chunk_kernel(
    policy: FeedbackPolicy,
    spec: ProblemSpec,
    grid: Grid,
    x0: np.ndarray,
    ell0: int,
    params: SimParams,
    n_steps: int,
    seeds,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path compiled loop consuming the same streams as the numpy path."""
    kern = backend.kernel_module()
    pack = _kernel_pack(policy, spec, grid)
    n = len(seeds)
    d = spec.dimension
    costs = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    for i in range(n):
        gen = np.random.default_rng(seeds[i])
        state = np.zeros(4)  # [r, cost, unused, unused]
        x = x0.copy()
        ellv = np.array([ell0], dtype=np.int64)
        left = n_steps
        st = 0
        while left > 0:
            block = min(BLOCK_STEPS, left)
            normals = gen.standard_normal((block, d))
            st, used = kern.run_policy_block(
                x,
                ellv,
                state,
                normals,
                params.dt,
                np.sqrt(params.dt),
                1 if params.zero_diffusion else 0,
                *pack,
            )
            left -= used
            if st != 0:
                break
        if st == 3:
            raise ChatterGuardError(
                "policy requested a second switch at one time point; "
                "check the switch tolerance"
            )
        costs[i] = state[1]
        status[i] = ABSORBED if st == 1 else TRUNCATED
    return costs, status


def _kernel_pack(policy: FeedbackPolicy, spec: ProblemSpec, grid: Grid):
    """Tables and scalars passed to the compiled block runner (cached)."""
    key = ("kernel_pack", id(policy))
    if key in grid._cache:
        return grid._cache[key]
    d = grid.dimension
    m = spec.regimes
    nx = grid.shape[0]
    ny = grid.shape[1] if d == 2 else 1
    lo = np.array([grid.domain.lower[0], grid.domain.lower[1] if d == 2 else 0.0])
    hs = np.array([grid.spacing[0], grid.spacing[1] if d == 2 else 1.0])
    values = np.ascontiguousarray(policy.u_eps.values)
    grads = np.ascontiguousarray(policy.grad_tables)
    nfn = 3 + d + d * d
    enc = np.zeros((m, nfn, 12))
    for ell, co in enumerate(spec.coefficients):
        enc[ell, 0] = co.c.encode(d)
        enc[ell, 1] = co.h.encode(d)
        enc[ell, 2] = co.g.encode(d)
        for ax in range(d):
            enc[ell, 3 + ax] = co.b[ax].encode(d)
        for i in range(d):
            for j in range(d):
                enc[ell, 3 + d + i * d + j] = co.a[i][j].encode(d)
    dom = spec.domain
    dom_kind = 1 if dom.kind == "disk" else 0
    dom_lo = np.array([dom.lower[0], dom.lower[1] if d == 2 else 0.0])
    dom_hi = np.array([dom.upper[0], dom.upper[1] if d == 2 else 1.0])
    centre = np.array(
        [dom.center[0] if dom.kind == "disk" else 0.0, dom.center[1] if dom.kind == "disk" else 0.0]
    )
    pack = (
        int(d),
        int(m),
        int(nx),
        int(ny),
        lo,
        hs,
        values,
        grads,
        np.ascontiguousarray(enc),
        np.ascontiguousarray(spec.costs.matrix),
        float(policy.epsilon),
        float(policy.switch_tol),
        np.ascontiguousarray(policy.gamma0 if d == 2 else np.array([policy.gamma0[0], 0.0])),
        int(dom_kind),
        dom_lo,
        dom_hi,
        centre,
        float(dom.radius),
    )
    grid._cache[key] = pack
    return pack


# --------------------------------------------------------------------------
# admissible-strategy simulation


def simulate_admissible(
    strategy: AdmissibleStrategy,
    x0,
    ell0: int,
    params: SimParams,
    spec: ProblemSpec,
    grid: Grid | None = None,
    penalized_cost: bool = False,
    epsilon: float | None = None,
    t_max: float | None = None,
    on_step=None,
) -> PathCostEstimate:
    """Estimate the cost of an arbitrary admissible strategy.

    Default costs are the original ones: running h dt + g * rate dt for the
    continuous control part, a 16-point Gauss-Legendre line integral of g
    for each jump, and the switching costs.  With ``penalized_cost=True``
    the running control cost is the dual l_eps(rate) instead (the
    epsilon-penalized functional; requires ``epsilon`` and a jump-free
    strategy).  ``on_step`` is a debug hook called per step with
    (t, X, r, cost) on the still-alive paths.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not bool(spec.domain.contains(x0[None, :])[0]):
        raise OutOfDomainError(f"start point {x0.tolist()} outside the closed domain")
    if penalized_cost:
        if epsilon is None:
            raise ValueError("penalized_cost needs the penalty scale epsilon")
        if strategy.has_jumps:
            raise ValueError("penalized cost is defined for jump-free strategies")
    if t_max is None:
        if grid is None and params.t_max is None:
            raise ValueError("provide a grid or an explicit t_max")
        t_max = params.resolve_t_max(spec, grid) if params.t_max is None else params.t_max
    n_steps = params.n_steps(t_max)
    seeds = _spawn_generators(params.seed, params.n_paths)
    pen = Penalty(epsilon) if penalized_cost else None

    def worker(span):
        lo, hi = span
        return _admissible_chunk(
            strategy, spec, x0, ell0, params, n_steps, seeds[lo:hi], pen, on_step
        )

    costs, status = _run_chunks(worker, params.n_paths)
    return estimate_from_costs(
        costs,
        absorbed=int(np.sum(status == ABSORBED)),
        truncated=int(np.sum(status == TRUNCATED)),
        t_max=t_max,
        params=params,
        backend="numpy",
    )


def _admissible_chunk(
    strategy: AdmissibleStrategy,
    spec: ProblemSpec,
    x0: np.ndarray,
    ell0: int,
    params: SimParams,
    n_steps: int,
    seeds,
    pen: Penalty | None,
    on_step,
) -> tuple[np.ndarray, np.ndarray]:
    n = len(seeds)
    d = spec.dimension
    dt = params.dt
    sqrt_dt = np.sqrt(dt)
    theta = spec.costs.matrix
    co = spec.coefficients
    dom = spec.domain

    gens = [np.random.default_rng(s) for s in seeds]
    X = np.tile(x0, (n, 1))
    ell = np.full(n, ell0, dtype=np.int64)
    r = np.zeros(n)
    cost = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)
    alive = np.arange(n)

    step = 0
    while alive.size and step < n_steps:
        block = min(BLOCK_STEPS, n_steps - step)
        normals = np.empty((alive.size, block, d))
        for i, idx in enumerate(alive):
            normals[i] = gens[idx].standard_normal((block, d))

        Xa = X[alive]
        la = ell[alive]
        ra = r[alive]
        ca = cost[alive]
        sub = np.arange(alive.size)

        for j in range(block):
            if sub.size == 0:
                break
            t = (step + j) * dt
            x = Xa[sub]
            l = la[sub]
            targ = strategy.switches(t, x, l)
            fire = (targ >= 0) & (targ != l)
            if fire.any():
                hit = sub[fire]
                ca[hit] += np.exp(-ra[hit]) * theta[la[hit], targ[fire]]
                la[hit] = targ[fire]
                l = la[sub]
            dirs, rates, jumps = strategy.controls(t, x, l)
            if jumps is not None and np.any(jumps > 0):
                jmp = jumps > 0
                hit = sub[jmp]
                x_pre = Xa[hit]
                n_dir = dirs[jmp]
                dz = jumps[jmp]
                x_post = x_pre - n_dir * dz[:, None]
                if not np.all(dom.contains(x_post)):
                    raise InadmissibleJumpError("jump would leave the closed domain")
                # line integral of g along the jump segment
                seg = np.zeros(hit.size)
                for lam, w in zip(_GL_LAMBDA, _GL_W):
                    pts = x_pre - lam * n_dir * dz[:, None]
                    seg += w * _per_regime([c.g for c in co], pts, la[hit])
                ca[hit] += np.exp(-ra[hit]) * dz * seg
                Xa[hit] = x_post
                x = Xa[sub]
            g_vals = _per_regime([c.g for c in co], x, l)
            h_vals = _per_regime([c.h for c in co], x, l)
            c_vals = _per_regime([c.c for c in co], x, l)
            disc = np.exp(-ra[sub])
            if pen is not None:
                run_control = legendre_closed(rates, g_vals, pen)
            else:
                run_control = g_vals * rates
            ca[sub] += disc * (h_vals + run_control) * dt
            drift = _drift_at(spec, x, l) + dirs * rates[:, None]
            if params.zero_diffusion:
                Xa[sub] = x - drift * dt
            else:
                noise = _noise_at(spec, x, l, normals[sub, j, :])
                Xa[sub] = x - drift * dt + sqrt_dt * noise
            ra[sub] += c_vals * dt
            if on_step is not None:
                on_step(t, Xa[sub], ra[sub], ca[sub])
            inside = dom.strictly_inside(Xa[sub])
            dead = sub[~inside]
            status[alive[dead]] = ABSORBED
            sub = sub[inside]

        X[alive] = Xa
        ell[alive] = la
        r[alive] = ra
        cost[alive] = ca
        alive = alive[sub]
        step += block

    status[status == 0] = TRUNCATED
    return cost, status
