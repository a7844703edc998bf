"""Counting-field Floquet master-equation generator, periodic steady state,
and reservoir heat currents.

The generator acts on vectorized density matrices (column stacking,
vec(A X B) = (B^T kron A) vec(X)) and is stored by harmonic components
L(t) = sum_q exp(i q w t) L_q.  Each reservoir contributes four dissipator
terms built from its static coupling operator S and two rate-filtered
periodic kernels

    G1(t) = sum_e J(D_e) N(D_e)     a_e e^{i n_e w t} |r_e(t)><r'_e(t)| ,
    G2(t) = sum_e J(D_e) [1+N(D_e)] a_e e^{i n_e w t} |r_e(t)><r'_e(t)| ,

where e runs over the Floquet jump decomposition of S, D_e is the transition
frequency and a_e the entry amplitude:

    L_diss(t) rho = - S G1(t) rho + S rho G2(t) + G1(t) rho S - rho G2(t) S .

The counting-field derivative keeps only the two sandwich terms with weights
-D on the emission sandwich (S rho G2) and +D on the absorption sandwich
(G1 rho S), so the heat current into the supersystem from reservoir nu is
Q_nu(t) = Tr{S rho(t) G2'(t)} + Tr{G1'(t) rho(t) S}.  The principal-value
(Lamb-shift) contribution is omitted.

The periodic steady state solves the block system
i n w rho_n = sum_k L_k rho_{n-k} by a dense SVD null-space solve or, for
larger problems, a sparse bordered-LU solve with the trace condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bath import SpectralDensity, bose_occupation
from .floquet import FloquetSolution, JumpDecomposition
from .model import PeriodicOperator


class SteadyStateError(RuntimeError):
    """Null-space solve failed or its invariants are violated."""


class DegenerateSteadyStateError(SteadyStateError):
    """More than one periodic steady state within numerical tolerance."""


def thermal_rates(
    density: SpectralDensity, beta: float, delta: float, delta_floor: float = 1e-12
) -> tuple[float, float]:
    """Absorption and emission rates (J N, J (1 + N)) at transition frequency
    ``delta``, using the odd-extended spectral density.

    Both rates are continuous through delta = 0 with common limit
    slope(J)/beta, evaluated explicitly below ``delta_floor`` where the naive
    expression is 0/0.
    """
    if abs(delta) < delta_floor:
        r = density.slope_at_zero() / beta
        return r, r
    if delta > 0:
        j = density.evaluate(delta)
        n = bose_occupation(delta, beta)
        return j * n, j * (1.0 + n)
    j = density.evaluate(-delta)
    n = bose_occupation(-delta, beta)
    return j * (1.0 + n), j * n


@dataclass(frozen=True)
class BathChannel:
    """One reservoir: its label, static coupling operator, spectral density
    and inverse temperature."""

    name: str
    coupling: np.ndarray
    density: SpectralDensity
    beta: float


@dataclass(frozen=True)
class ChannelKernels:
    """Harmonic components of a reservoir's rate-filtered kernels."""

    coupling: np.ndarray
    g1: dict[int, np.ndarray]
    g2: dict[int, np.ndarray]
    g1_prime: dict[int, np.ndarray]
    g2_prime: dict[int, np.ndarray]


def _spre(x: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(x.shape[0]), x)


def _spost(x: np.ndarray) -> np.ndarray:
    return np.kron(x.T, np.eye(x.shape[0]))


def _channel_kernels(
    channel: BathChannel,
    jumps: JumpDecomposition,
    fs: FloquetSolution,
    delta_floor: float,
    prune_rel: float,
) -> ChannelKernels:
    d = fs.dim
    k = fs.k_ext
    n_e = jumps.n_idx
    if len(jumps) == 0:
        return ChannelKernels(channel.coupling, {}, {}, {}, {})
    n_min, n_max = int(n_e.min()), int(n_e.max())
    n_vals = np.arange(n_min, n_max + 1)

    # per-harmonic weight matrices W[n][r, r'] for the four kernels
    shape = (n_vals.size, d, d)
    w1 = np.zeros(shape, dtype=complex)
    w2 = np.zeros(shape, dtype=complex)
    w1p = np.zeros(shape, dtype=complex)
    w2p = np.zeros(shape, dtype=complex)
    for e in range(len(jumps)):
        gn, ge = thermal_rates(channel.density, channel.beta, jumps.delta[e], delta_floor)
        amp = jumps.amplitude[e]
        ni = int(jumps.n_idx[e]) - n_min
        r, rp = int(jumps.r_idx[e]), int(jumps.rp_idx[e])
        w1[ni, r, rp] += gn * amp
        w2[ni, r, rp] += ge * amp
        w1p[ni, r, rp] += jumps.delta[e] * gn * amp
        w2p[ni, r, rp] += -jumps.delta[e] * ge * amp

    # V_m has |u_r^(m)| as columns; kernel harmonic q collects
    # V_{m'} W_n V_m^dag over all n + m' - m = q
    v = np.transpose(fs.modes, (1, 2, 0))  # [m, component, r]
    q_span = n_max + 2 * k - (n_min - 2 * k) + 1
    q_off = -(n_min - 2 * k)
    acc = np.zeros((4, q_span, d, d), dtype=complex)
    block_norm = np.sqrt(np.sum(np.abs(v) ** 2, axis=(1, 2)))
    for ni, n in enumerate(n_vals):
        wn = (w1[ni], w2[ni], w1p[ni], w2p[ni])
        scale = max(np.max(np.abs(w)) for w in wn)
        if scale == 0.0:
            continue
        for im in range(2 * k + 1):
            if block_norm[im] == 0.0:
                continue
            vmh = v[im].conj().T
            right = [w @ vmh for w in wn]
            for imp in range(2 * k + 1):
                if block_norm[imp] == 0.0:
                    continue
                q = n + (imp - im) + q_off
                vm = v[imp]
                for a in range(4):
                    acc[a, q] += vm @ right[a]

    mats = [{}, {}, {}, {}]
    peak = float(np.max(np.abs(acc))) if acc.size else 0.0
    floor = prune_rel * peak
    for qi in range(q_span):
        block = acc[:, qi]
        if float(np.max(np.abs(block))) <= floor:
            continue
        q = qi - q_off
        for a in range(4):
            mats[a][q] = np.ascontiguousarray(block[a])
    return ChannelKernels(channel.coupling, mats[0], mats[1], mats[2], mats[3])


@dataclass
class CountingLiouvillian:
    """Harmonic components of the generator and of its counting-field
    derivative for each reservoir."""

    h_harmonics: dict[int, np.ndarray]
    channels: dict[str, ChannelKernels]
    omega_L: float
    dim: int
    _component_cache: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @cached_property
    def support(self) -> int:
        """Largest |q| with a nonzero harmonic component."""
        qs = {abs(k) for k in self.h_harmonics}
        for ker in self.channels.values():
            for d in (ker.g1, ker.g2):
                qs |= {abs(q) for q in d}
        return max(qs) if qs else 0

    @cached_property
    def prime_support(self) -> int:
        qs = {0}
        for ker in self.channels.values():
            for d in (ker.g1_prime, ker.g2_prime):
                qs |= {abs(q) for q in d}
        return max(qs)

    def suggested_k_rho(self, target: float = 1e-8, cap: int = 12) -> int:
        """Harmonic count for the steady state: rho_n falls off roughly like
        (c / omega_L)^n with c the strength of the generator's oscillating
        part, so pick the smallest n with that estimate below ``target``."""
        c = 0.0
        for q, m in self.h_harmonics.items():
            if q != 0:
                c = max(c, float(np.max(np.abs(m))))
        for ker in self.channels.values():
            smax = float(np.max(np.abs(ker.coupling)))
            for dd in (ker.g1, ker.g2):
                for q, m in dd.items():
                    if q != 0:
                        c = max(c, smax * float(np.max(np.abs(m))))
        if c == 0.0:
            return 1
        ratio = min(c / self.omega_L, 0.5)
        k = math.ceil(math.log(target) / math.log(ratio))
        return int(np.clip(k, 2, cap))

    def component(self, q: int) -> np.ndarray:
        """Superoperator matrix L_q on the vectorized density space."""
        cached = self._component_cache.get(q)
        if cached is not None:
            return cached
        d = self.dim
        eye = np.eye(d)
        out = np.zeros((d * d, d * d), dtype=complex)
        hq = self.h_harmonics.get(q)
        if hq is not None:
            out += -1j * (_spre(hq) - _spost(hq))
        for ker in self.channels.values():
            s = ker.coupling
            g1 = ker.g1.get(q)
            g2 = ker.g2.get(q)
            if g1 is not None:
                out += -np.kron(eye, s @ g1) + np.kron(s.T, g1)
            if g2 is not None:
                out += np.kron(g2.T, s) - np.kron((g2 @ s).T, eye)
        self._component_cache[q] = out
        return out

    def apply_component(self, q: int, rho: np.ndarray) -> np.ndarray:
        """L_q acting on a density matrix, without building superoperators."""
        out = np.zeros_like(rho)
        hq = self.h_harmonics.get(q)
        if hq is not None:
            out += -1j * (hq @ rho - rho @ hq)
        for ker in self.channels.values():
            s = ker.coupling
            g1 = ker.g1.get(q)
            g2 = ker.g2.get(q)
            if g1 is not None:
                out += -s @ g1 @ rho + g1 @ rho @ s
            if g2 is not None:
                out += s @ rho @ g2 - rho @ g2 @ s
        return out

    def matrix_at_time(self, t: float) -> np.ndarray:
        """Dense superoperator L(t) = sum_q exp(i q w t) L_q."""
        d2 = self.dim**2
        out = np.zeros((d2, d2), dtype=complex)
        for q in range(-self.support, self.support + 1):
            lq = self.component(q)
            if np.any(lq):
                out += np.exp(1j * q * self.omega_L * t) * lq
        return out

    def trace_defect_at(self, t: float) -> float:
        """Norm of trace compose L(t); zero for a probability-conserving
        generator."""
        d = self.dim
        tr = np.zeros(d * d)
        tr[:: d + 1] = 1.0
        return float(np.max(np.abs(tr @ self.matrix_at_time(t))))


def build_liouvillian(
    h: PeriodicOperator,
    fs: FloquetSolution,
    channels: list[BathChannel],
    jumps: list[JumpDecomposition],
    delta_floor: float = 1e-12,
    prune_rel: float = 3e-12,
) -> CountingLiouvillian:
    """Assemble the harmonic generator components and their counting-field
    derivatives from per-reservoir Floquet jump decompositions.

    ``delta_floor`` selects the degenerate-frequency rate rule; ``prune_rel``
    drops kernel harmonics below that fraction of the largest one (the
    four kernels of a reservoir are pruned jointly, which preserves exact
    trace annihilation of every retained harmonic).
    """
    if len(channels) != len(jumps):
        raise ValueError("need one jump decomposition per channel")
    if not channels:
        raise ValueError("at least one reservoir is required")
    kernels: dict[str, ChannelKernels] = {}
    for ch, jd in zip(channels, jumps):
        if ch.name in kernels:
            raise ValueError(f"duplicate channel name {ch.name!r}")
        kernels[ch.name] = _channel_kernels(ch, jd, fs, delta_floor, prune_rel)
    return CountingLiouvillian(
        h_harmonics=dict(h.harmonics),
        channels=kernels,
        omega_L=h.omega_L,
        dim=h.dim,
    )


@dataclass(frozen=True)
class PeriodicDensityMatrix:
    """Harmonic components rho_n of the T-periodic steady state."""

    harmonics: dict[int, np.ndarray]
    omega_L: float

    @property
    def dim(self) -> int:
        return self.harmonics[0].shape[0]

    @property
    def k_rho(self) -> int:
        return max(abs(n) for n in self.harmonics)

    @property
    def average(self) -> np.ndarray:
        """Period average of rho(t): the zero harmonic."""
        return self.harmonics[0]

    def component(self, n: int) -> np.ndarray:
        mat = self.harmonics.get(n)
        if mat is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return mat

    def at_time(self, t: float) -> np.ndarray:
        out = np.zeros_like(self.harmonics[0])
        for n, mat in self.harmonics.items():
            out += np.exp(1j * n * self.omega_L * t) * mat
        return out


@dataclass(frozen=True)
class SteadyStateInfo:
    method: str
    k_rho: int
    size: int
    residual: float
    sigma_null: float | None
    sigma_second: float | None
    trace_defect: float
    hermiticity_defect: float
    min_eigenvalue: float


def _block_system_dense(liouv: CountingLiouvillian, k_rho: int) -> np.ndarray:
    d2 = liouv.dim**2
    nb = 2 * k_rho + 1
    big = np.zeros((nb * d2, nb * d2), dtype=complex)
    comps = {
        q: liouv.component(q)
        for q in range(-liouv.support, liouv.support + 1)
        if np.any(liouv.component(q))
    }
    for n in range(-k_rho, k_rho + 1):
        i = (n + k_rho) * d2
        big[i : i + d2, i : i + d2] -= 1j * n * liouv.omega_L * np.eye(d2)
        for q, lq in comps.items():
            m = n - q
            if m < -k_rho or m > k_rho:
                continue
            j = (m + k_rho) * d2
            big[i : i + d2, j : j + d2] += lq
    return big


def _block_system_sparse(liouv: CountingLiouvillian, k_rho: int):
    from scipy import sparse

    d2 = liouv.dim**2
    comps = {}
    for q in range(-liouv.support, liouv.support + 1):
        lq = liouv.component(q)
        if np.any(lq):
            comps[q] = sparse.csr_matrix(lq)
    nb = 2 * k_rho + 1
    grid = [[None] * nb for _ in range(nb)]
    eye = sparse.identity(d2, dtype=complex, format="csr")
    for n in range(-k_rho, k_rho + 1):
        for q, lq in comps.items():
            m = n - q
            if -k_rho <= m <= k_rho:
                cur = grid[n + k_rho][m + k_rho]
                grid[n + k_rho][m + k_rho] = lq if cur is None else cur + lq
        diag = -1j * n * liouv.omega_L * eye
        cur = grid[n + k_rho][n + k_rho]
        grid[n + k_rho][n + k_rho] = diag if cur is None else cur + diag
    return sparse.bmat(grid, format="csr")


def _apply_block_system(liouv: CountingLiouvillian, k_rho: int, x: np.ndarray) -> np.ndarray:
    """Matrix-free action of the harmonic block system on a stacked vector of
    density-matrix harmonics (column-stacked within each block)."""
    d = liouv.dim
    d2 = d * d
    nb = 2 * k_rho + 1
    mats = [x[i * d2 : (i + 1) * d2].reshape(d, d).T for i in range(nb)]
    out = np.empty_like(x)
    supp = liouv.support
    for n in range(-k_rho, k_rho + 1):
        acc = (-1j * n * liouv.omega_L) * mats[n + k_rho]
        for q in range(max(-supp, n - k_rho), min(supp, n + k_rho) + 1):
            acc = acc + liouv.apply_component(q, mats[n - q + k_rho])
        out[(n + k_rho) * d2 : (n + k_rho + 1) * d2] = acc.T.reshape(-1)
    return out


def _solve_bordered_gmres(liouv: CountingLiouvillian, k_rho: int):
    """Bordered solve by GMRES with a block-diagonal preconditioner.

    The system action is applied matrix-free through the channel kernels;
    only the diagonal blocks L_0 - i n w are formed densely (for the
    preconditioner factorization).  The harmonic off-diagonal coupling is
    weak, so preconditioned GMRES converges in a handful of iterations.
    Returns (solution vector, relative residual of the original system).
    """
    from scipy.linalg import lu_factor, lu_solve
    from scipy.sparse.linalg import LinearOperator, gmres

    d = liouv.dim
    d2 = d * d
    nb = 2 * k_rho + 1
    size = nb * d2
    row0 = k_rho * d2
    tr_cols = row0 + np.arange(d) * (d + 1)

    # preconditioner factors hold nb dense d^2 x d^2 blocks; keep a hard
    # memory guard so oversized problems fail cleanly instead of thrashing
    factor_bytes = nb * (d2**2) * 16
    if factor_bytes > 1_500_000_000:
        raise SteadyStateError(
            f"gmres preconditioner would need {factor_bytes / 1e9:.1f} GB "
            f"(n_fock too large); reduce the problem size"
        )
    l0 = liouv.component(0)

    # bordered operator: trace condition replaces one redundant row of the
    # n = 0 block (the trace functional is an exact left null vector there)
    def matvec(x: np.ndarray) -> np.ndarray:
        y = _apply_block_system(liouv, k_rho, x)
        y[row0] = x[tr_cols].sum()
        return y

    factors = []
    for n in range(-k_rho, k_rho + 1):
        block = l0 - 1j * n * liouv.omega_L * np.eye(d2)
        if n == 0:
            block = block.copy()
            block[0, :] = 0.0
            block[0, np.arange(d) * (d + 1)] = 1.0
        factors.append(lu_factor(block))

    def precond(x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for i in range(nb):
            seg = slice(i * d2, (i + 1) * d2)
            out[seg] = lu_solve(factors[i], x[seg])
        return out

    op = LinearOperator((size, size), matvec=matvec, dtype=complex)
    pre = LinearOperator((size, size), matvec=precond, dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    rhs[row0] = 1.0
    x0 = precond(rhs)
    # one full-memory cycle; restarting loses superlinear convergence here
    vec, code = gmres(
        op, rhs, x0=x0, M=pre, rtol=1e-13, atol=0.0, maxiter=1, restart=min(180, size)
    )
    res = _apply_block_system(liouv, k_rho, vec)
    res[row0] = 0.0  # residual of the original (singular) system rows
    residual = float(np.linalg.norm(res) / np.linalg.norm(vec))
    if residual > 1e-10:
        # generators with very slow modes (e.g. an undamped mode cooled only
        # through drive sidebands) defeat the block preconditioner; escalate
        raise SteadyStateError(
            f"preconditioned GMRES stalled (code {code}, residual {residual:.2e})"
        )
    return vec, residual


def steady_state(
    liouv: CountingLiouvillian,
    k_rho: int | None = None,
    method: str = "auto",
    dense_size_limit: int = 1200,
    trace_tol: float = 1e-10,
    positivity_tol: float = 1e-8,
    residual_tol: float = 1e-8,
) -> tuple[PeriodicDensityMatrix, SteadyStateInfo]:
    """Solve the harmonic steady-state block system.

    ``method`` is "svd" (dense null space, reports singular values), "lu"
    (sparse bordered direct solve), "gmres" (bordered solve, block-diagonal
    preconditioner), or "auto": svd for small systems, otherwise gmres with
    automatic fallback to lu when the Krylov iteration stalls (dense SVD
    scales as the cube of (2 k_rho + 1) d^2 and is kept for diagnostics and
    cross-validation).  In every bordered variant the trace condition
    replaces one redundant row of the n = 0 block (the trace functional on
    that block is an exact left null vector of the system).  The returned
    harmonics are trace-normalized and Hermitian-symmetrized
    (rho_{-n} = rho_n^dag is an exact property of the solution); positivity
    of rho(t) and the residual of the block equation are checked.
    """
    if k_rho is None:
        k_rho = liouv.suggested_k_rho()
    d = liouv.dim
    d2 = d * d
    nb = 2 * k_rho + 1
    size = nb * d2
    if method == "auto":
        method = "svd" if size <= dense_size_limit else "gmres"

    sigma_null = sigma_second = None
    if method == "svd":
        big = _block_system_dense(liouv, k_rho)
        _, s, vh = np.linalg.svd(big)
        sigma_null = float(s[-1])
        sigma_second = float(s[-2])
        rank_tol = float(s[0]) * 1e-8
        n_null = int(np.sum(s < rank_tol))
        if n_null != 1:
            raise DegenerateSteadyStateError(
                f"null space dimension {n_null} (expected 1); "
                f"second-smallest singular value {sigma_second:.3e}"
            )
        vec = vh[-1].conj()
        residual = sigma_null / float(s[0])
    elif method == "lu":
        from scipy.sparse.linalg import splu

        fill_bytes = size * min(2 * liouv.support * d2, size) * 16
        if fill_bytes > 2_500_000_000:
            raise SteadyStateError(
                f"direct factorization would need roughly {fill_bytes / 1e9:.0f} GB "
                "of fill (n_fock too large); reduce the problem size"
            )
        big = _block_system_sparse(liouv, k_rho)
        bordered = big.tolil(copy=True)
        row0 = k_rho * d2
        tr_cols = row0 + np.arange(d) * (d + 1)
        bordered.rows[row0] = [int(c) for c in tr_cols]
        bordered.data[row0] = [1.0 + 0.0j] * d
        rhs = np.zeros(size, dtype=complex)
        rhs[row0] = 1.0
        vec = splu(bordered.tocsc()).solve(rhs)
        res = big @ vec
        res[row0] = 0.0
        residual = float(np.linalg.norm(res) / np.linalg.norm(vec))
    elif method == "gmres":
        try:
            vec, residual = _solve_bordered_gmres(liouv, k_rho)
        except SteadyStateError:
            return steady_state(
                liouv,
                k_rho=k_rho,
                method="lu",
                dense_size_limit=dense_size_limit,
                trace_tol=trace_tol,
                positivity_tol=positivity_tol,
                residual_tol=residual_tol,
            )
    else:
        raise ValueError(f"unknown steady-state method {method!r}")

    blocks = vec.reshape(nb, d2)
    # column-stacking: vec index j*d + i holds element (i, j)
    rho = {n - k_rho: blocks[n].reshape(d, d).T.copy() for n in range(nb)}
    tr0 = np.trace(rho[0])
    if abs(tr0) < 1e-14:
        raise SteadyStateError("null vector has (numerically) traceless rho_0")
    for n in rho:
        rho[n] = rho[n] / tr0

    herm_defect = 0.0
    sym = {}
    for n in range(0, k_rho + 1):
        a = rho[n]
        b = rho[-n].conj().T
        herm_defect = max(herm_defect, float(np.max(np.abs(a - b))))
        avg = 0.5 * (a + b)
        sym[n] = avg
        sym[-n] = avg.conj().T
    trace_defect = max(
        float(abs(np.trace(sym[n]))) for n in sym if n != 0
    ) if k_rho > 0 else 0.0

    pruned = {
        n: m for n, m in sym.items() if n == 0 or np.max(np.abs(m)) > 1e-16
    }
    result = PeriodicDensityMatrix(harmonics=pruned, omega_L=liouv.omega_L)

    period = 2.0 * math.pi / liouv.omega_L
    min_eig = min(
        float(np.linalg.eigvalsh(result.at_time(f * period)).min())
        for f in (0.0, 1.0 / 6.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 5.0 / 6.0)
    )

    info = SteadyStateInfo(
        method=method,
        k_rho=k_rho,
        size=size,
        residual=residual,
        sigma_null=sigma_null,
        sigma_second=sigma_second,
        trace_defect=trace_defect,
        hermiticity_defect=herm_defect,
        min_eigenvalue=min_eig,
    )
    if trace_defect > trace_tol:
        raise SteadyStateError(
            f"off-harmonic trace {trace_defect:.3e} above {trace_tol:.1e}; "
            "raise k_rho / k_ext / n_fock"
        ) from None
    if min_eig < -positivity_tol:
        raise SteadyStateError(
            f"reconstructed rho(t) has negative eigenvalue {min_eig:.3e}; "
            "raise k_rho / k_ext / n_fock"
        )
    if residual > residual_tol:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} above {residual_tol:.1e}"
        )
    return result, info


@dataclass(frozen=True)
class HeatCurrent:
    """Time-resolved harmonics of the heat flow from one reservoir into the
    supersystem, and its period average (the zero harmonic)."""

    harmonics: dict[int, complex]
    average: float


def heat_current(
    liouv: CountingLiouvillian, rho: PeriodicDensityMatrix, name: str
) -> HeatCurrent:
    """Q_nu(t) = Tr{L'_nu(t) rho(t)}, positive when heat flows into the
    supersystem."""
    ker = liouv.channels.get(name)
    if ker is None:
        raise KeyError(f"no reservoir named {name!r}; have {sorted(liouv.channels)}")
    s = ker.coupling
    out: dict[int, complex] = {}
    for q, g2p in ker.g2_prime.items():
        for n, rn in rho.harmonics.items():
            val = complex(np.trace(s @ rn @ g2p))
            if val != 0.0:
                out[q + n] = out.get(q + n, 0.0) + val
    for q, g1p in ker.g1_prime.items():
        for n, rn in rho.harmonics.items():
            val = complex(np.trace(g1p @ rn @ s))
            if val != 0.0:
                out[q + n] = out.get(q + n, 0.0) + val
    avg = out.get(0, 0.0)
    return HeatCurrent(harmonics=out, average=float(avg.real))


def periodic_average_rate(
    liouv: CountingLiouvillian, rho: PeriodicDensityMatrix, observable: np.ndarray
) -> float:
    """Period average of d<O>/dt = Tr{O L(t) rho(t)} at steady state.

    Vanishes for any observable when rho solves the harmonic block system
    exactly, so the magnitude measures solve quality.
    """
    total = 0.0 + 0.0j
    for q in range(-liouv.support, liouv.support + 1):
        rn = rho.harmonics.get(-q)
        if rn is None:
            continue
        total += np.trace(observable @ liouv.apply_component(q, rn))
    return float(abs(total))


def secular_rate_solution(
    fs: FloquetSolution,
    channels: list[BathChannel],
    jumps: list[JumpDecomposition],
    delta_floor: float = 1e-12,
) -> tuple[np.ndarray, dict[str, float]]:
    """Secular (rate-equation) steady state in the Floquet basis.

    Keeps only population dynamics: transition rates
    W_nu[r' -> r] = sum_n 2 J_nu(D) N_nu(D) |a|^2 with D = eps_r - eps_r' +
    n w.  Returns steady populations and the period-averaged heat currents
    Q_nu = sum_entries D * rate * p_{r'} (diagonal entries with n != 0 are
    photon-assisted processes and do contribute).  This is the standard
    Born-Markov-secular treatment, kept for benchmarking; it is unreliable
    whenever quasienergy differences are comparable to the rates.
    """
    d = fs.dim
    rates = np.zeros((d, d))  # [r, r'] = W[r' -> r]
    per_channel = []
    for ch, jd in zip(channels, jumps):
        gammas = np.empty(len(jd))
        for e in range(len(jd)):
            gn, _ = thermal_rates(ch.density, ch.beta, jd.delta[e], delta_floor)
            gammas[e] = 2.0 * gn * float(np.abs(jd.amplitude[e]) ** 2)
        per_channel.append(gammas)
        off = jd.r_idx != jd.rp_idx
        np.add.at(rates, (jd.r_idx[off], jd.rp_idx[off]), gammas[off])
    gen = rates.copy()
    gen[np.diag_indices(d)] -= rates.sum(axis=0)
    _, s, vh = np.linalg.svd(gen)
    if s[-2] < s[0] * 1e-10:
        raise DegenerateSteadyStateError("secular rate matrix has degenerate kernel")
    p = vh[-1].real
    p = p / p.sum()
    if p.min() < -1e-9:
        raise SteadyStateError(f"secular populations not positive: min {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    p = p / p.sum()

    currents = {}
    for (ch, jd), gammas in zip(zip(channels, jumps), per_channel):
        currents[ch.name] = float(np.sum(jd.delta * gammas * p[jd.rp_idx]))
    return p, currents
