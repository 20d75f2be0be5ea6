"""Shift-invert Arnoldi solver for the linearized quadratic pencil.

The quadratic problem ``(A + alpha*B + alpha^2*C) phi = 0`` is
linearized companion-style as

    M0 = [[A, 0], [0, I]],   M1 = [[-B, -C], [I, 0]],
    M0 X = alpha * M1 X,     X = [phi; eta],  eta = alpha * phi.

Eigenvalues near a shift ``s`` are found by Arnoldi iteration on
``(M0 - s*M1)^{-1} M1`` (recovered as ``alpha = s + 1/theta``); applying
the operator only needs one sparse LU of ``A + s*B + s^2*C`` per shift
because the second block row can be eliminated.  Every reported pair is
certified by its relative quadratic residual, independently of the
Arnoldi internals.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem
from .geometry import DofMap, Mesh

_LINEAR_RTOL = 1e-9
_MERGE_RTOL = 1e-8


class EigenSolverError(RuntimeError):
    pass


class FactorizationFailedError(EigenSolverError):
    def __init__(self, shift, reason=""):
        super().__init__(f"LU factorization failed at shift {shift}: {reason}")
        self.shift = shift


class NoConvergenceError(EigenSolverError):
    def __init__(self, shift, unconverged):
        super().__init__(
            f"{unconverged} requested eigenvalues did not converge at shift {shift}"
        )
        self.shift = shift


@dataclass(frozen=True)
class SolverConfig:
    """Shift grid, Arnoldi sizes, and the propagating-value filter."""

    shifts: tuple = (0.05, 0.15, 0.25, 0.35, 0.45)
    n_requested: int = 12
    subspace: int = 48
    max_restarts: int = 12
    tol: float = 1e-9
    max_arg: float = math.atan(0.1)
    window: tuple = (0.0, 0.5)
    seed: int = 7
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shifts", tuple(complex(s) for s in self.shifts))
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        if self.tol <= 0:
            raise ValueError("residual tolerance must be positive")
        if self.subspace <= self.n_requested:
            raise ValueError("subspace size must exceed n_requested")
        if self.window[1] <= self.window[0]:
            raise ValueError("empty real-part window")


@dataclass
class LinearizedPencil:
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    n: int
    system: AssembledSystem = None  # block matrices, kept for fast solves


@dataclass
class EigenPair:
    """Certified eigenpair of the quadratic pencil.

    ``phi`` is scaled to unit P-norm; ``residual`` is the relative
    quadratic residual; ``eta_gap`` measures the auxiliary identity
    ||eta - alpha*phi|| / ||phi|| of the linearized eigenvector.
    """

    alpha: complex
    phi: np.ndarray
    residual: float
    shift: complex
    eta_gap: float


@dataclass
class PropagatingValue:
    alpha: complex
    phi: np.ndarray
    residual: float
    shift: complex


def linearize(sys: AssembledSystem) -> LinearizedPencil:
    n = sys.n_dofs
    eye = sp.identity(n, dtype=np.complex128, format="csr")
    M0 = sp.bmat([[sys.A, None], [None, eye]], format="csr")
    M1 = sp.bmat([[-sys.B, -sys.C], [eye, None]], format="csr")
    return LinearizedPencil(M0=M0, M1=M1, n=n, system=sys)


def matrix_norms(sys: AssembledSystem) -> tuple:
    def one_norm(m):
        return float(np.max(np.abs(m).sum(axis=0))) if m.nnz else 0.0

    return one_norm(sys.A), one_norm(sys.B), one_norm(sys.C)


def quadratic_residual(sys: AssembledSystem, alpha: complex, phi: np.ndarray,
                       norms: tuple = None) -> float:
    """Relative residual ||(A + aB + a^2 C) phi|| / ((||A|| + |a| ||B|| + |a|^2 ||C||) ||phi||)."""
    if norms is None:
        norms = matrix_norms(sys)
    na, nb, nc = norms
    r = sys.A @ phi + alpha * (sys.B @ phi) + alpha ** 2 * (sys.C @ phi)
    denom = (na + abs(alpha) * nb + abs(alpha) ** 2 * nc) * np.linalg.norm(phi)
    return float(np.linalg.norm(r) / denom)


def _shift_operator(pencil: LinearizedPencil, s: complex):
    """Return x -> (M0 - s M1)^{-1} M1 x using one LU of A + sB + s^2 C."""
    sysm = pencil.system
    n = pencil.n
    if sysm is not None:
        Q = (sysm.A + s * sysm.B + (s * s) * sysm.C).tocsc()
        try:
            lu = spla.splu(Q)
        except RuntimeError as exc:
            raise FactorizationFailedError(s, str(exc)) from exc
        probe = lu.solve(np.ones(n, dtype=np.complex128))
        if not np.all(np.isfinite(probe)):
            raise FactorizationFailedError(s, "singular factor")
        B = sysm.B.tocsr()
        C = sysm.C.tocsr()

        def apply(v):
            v1 = v[:n]
            v2 = v[n:]
            y1 = -(B @ v1) - (C @ v2)
            w1 = lu.solve(y1 - s * (C @ v1))
            w2 = v1 + s * w1
            return np.concatenate([w1, w2])

        return apply

    # generic fallback: factorize the full 2n x 2n pencil
    M = (pencil.M0 - s * pencil.M1).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        raise FactorizationFailedError(s, str(exc)) from exc
    M1 = pencil.M1.tocsr()

    def apply(v):
        return lu.solve(M1 @ v)

    return apply


def _orthogonalize(w, basis, count):
    """MGS of w against the first ``count`` rows of basis, coefficients returned."""
    coeffs = np.zeros(count, dtype=np.complex128)
    for i in range(count):
        hij = np.vdot(basis[i], w)
        w -= hij * basis[i]
        coeffs[i] += hij
    return coeffs


def _arnoldi(apply_t, n2: int, m: int, n_wanted: int, max_restarts: int,
             seed_key, shift) -> tuple:
    """Restarted Arnoldi with MGS, one reorthogonalization pass, and locking.

    Converged Ritz vectors are locked and deflated from later restart
    cycles.  Returns (thetas, ritz_vectors) for the n_wanted largest
    |theta|; raises NoConvergenceError when restarts are exhausted.
    """
    rng = np.random.default_rng(seed_key)

    def fresh():
        w = rng.standard_normal(n2) + 1j * rng.standard_normal(n2)
        return w / np.linalg.norm(w)

    def ritz(H, mh, invariant, nw):
        theta, Y = np.linalg.eig(H[:mh, :mh])
        order = np.argsort(-np.abs(theta))
        theta = theta[order][:nw]
        Y = Y[:, order][:, :nw]
        beta = 0.0 if invariant else abs(H[mh, mh - 1])
        rel = beta * np.abs(Y[mh - 1, :]) / np.maximum(np.abs(theta), 1e-300)
        return theta, Y, rel

    v = fresh()
    m = min(m, n2)
    n_wanted = min(n_wanted, m)

    n_locked = 0
    locked = np.zeros((n_wanted, n2), dtype=np.complex128)
    exhausted = False
    first_cycle_done = False

    for cycle in range(max_restarts + 1):
        n_left = n_wanted - n_locked
        if n_left <= 0:
            break
        _orthogonalize(v, locked, n_locked)
        nv = np.linalg.norm(v)
        if nv < 1e-200:
            v = fresh()
            _orthogonalize(v, locked, n_locked)
            nv = np.linalg.norm(v)
        v /= nv

        mc = min(m, n2 - n_locked)
        V = np.zeros((mc + 1, n2), dtype=np.complex128)
        H = np.zeros((mc + 1, mc), dtype=np.complex128)
        V[0] = v
        mh = mc
        invariant = False
        for j in range(mc):
            w = apply_t(V[j])
            _orthogonalize(w, locked, n_locked)
            H[: j + 1, j] += _orthogonalize(w, V, j + 1)
            # one reorthogonalization pass (matrix form: w is already
            # nearly orthogonal, this only cleans up roundoff); conjugate
            # the vector, not the basis, to avoid large temporaries
            if n_locked:
                cw = np.conj(locked[:n_locked] @ np.conj(w))
                w -= locked[:n_locked].T @ cw
            h2 = np.conj(V[: j + 1] @ np.conj(w))
            w -= V[: j + 1].T @ h2
            H[: j + 1, j] += h2
            hn = np.linalg.norm(w)
            H[j + 1, j] = hn
            if hn <= 1e-13 * max(1.0, np.abs(H[: j + 2, : j + 1]).max()):
                mh = j + 1
                invariant = True
                break
            V[j + 1] = w / hn
            # early exit once the wanted Ritz values have settled
            if j + 1 >= n_left + 4 and (j + 1) % 4 == 0:
                _, _, rel = ritz(H, j + 1, False, min(n_left, j + 1))
                if np.all(rel <= _LINEAR_RTOL):
                    mh = j + 1
                    break

        nw = min(n_left, mh)
        theta, Y, rel = ritz(H, mh, invariant, nw)
        newly = np.arange(nw) if invariant else np.flatnonzero(rel <= _LINEAR_RTOL)

        if not first_cycle_done and newly.size >= n_wanted:
            # everything converged in one Krylov space: the Ritz vectors
            # are returned directly, no deflation bookkeeping needed
            return theta, V[:mh].T @ Y

        first_cycle_done = True
        for idx in newly:
            if n_locked >= n_wanted:
                break
            x = V[:mh].T @ Y[:, idx]
            _orthogonalize(x, locked, n_locked)
            nx = np.linalg.norm(x)
            if nx < 1e-200:
                continue
            locked[n_locked] = x / nx
            n_locked += 1
        if n_locked >= n_wanted:
            break
        if invariant:
            # reachable space exhausted; try a fresh direction
            if mh >= n2 - n_locked:
                exhausted = True
                break
            v = fresh()
            continue
        remaining = [i for i in range(nw) if i not in set(newly)]
        comb = V[:mh].T @ Y[:, remaining].sum(axis=1) if remaining else fresh()
        nv = np.linalg.norm(comb)
        if nv == 0:
            comb = fresh()
            nv = np.linalg.norm(comb)
        v = comb / nv

    if n_locked < n_wanted and not exhausted:
        raise NoConvergenceError(shift, n_wanted - n_locked)

    # locking orthonormalizes, so the stored directions span the converged
    # invariant subspace rather than individual eigenvectors; recover the
    # eigenpairs from the projection of the operator onto that subspace
    Q = locked[:n_locked]
    TQ = np.array([apply_t(q) for q in Q])
    S = Q.conj() @ TQ.T
    theta, Z = np.linalg.eig(S)
    order = np.argsort(-np.abs(theta))
    return theta[order], (Q.T @ Z)[:, order]


def _solve_one_shift(pencil: LinearizedPencil, cfg: SolverConfig, idx: int) -> list:
    s = cfg.shifts[idx]
    apply_t = _shift_operator(pencil, s)
    n = pencil.n
    thetas, X = _arnoldi(
        apply_t, 2 * n, cfg.subspace, cfg.n_requested, cfg.max_restarts,
        seed_key=[cfg.seed, idx], shift=s,
    )
    sysm = pencil.system
    norms = matrix_norms(sysm) if sysm is not None else None
    pairs = []
    for theta, x in zip(thetas, X.T):
        if theta == 0:
            continue
        alpha = s + 1.0 / theta
        phi = x[:n]
        eta = x[n:]
        nphi = np.linalg.norm(phi)
        if nphi < 1e-300:
            continue
        eta_gap = float(np.linalg.norm(eta - alpha * phi) / nphi)
        if sysm is not None:
            res = quadratic_residual(sysm, alpha, phi, norms)
            pn = math.sqrt(max(np.vdot(phi, sysm.P @ phi).real, 1e-300))
        else:
            r = pencil.M0 @ x - alpha * (pencil.M1 @ x)
            res = float(np.linalg.norm(r) / np.linalg.norm(x))
            pn = nphi
        if res > cfg.tol:
            continue
        pairs.append(EigenPair(alpha=complex(alpha), phi=phi / pn,
                               residual=res, shift=s, eta_gap=eta_gap))
    return pairs


def solve_shift_invert(pencil: LinearizedPencil, cfg: SolverConfig) -> list:
    """Solve near every shift, certify residuals, and merge duplicates."""
    indices = range(len(cfg.shifts))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            per_shift = list(pool.map(
                lambda i: _solve_one_shift(pencil, cfg, i), indices
            ))
    else:
        per_shift = [_solve_one_shift(pencil, cfg, i) for i in indices]

    pairs = [p for chunk in per_shift for p in chunk]
    pairs.sort(key=lambda p: (p.alpha.real, p.alpha.imag))
    merged = []
    for p in pairs:
        if merged and abs(p.alpha - merged[-1].alpha) < _MERGE_RTOL * (1 + abs(p.alpha)):
            if p.residual < merged[-1].residual:
                merged[-1] = p
        else:
            merged.append(p)
    return merged


def filter_propagating(pairs: list, cfg: SolverConfig) -> list:
    """Keep small-argument eigenvalues inside the real-part window."""
    lo, hi = cfg.window
    kept = [
        p for p in pairs
        if abs(cmath.phase(p.alpha)) <= cfg.max_arg and lo <= p.alpha.real <= hi
    ]
    kept.sort(key=lambda p: -p.alpha.real)
    return [
        PropagatingValue(alpha=p.alpha, phi=p.phi, residual=p.residual, shift=p.shift)
        for p in kept
    ]


def check_pair_symmetry(pairs: list, tol: float = 1e-6) -> dict:
    """Report, for each alpha with |Re alpha| > tol, the distance to some -alpha."""
    alphas = np.array([p.alpha for p in pairs])
    entries = []
    all_matched = True
    for a in alphas:
        if abs(a.real) <= tol:
            entries.append({"alpha": complex(a), "matched": True, "distance": 0.0})
            continue
        dist = float(np.min(np.abs(alphas + a)))
        ok = dist <= tol
        all_matched &= ok
        entries.append({"alpha": complex(a), "matched": ok, "distance": dist})
    return {"all_matched": bool(all_matched), "entries": entries}


def nodal_values(dofs: DofMap, phi: np.ndarray) -> np.ndarray:
    """Coefficient vector expanded to all mesh nodes (Dirichlet nodes are 0)."""
    out = np.zeros(dofs.node_to_dof.shape[0], dtype=np.complex128)
    mask = dofs.node_to_dof >= 0
    out[mask] = phi[dofs.node_to_dof[mask]]
    return out


def interp_p1(mesh: Mesh, nodal: np.ndarray, x1, x2) -> np.ndarray:
    """P1 interpolation on the structured mesh at arbitrary points."""
    if mesh.grid_x is None:
        raise ValueError("mesh lacks structured-grid metadata")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    gx, gy = mesh.grid_x, mesh.grid_y
    nx = gx.size - 1
    i = np.clip(np.searchsorted(gx, x1, side="right") - 1, 0, nx - 1)
    j = np.clip(np.searchsorted(gy, x2, side="right") - 1, 0, gy.size - 2)
    xi = (x1 - gx[i]) / (gx[i + 1] - gx[i])
    et = (x2 - gy[j]) / (gy[j + 1] - gy[j])
    ll = j * (nx + 1) + i
    v_ll = nodal[ll]
    v_lr = nodal[ll + 1]
    v_ul = nodal[ll + nx + 1]
    v_ur = nodal[ll + nx + 2]
    lower = xi >= et
    out = np.where(
        lower,
        v_ll * (1 - xi) + v_lr * (xi - et) + v_ur * et,
        v_ll * (1 - et) + v_ur * xi + v_ul * (et - xi),
    )
    return out


def mode_field(pair, mesh: Mesh, dofs: DofMap, grid: tuple) -> tuple:
    """Sample u(x1, x2) = phi(x) * exp(i alpha x1) on a regular grid.

    Returns (x1, x2, U) with U[j, i] = u(x1[i], x2[j]).
    """
    n1, n2 = (grid, grid) if np.isscalar(grid) else grid
    x1 = np.linspace(mesh.grid_x[0], mesh.grid_x[-1], n1)
    x2 = np.linspace(mesh.grid_y[0], mesh.grid_y[-1], n2)
    nodal = nodal_values(dofs, pair.phi)
    X1, X2 = np.meshgrid(x1, x2)
    U = interp_p1(mesh, nodal, X1.ravel(), X2.ravel()).reshape(n2, n1)
    U = U * np.exp(1j * pair.alpha * X1)
    return x1, x2, U
