"""Bond scattering matrix, unitary evolution, and the secular function.

The torus coordinate `kappa` is a vector over edges with values in [0, 2pi).
All functions are pure in (graph, kappa) and build their own matrices, so they
can be mapped over points in parallel without shared state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoLoops, SingularPoint, UndefinedPhase, UnsupportedDimension
from .graphs import MetricGraph

TWO_PI = 2.0 * np.pi

KERNEL_TOL = 1e-8   # singular values of (1 - U) below this count as zero


def reduce_torus(x):
    """Map coordinates into [0, 2pi)."""
    t = np.asarray(x, dtype=float) % TWO_PI
    # x % 2pi can round up to exactly 2pi for tiny negative x
    return np.where(t == TWO_PI, 0.0, t)


def embed_half_open(theta):
    """r_0: angles into [0, 2pi)."""
    t = np.asarray(theta) % TWO_PI
    return np.where(t == TWO_PI, 0.0, t)


def embed_half_closed(theta):
    """r_{2pi}: angles into (0, 2pi]."""
    t = np.asarray(theta) % TWO_PI
    return np.where(t == 0.0, TWO_PI, t)


def bond_scattering(graph: MetricGraph) -> np.ndarray:
    """Real orthogonal 2E x 2E matrix: entry (d, d') is nonzero iff d' flows
    into the tail vertex of d; back-scatter entries are 2/deg - 1, all other
    transmissions 2/deg."""
    n = 2 * graph.E
    S = np.zeros((n, n))
    for d in range(n):
        v = graph.tail_of(d)
        coef = 2.0 / graph.degrees[v]
        for d_in in range(n):
            if graph.head_of(d_in) != v:
                continue
            S[d, d_in] = coef - 1.0 if d_in == (d ^ 1) else coef
    return S


def _phase_diag(graph: MetricGraph, kappa: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.repeat(kappa, 2))


def evolution_matrix(graph: MetricGraph, kappa, S: np.ndarray | None = None) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    if S is None:
        S = bond_scattering(graph)
    return _phase_diag(graph, kappa)[:, None] * S


def root_branch(graph: MetricGraph, kappa) -> complex:
    """The fixed branch of det(U)^(-1/2): i^(betti-1) * exp(-i sum kappa)."""
    beta = graph.topology.betti
    return (1j) ** (beta - 1) * np.exp(-1j * float(np.sum(kappa)))


def unitary_eig(U: np.ndarray):
    """Eigenvalues and an orthonormal eigenbasis of a unitary matrix via the
    complex Schur form (exact-arithmetic diagonal for normal matrices)."""
    T, Z = scipy.linalg.schur(U, output="complex")
    return np.diag(T).copy(), Z


def adjugate(M: np.ndarray) -> np.ndarray:
    """adj(M) with adj(M) M = det(M) I, for a general square matrix.

    Uses det * inv when M is comfortably invertible and falls back to minors
    otherwise.  The secular path never calls this; it uses the unitary
    eigen-decomposition form below.
    """
    M = np.asarray(M)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=M.dtype)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] > 1e-8 * max(1.0, sv[0]):
        return np.linalg.det(M) * np.linalg.inv(M)
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        rows = [r for r in range(n) if r != i]
        for j in range(n):
            cols = [c for c in range(n) if c != j]
            minor = M[np.ix_(rows, cols)]
            out[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return out


def adjugate_from_unitary_spectrum(eigenvalues: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """adj(1 - U) for unitary U = basis diag(eigenvalues) basis*."""
    w = 1.0 - eigenvalues
    n = len(w)
    # leave-one-out products prod_{i != j} (1 - lambda_i)
    pref = np.empty(n, dtype=complex)
    suff = np.empty(n, dtype=complex)
    acc = 1.0 + 0j
    for i in range(n):
        pref[i] = acc
        acc *= w[i]
    acc = 1.0 + 0j
    for i in range(n - 1, -1, -1):
        suff[i] = acc
        acc *= w[i]
    loo = pref * suff
    return (basis * loo) @ basis.conj().T


@dataclass
class SecularEvaluation:
    kappa: np.ndarray
    F: float
    imag_residual: float
    gradF: np.ndarray
    p: float
    m: np.ndarray | None          # per-edge weights, None off the kernel
    eigenphases: np.ndarray       # in [0, 2pi)
    kernel_dim: int
    kernel_vector: np.ndarray | None


def evaluate(graph: MetricGraph, kappa, S: np.ndarray | None = None,
             kernel_tol: float = KERNEL_TOL) -> SecularEvaluation:
    kappa = reduce_torus(kappa)
    U = evolution_matrix(graph, kappa, S)
    lam, Z = unitary_eig(U)
    pref = root_branch(graph, kappa)

    det_one_minus = np.prod(1.0 - lam)
    Fc = pref * det_one_minus
    adj = adjugate_from_unitary_spectrum(lam, Z)
    p = (-1j * pref * np.trace(adj)).real

    # Jacobi: d det(1 - U) / d kappa_e = -i tr(adj(1 - U) A_e U), and the
    # branch prefactor contributes -i F per coordinate.
    W = U @ adj
    diag = np.diagonal(W)
    per_edge = diag[0::2] + diag[1::2]
    gradFc = -1j * pref * (det_one_minus + per_edge)
    gradF = gradFc.real

    gaps = np.abs(1.0 - lam)
    kernel_dim = int(np.sum(gaps < kernel_tol))
    kernel_vector = None
    m = None
    if kernel_dim == 1:
        j = int(np.argmin(gaps))
        a = Z[:, j]
        kernel_vector = a
        m = np.abs(a[0::2]) ** 2 + np.abs(a[1::2]) ** 2

    return SecularEvaluation(
        kappa=kappa,
        F=float(Fc.real),
        imag_residual=float(abs(Fc.imag)),
        gradF=gradF,
        p=float(p),
        m=m,
        eigenphases=embed_half_open(np.angle(lam)),
        kernel_dim=kernel_dim,
        kernel_vector=kernel_vector,
    )


def weights(graph: MetricGraph, kappa, **kw) -> np.ndarray:
    ev = evaluate(graph, kappa, **kw)
    if ev.m is None:
        raise SingularPoint(
            f"kernel dimension {ev.kernel_dim} != 1 at kappa={ev.kappa}")
    return ev.m


# ---------------------------------------------------------------------------
# torus maps


def inversion(kappa) -> np.ndarray:
    return reduce_torus(-np.asarray(kappa, dtype=float))


def bridge_extension(graph: MetricGraph, kappa, bridge: int) -> np.ndarray:
    if bridge not in graph.topology.bridges:
        raise ValueError(f"edge {bridge} is not a bridge")
    out = reduce_torus(kappa).copy()
    out[bridge] = (out[bridge] + np.pi) % TWO_PI
    return out


def cut_flip(graph: MetricGraph, kappa, vertex: int, bridge: int) -> np.ndarray:
    """Flip the component of `vertex` in the bridge split: kappa_e picks up
    the far-side scattering phase and the far-side coordinates are inverted."""
    fac = bridge_factorization(graph, bridge, kappa, far_vertex=vertex)
    out = reduce_torus(kappa).copy()
    out[bridge] = (out[bridge] + fac.theta2) % TWO_PI
    out[list(fac.edges2)] = reduce_torus(-out[list(fac.edges2)])
    return out


# ---------------------------------------------------------------------------
# bridge factorization


@dataclass
class BridgeFactorization:
    bridge: int
    edges1: tuple[int, ...]      # undirected edges of the near component
    edges2: tuple[int, ...]
    g1: complex                  # includes the branch prefactor of the side
    g2: complex
    phase1: complex              # unimodular e^{i Theta_i}
    phase2: complex

    @property
    def theta1(self) -> float:
        return float(np.angle(self.phase1))

    @property
    def theta2(self) -> float:
        return float(np.angle(self.phase2))

    def secular_value(self, kappa_bridge: float) -> complex:
        z = np.exp(1j * kappa_bridge)
        return self.g1 * self.g2 / z * (1.0 - z * z * self.phase1 * self.phase2)


def _bridge_split(graph: MetricGraph, bridge: int) -> tuple[list[int], list[int]]:
    """Vertex sets of the two components of the graph minus the bridge; the
    first component contains the bridge's tail."""
    adj: list[list[int]] = [[] for _ in range(graph.V)]
    for i, e in enumerate(graph.edges):
        if i == bridge:
            continue
        adj[e.tail].append(e.head)
        adj[e.head].append(e.tail)
    comp = [-1] * graph.V
    for mark, start in ((0, graph.edges[bridge].tail), (1, graph.edges[bridge].head)):
        if comp[start] != -1:
            continue
        comp[start] = mark
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if comp[w] == -1:
                    comp[w] = mark
                    stack.append(w)
    side1 = [v for v in range(graph.V) if comp[v] == 0]
    side2 = [v for v in range(graph.V) if comp[v] == 1]
    return side1, side2


def bridge_factorization(graph: MetricGraph, bridge: int, kappa,
                         far_vertex: int | None = None) -> BridgeFactorization:
    """Split F across a bridge: F = g1 g2 e^{-i kappa_e} (1 - e^{2i kappa_e}
    e^{i Theta1} e^{i Theta2}).

    The bridge is oriented from side 1 to side 2; `far_vertex`, when given,
    forces its component to be side 2.
    """
    if bridge not in graph.topology.bridges:
        raise ValueError(f"edge {bridge} is not a bridge")
    kappa = reduce_torus(kappa)
    side1, side2 = _bridge_split(graph, bridge)
    if far_vertex is not None and far_vertex in side1:
        side1, side2 = side2, side1
    in1 = [False] * graph.V
    for v in side1:
        in1[v] = True

    edges1 = tuple(i for i, e in enumerate(graph.edges) if i != bridge and in1[e.tail])
    edges2 = tuple(i for i, e in enumerate(graph.edges) if i != bridge and not in1[e.tail])
    # directed bridge index pointing from side 1 into side 2
    d_f = 2 * bridge if in1[graph.edges[bridge].tail] else 2 * bridge + 1
    d_r = d_f ^ 1

    S = bond_scattering(graph)
    dir1 = [d for i in edges1 for d in (2 * i, 2 * i + 1)]
    dir2 = [d for i in edges2 for d in (2 * i, 2 * i + 1)]

    def side_data(dirs, t_col_from, t_row_at):
        Si = S[np.ix_(dirs, dirs)]
        t = S[dirs, t_col_from]
        t_row = S[t_row_at, dirs]
        z = np.exp(1j * kappa[[d // 2 for d in dirs]])
        D = z[:, None] * Si - np.eye(len(dirs))
        g_tilde = np.linalg.det(D) if len(dirs) else 1.0 + 0j
        r = S[t_row_at, t_col_from]
        if len(dirs):
            phase = r - t_row @ (np.linalg.pinv(D) @ (z * t))
        else:
            phase = r + 0j
        return g_tilde, complex(phase), z

    g1_tilde, phase1, _ = side_data(dir1, d_r, d_f)
    g2_tilde, phase2, _ = side_data(dir2, d_f, d_r)

    beta = graph.topology.betti
    g1 = (1j) ** (beta - 1) * np.exp(-1j * float(np.sum(kappa[list(edges1)]))) * g1_tilde
    g2 = np.exp(-1j * float(np.sum(kappa[list(edges2)]))) * g2_tilde
    if abs(g1_tilde) < 1e-13 or abs(g2_tilde) < 1e-13:
        raise UndefinedPhase(
            f"bridge {bridge}: a side determinant vanishes at kappa={kappa}")
    return BridgeFactorization(
        bridge=bridge, edges1=edges1, edges2=edges2,
        g1=complex(g1), g2=complex(g2),
        phase1=phase1 / abs(phase1), phase2=phase2 / abs(phase2),
    )


# ---------------------------------------------------------------------------
# loop factors


def loop_basis(graph: MetricGraph) -> tuple[np.ndarray, list[int]]:
    """Orthogonal change of basis sending each loop's directed pair (d, d-hat)
    to (d - d_hat)/sqrt2, (d + d_hat)/sqrt2.  Returns (Q, antisymmetric
    column indices); columns not belonging to loops are identity."""
    n = 2 * graph.E
    Q = np.eye(n)
    anti = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in graph.topology.loops:
        d, dr = 2 * i, 2 * i + 1
        Q[:, d] = 0.0
        Q[:, dr] = 0.0
        Q[d, d] = inv_sqrt2
        Q[dr, d] = -inv_sqrt2
        Q[d, dr] = inv_sqrt2
        Q[dr, dr] = inv_sqrt2
        anti.append(d)
    return Q, anti


def loop_reduced_determinant(graph: MetricGraph, kappa) -> complex:
    """det(1 - U_0): the determinant after splitting off the loop factors,
    so that det(1 - U) = prod_loops (1 - e^{i kappa_e}) det(1 - U_0)."""
    if not graph.topology.loops:
        raise NoLoops("graph has no loops")
    kappa = reduce_torus(kappa)
    U = evolution_matrix(graph, kappa)
    Q, anti = loop_basis(graph)
    Ur = Q.T @ U @ Q
    keep = [j for j in range(2 * graph.E) if j not in set(anti)]
    return complex(np.linalg.det(np.eye(len(keep)) - Ur[np.ix_(keep, keep)]))


# ---------------------------------------------------------------------------
# secular manifold sampling (3-edge graphs)


def sample_manifold(graph: MetricGraph, resolution: int = 60,
                    tol: float = 1e-10):
    """Point cloud of the zero set of F for a 3-edge graph.

    Scans grid lines of [0, 2pi)^3 along each axis, bisects sign changes of F,
    and tags points separately when they come from a loop factor plane
    (kappa_e = 0 with nonvanishing reduced determinant).

    Yields rows (k1, k2, k3, component) with component "regular" or
    "loop:<edge>".
    """
    if graph.E != 3:
        raise UnsupportedDimension(f"manifold sampling needs E = 3, got {graph.E}")
    S = bond_scattering(graph)
    grid = np.linspace(0.0, TWO_PI, resolution, endpoint=False)
    loops = set(graph.topology.loops)

    def f_of(kappa):
        return evaluate(graph, kappa, S=S).F

    rows = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for u in grid:
            for v in grid:
                base = np.zeros(3)
                base[others[0]] = u
                base[others[1]] = v
                prev_t, prev_f = None, None
                for t in np.append(grid, TWO_PI):
                    pt = base.copy()
                    pt[axis] = t
                    ft = f_of(pt)
                    if prev_f is not None and np.sign(prev_f) * np.sign(ft) < 0:
                        lo, hi, flo = prev_t, t, prev_f
                        while hi - lo > tol:
                            mid = 0.5 * (lo + hi)
                            pm = base.copy()
                            pm[axis] = mid
                            fm = f_of(pm)
                            if np.sign(flo) * np.sign(fm) <= 0:
                                hi = mid
                            else:
                                lo, flo = mid, fm
                        pt[axis] = 0.5 * (lo + hi)
                        rows.append((pt[0] % TWO_PI, pt[1] % TWO_PI,
                                     pt[2] % TWO_PI, "regular"))
                    prev_t, prev_f = t, ft
    # loop-factor sheets: entire kappa_e = 0 planes minus the regular part
    for i in sorted(loops):
        others = [a for a in range(3) if a != i]
        for u in grid:
            for v in grid:
                pt = np.zeros(3)
                pt[others[0]] = u
                pt[others[1]] = v
                if abs(loop_reduced_determinant(graph, pt)) > 1e-10:
                    rows.append((pt[0], pt[1], pt[2], f"loop:{i}"))
    return rows
