"""Eigenvalue localization and eigenfunction reconstruction.

Localization never sign-scans the secular function.  The eigenphase counting
function is an exact integer step function away from eigenvalues, so bisecting
it cannot miss roots even in near-degenerate clusters; a Newton polish on the
eigenphase nearest 1 then brings each root to full precision.  Every accepted
root is audited by re-evaluating the counting function on both sides.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketAuditFailed, Borderline, NoKernel, NonSimple
from .graphs import MetricGraph
from .secular import TWO_PI, bond_scattering, evolution_matrix

LOCATE_TOL = 1e-12   # absolute tolerance factor: tol * max(1, k)


@dataclass(frozen=True)
class Thresholds:
    kernel: float = 1e-8
    value: float = 1e-6
    derivative: float = 1e-6
    support: float = 1e-8

    @staticmethod
    def from_dict(d: dict | None) -> "Thresholds":
        return Thresholds(**(d or {}))


@dataclass
class CountingFrame:
    k: float
    eigenphases: np.ndarray
    N: float
    N_osc: float


def counting(graph: MetricGraph, k: float, S: np.ndarray | None = None) -> CountingFrame:
    """Number of eigenvalues in (0, k] (exact integer for generic k)."""
    if S is None:
        S = bond_scattering(graph)
    lam = np.linalg.eigvals(evolution_matrix(graph, np.asarray(graph.lengths) * k % TWO_PI, S))
    theta = np.angle(lam) % TWO_PI
    weyl = graph.total_length * k / np.pi
    N = weyl + (graph.E + graph.V) / 2.0 - 1.0 - float(np.sum(theta)) / TWO_PI
    return CountingFrame(k=k, eigenphases=theta, N=N, N_osc=N - weyl)


@dataclass
class LocatedLevel:
    n: int                # spectral index of the first eigenvalue at this k
    k: float
    multiplicity: int
    loop_dims: int        # kernel dimensions carried by loop factors


class _Counter:
    """Counting-function evaluations with integer rounding and call tally."""

    def __init__(self, graph: MetricGraph):
        self.graph = graph
        self.S = bond_scattering(graph)
        self.calls = 0

    def raw(self, k: float) -> float:
        self.calls += 1
        return counting(self.graph, k, self.S).N

    def integer(self, k: float, slack: float = 1e-6) -> int:
        val = self.raw(k)
        if abs(val - round(val)) > slack:
            raise BracketAuditFailed(
                f"counting value {val} at k={k} is not an integer; "
                "evaluation too close to an eigenvalue")
        return int(round(val))


def _loop_dims_at(graph: MetricGraph, k: float, tol: float) -> int:
    hits = 0
    for i in graph.topology.loops:
        if abs(np.exp(1j * k * graph.lengths[i]) - 1.0) < tol:
            hits += 1
    return hits


def _newton_polish(graph: MetricGraph, S: np.ndarray, k: float, tol: float) -> float | None:
    lengths = np.asarray(graph.lengths)
    dir_lengths = np.repeat(lengths, 2)
    for _ in range(40):
        U = evolution_matrix(graph, lengths * k % TWO_PI, S)
        lam, vecs = np.linalg.eig(U)
        j = int(np.argmin(np.abs(lam - 1.0)))
        psi = float(np.angle(lam[j]))             # signed phase in (-pi, pi]
        a = vecs[:, j]
        a = a / np.linalg.norm(a)
        slope = float(dir_lengths @ (np.abs(a) ** 2))   # d(phase)/dk > 0
        if slope <= 0:
            return None
        step = -psi / slope
        k += step
        if abs(step) < 0.25 * tol:
            return k
    return None


def locate_spectrum(graph: MetricGraph, count: int | None = None,
                    k_max: float | None = None, k_min: float = 0.0,
                    tol: float = LOCATE_TOL,
                    n_offset: int | None = None) -> list[LocatedLevel]:
    """Locate eigenvalues, either the first `count` of them or all in
    (k_min, k_max].  Indexing starts at n = 1 for the first positive
    eigenvalue (n = 0, the constant eigenfunction, is never emitted).
    """
    if (count is None) == (k_max is None):
        raise ValueError("specify exactly one of count, k_max")
    ctr = _Counter(graph)
    mean_gap = np.pi / graph.total_length

    if k_min <= 0.0:
        lo = 1e-6 * mean_gap
        n_at_lo = ctr.integer(lo)
        if n_at_lo != 0:
            raise BracketAuditFailed(f"counting at k->0+ gives {n_at_lo}, not 0")
    else:
        lo = k_min
        n_at_lo = ctr.integer(lo) if n_offset is None else n_offset

    out: list[LocatedLevel] = []
    n = n_at_lo
    while True:
        if count is not None and len_done(out) >= count:
            break
        if k_max is not None and lo >= k_max:
            break
        target = n + 1
        # bracket: walk right until the count reaches the target
        hi = lo + mean_gap
        if k_max is not None:
            hi = min(hi, k_max)
        while ctr.integer(hi) < target:
            if k_max is not None and hi >= k_max:
                break
            lo_new = hi
            hi = hi + mean_gap
            if k_max is not None:
                hi = min(hi, k_max)
            lo = lo_new
        if ctr.integer(hi) < target:
            break   # k_max reached without another eigenvalue
        # bisect the jump to a coarse bracket
        a, b = lo, hi
        coarse = 1e-5 * max(1.0, b)
        while b - a > coarse:
            mid = 0.5 * (a + b)
            if ctr.integer(mid) >= target:
                b = mid
            else:
                a = mid
        abs_tol = tol * max(1.0, b)
        k_star = _newton_polish(graph, ctr.S, b, abs_tol)
        delta = max(1e-8, 1e-8 * b)
        ok = k_star is not None
        if ok:
            n_below = ctr.integer(k_star - delta)
            n_above = ctr.integer(k_star + delta)
            ok = n_below == n and n_above >= target
        if not ok:
            # fallback: pure bisection on the counting function
            while b - a > abs_tol:
                mid = 0.5 * (a + b)
                if ctr.integer(mid) >= target:
                    b = mid
                else:
                    a = mid
            k_star = 0.5 * (a + b)
            n_below = ctr.integer(k_star - delta)
            n_above = ctr.integer(k_star + delta)
            if not (n_below == n and n_above >= target):
                raise BracketAuditFailed(
                    f"audit around k={k_star}: N={n_below}..{n_above}, "
                    f"expected {n}..>={target}")
        mult = n_above - n_below
        loop_dims = _loop_dims_at(graph, k_star, 1e-6)
        out.append(LocatedLevel(n=n + 1, k=float(k_star),
                                multiplicity=mult, loop_dims=min(loop_dims, mult)))
        n = n_above
        lo = k_star + delta
        if count is not None and len_done(out) >= count:
            break
    return out


def len_done(levels: list[LocatedLevel]) -> int:
    return sum(lv.multiplicity for lv in levels)


# ---------------------------------------------------------------------------
# eigenfunctions


@dataclass
class TraceEntry:
    vertex: int
    directed_edge: int
    value: float            # f(v) seen from this directed edge
    derivative: float       # outgoing derivative at v, canonical k = 1 scale


@dataclass
class Eigenpair:
    k: float
    n: int
    kappa: np.ndarray
    amplitudes: np.ndarray          # unit norm, phase aligned
    trace: list[TraceEntry]
    residual: float
    multiplicity: int = 1
    resolved_loop_degeneracy: bool = False
    flags: "Flags | None" = None

    def trace_at(self, vertex: int, directed_edge: int) -> TraceEntry:
        for t in self.trace:
            if t.vertex == vertex and t.directed_edge == directed_edge:
                return t
        raise KeyError((vertex, directed_edge))

    def vertex_value(self, graph: MetricGraph, vertex: int) -> float:
        d = graph.outgoing[vertex][0]
        return self.trace_at(vertex, d).value


def _loop_kernel_vectors(graph: MetricGraph, kappa: np.ndarray, tol: float) -> list[np.ndarray]:
    vecs = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in graph.topology.loops:
        if abs(np.exp(1j * kappa[i]) - 1.0) < tol:
            v = np.zeros(2 * graph.E, dtype=complex)
            v[2 * i] = inv_sqrt2
            v[2 * i + 1] = -inv_sqrt2
            vecs.append(v)
    return vecs


def _align_phase(w: np.ndarray) -> complex:
    """Phase factor e^{i phi} with w = e^{i phi} r for a real vector r."""
    s = np.sum(w * w)
    if abs(s) < 1e-300:
        return 1.0 + 0j
    return np.exp(0.5j * np.angle(s))


def eigenfunction_at(graph: MetricGraph, k: float, n: int = 0,
                     thresholds: Thresholds = Thresholds(),
                     multiplicity: int = 1) -> Eigenpair:
    """Reconstruct the (canonical, real) eigenfunction at a located k.

    At a loop-degenerate point (kernel = loop vectors + one regular vector)
    the regular vector is recovered by projecting the loop directions out of
    the kernel; genuinely non-simple points raise NonSimple.
    """
    lengths = np.asarray(graph.lengths)
    kappa = lengths * k % TWO_PI
    U = evolution_matrix(graph, kappa)
    one_minus = np.eye(2 * graph.E) - U
    _, sv, vh = np.linalg.svd(one_minus)
    # a root located to relative precision LOCATE_TOL leaves a kernel
    # residual of order tol * k * L, so the cutoff must grow with k
    ker_tol = max(thresholds.kernel,
                  10.0 * LOCATE_TOL * max(1.0, k) * graph.total_length)
    kdim = int(np.sum(sv < ker_tol))
    if kdim == 0:
        raise NoKernel(f"smallest singular value {sv[-1]:.2e} at k={k}")
    kernel = vh[2 * graph.E - kdim:].conj().T   # columns span the kernel
    resolved = False
    if kdim == 1:
        a = kernel[:, 0]
    else:
        loops = _loop_kernel_vectors(graph, kappa, ker_tol)
        proj = kernel.copy()
        for lv in loops:
            coeff = lv.conj() @ proj
            proj = proj - np.outer(lv, coeff)
        q, r = np.linalg.qr(proj)
        keep = [i for i in range(proj.shape[1]) if abs(r[i, i]) > 1e-6]
        if len(keep) != 1:
            raise NonSimple(
                f"kernel dimension {kdim} at k={k} not resolvable by loops")
        a = q[:, keep[0]]
        resolved = True
    a = a / np.linalg.norm(a)

    phase = np.exp(-1j * kappa)
    rev = a.reshape(-1, 2)[:, ::-1].reshape(-1)     # a with (d, d-hat) swapped
    values_dir = a * np.repeat(phase, 2) + rev
    derivs_dir = 1j * (a * np.repeat(phase, 2) - rev)
    w = np.concatenate([values_dir, derivs_dir])
    rot = _align_phase(w)
    a = a * np.conj(rot)
    values_dir = values_dir * np.conj(rot)
    derivs_dir = derivs_dir * np.conj(rot)
    imag_res = float(max(np.max(np.abs(values_dir.imag)),
                         np.max(np.abs(derivs_dir.imag))))

    trace = []
    for v in range(graph.V):
        for d in graph.outgoing[v]:
            trace.append(TraceEntry(vertex=v, directed_edge=d,
                                    value=float(values_dir[d].real),
                                    derivative=float(derivs_dir[d].real)))
    # canonical sign: first significant trace entry positive
    sign = 0.0
    for t in trace:
        for q in (t.value, t.derivative):
            if abs(q) > 1e-6:
                sign = np.sign(q)
                break
        if sign:
            break
    if sign < 0:
        a = -a
        for t in trace:
            t.value = -t.value
            t.derivative = -t.derivative

    residual = float(np.linalg.norm(one_minus @ a))
    return Eigenpair(k=float(k), n=n, kappa=kappa, amplitudes=a, trace=trace,
                     residual=max(residual, imag_res), multiplicity=multiplicity,
                     resolved_loop_degeneracy=resolved)


# ---------------------------------------------------------------------------
# classification


@dataclass
class Flags:
    simple: bool
    property_I: bool
    property_II: bool
    loop_supported: int | None      # loop edge index, or None
    generic: bool
    morse: bool
    borderline: list[str] = field(default_factory=list)


def _band(q: float, eps: float) -> bool:
    """True when q falls within a factor 10 of the threshold."""
    return eps / 10.0 <= q <= eps * 10.0


def classify(graph: MetricGraph, ep: Eigenpair,
             thresholds: Thresholds = Thresholds(), strict: bool = False) -> Flags:
    borderline: list[str] = []

    interior = set(graph.topology.interior)
    min_val = min(abs(t.value) for t in ep.trace)
    vals_int = [abs(t.derivative) for t in ep.trace if t.vertex in interior]
    min_der = min(vals_int) if vals_int else np.inf

    prop1 = min_val > thresholds.value
    prop2 = min_der > thresholds.derivative
    if _band(min_val, thresholds.value):
        borderline.append(f"vertex value {min_val:.2e}")
    if np.isfinite(min_der) and _band(min_der, thresholds.derivative):
        borderline.append(f"vertex derivative {min_der:.2e}")

    loop_edge = None
    mass = np.abs(ep.amplitudes) ** 2
    for i in graph.topology.loops:
        outside = float(np.sum(mass) - mass[2 * i] - mass[2 * i + 1])
        resonant = abs(np.exp(1j * ep.kappa[i]) - 1.0) < 1e-3
        if outside < thresholds.support and abs(np.exp(1j * ep.kappa[i]) - 1.0) < 1e-6:
            loop_edge = i
            break
        # only ambiguous when the resonance condition is in play as well
        if resonant and _band(outside, thresholds.support):
            borderline.append(f"loop {i} outside mass {outside:.2e}")

    # small mass on an edge does not flip any classification decision, so it
    # is reported through this flag rather than through `borderline`
    morse = True
    for i in range(graph.E):
        pair = mass[2 * i] + mass[2 * i + 1]
        if pair < thresholds.support and loop_edge is None:
            morse = False

    simple = ep.multiplicity == 1 and not ep.resolved_loop_degeneracy
    flags = Flags(
        simple=simple,
        property_I=prop1,
        property_II=prop2,
        loop_supported=loop_edge,
        generic=simple and prop1 and prop2 and loop_edge is None,
        morse=morse,
        borderline=borderline,
    )
    ep.flags = flags
    if strict and borderline:
        raise Borderline("; ".join(borderline))
    return flags
