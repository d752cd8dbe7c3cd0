"""Coincidence-signal assembly.

Evaluates each contribution row of the pathway ledger as a double quadrature
over the two free interaction intervals, sums the signed rows into the real
coincidence value C(tau, T, s), provides the closed-form narrow-amplitude
limit, and scans lattices of (tau, T, s) deterministically in parallel.

The integration domain of every row is clipped to the region where the
two-time amplitude factors can be nonzero (their arguments are affine in the
integration variables), so huge nominal cutoffs cost nothing when the
amplitude has compact support.
"""

from __future__ import annotations

import dataclasses
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .biphoton import BiphotonAmplitude, DeltaAmplitude, to_time_domain
from .model import LiouvilleOperatorSet
from .pathways import HomSpec, PathwayTerm, SubTerm, term_table

__all__ = [
    "QuadratureSpec",
    "SignalGrid",
    "reference_time",
    "default_quadrature",
    "term_value",
    "coincidence",
    "coincidence_terms",
    "coincidence_short_Te",
    "short_te_terms",
    "scan",
    "pathway_probabilities",
    "system_hash",
]

MODES = ("full", "short_Te", "bs_removed")


@dataclass(frozen=True)
class QuadratureSpec:
    """Double-integral settings: cutoff and step (fs), rule, reference time.

    The cutoff must let damped correlators decay below 1e-5 at the boundary
    (cutoff >= 10 / eta_min) and the step must resolve the fastest coherence
    (step <= 0.1 * 2pi / omega_max); both are enforced by `validate`.
    """

    cutoff: float
    step: float
    rule: str = "trapezoid"
    t_ref: float = 0.0
    delta_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.cutoff <= 0 or self.step <= 0:
            raise ValueError("cutoff and step must be positive")
        if self.rule not in ("trapezoid", "simpson"):
            raise ValueError(f"rule must be 'trapezoid' or 'simpson', got {self.rule!r}")

    def validate(self, ops: LiouvilleOperatorSet) -> None:
        eta_min = float(ops.eta.min())
        if self.cutoff < 10.0 / eta_min:
            raise ValueError(
                f"cutoff {self.cutoff} fs too small: damped correlators need "
                f">= {10.0 / eta_min:.3g} fs to decay below 1e-5"
            )
        omega_max = float(ops.omega.max() - ops.omega.min())
        if omega_max > 0 and self.step > 0.1 * 2.0 * np.pi / omega_max:
            raise ValueError(
                f"step {self.step} fs too coarse for the fastest coherence "
                f"(need <= {0.1 * 2.0 * np.pi / omega_max:.4g} fs)"
            )

    @property
    def n_nodes(self) -> int:
        return int(round(self.cutoff / self.step))


def reference_time(amp: BiphotonAmplitude, offset: float = 0.0) -> float:
    """Centroid of the arrival-time distribution plus an optional offset."""
    w = np.abs(amp.time_values) ** 2
    mid = 0.5 * (amp.t1[:, None] + amp.t2[None, :])
    return float((w * mid).sum() / w.sum()) + offset


def default_quadrature(ops: LiouvilleOperatorSet, amp=None, *,
                       step: Optional[float] = None,
                       cutoff: Optional[float] = None,
                       rule: str = "trapezoid",
                       t_ref: Optional[float] = None,
                       t_ref_offset: float = 0.0,
                       delta_tol: float = 1e-9) -> QuadratureSpec:
    """Spec with cutoff tied to the slowest damping and a resolving step."""
    eta_min = float(ops.eta.min())
    if cutoff is None:
        cutoff = 12.0 / eta_min
    omega_max = float(ops.omega.max() - ops.omega.min())
    if step is None:
        step = 0.1 * 2.0 * np.pi / omega_max if omega_max > 0 else 0.5
    if t_ref is None:
        t_ref = (reference_time(amp, t_ref_offset)
                 if isinstance(amp, BiphotonAmplitude) else t_ref_offset)
    q = QuadratureSpec(cutoff=cutoff, step=step, rule=rule, t_ref=t_ref,
                       delta_tol=delta_tol)
    q.validate(ops)
    return q


# ---------------------------------------------------------------------------
# quadrature core
# ---------------------------------------------------------------------------

def _weights(n: int, h: float, rule: str) -> np.ndarray:
    if n == 1:
        return np.array([h])  # degenerate slab; only hit at extreme clipping
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    if rule == "simpson" and n >= 3:
        m = n if n % 2 == 1 else n - 1
        ws = np.full(m, h / 3.0)
        ws[1:-1:2] = 4.0 * h / 3.0
        ws[2:-1:2] = 2.0 * h / 3.0
        w[:m] = ws
        if m != n:  # trapezoid patch on the last panel
            w[-2] += h / 2.0
            w[-1] = h / 2.0
    return w


def _tighten(I3: List[float], I4: List[float],
             constraints: Sequence[Tuple[float, int, int, float, float]]) -> bool:
    """Shrink node intervals so every affine constraint can still be met."""
    for _ in range(2):
        for shift, c3, c4, lo, hi in constraints:
            if c3 == 0 and c4 == 0:
                if shift < lo or shift > hi:
                    return False
                continue
            for (ci, cj, Ii, Ij) in ((c3, c4, I3, I4), (c4, c3, I4, I3)):
                if ci == 0:
                    continue
                m = min(cj * Ij[0], cj * Ij[1])
                M = max(cj * Ij[0], cj * Ij[1])
                lo_i = (lo - shift - M) / ci
                hi_i = (hi - shift - m) / ci
                if ci < 0:
                    lo_i, hi_i = hi_i, lo_i
                Ii[0] = max(Ii[0], lo_i)
                Ii[1] = min(Ii[1], hi_i)
                if Ii[0] > Ii[1]:
                    return False
    return True


def _segment_nodes(lo: float, hi: float, q: QuadratureSpec) -> Optional[np.ndarray]:
    """Step-multiple nodes inside [lo, hi] with the exact endpoints included."""
    if hi - lo < 1e-12:
        return None
    eps = 1e-9 * q.step
    j_lo = int(np.ceil((lo + eps) / q.step))
    j_hi = int(np.floor((hi - eps) / q.step))
    inner = np.arange(j_lo, j_hi + 1) * q.step
    return np.concatenate(([lo], inner, [hi]))


def _segment_weights(nodes: np.ndarray, rule: str) -> np.ndarray:
    """Trapezoid (or Simpson on the uniform interior) for a split segment.

    The first/last cells may be slivers from clipping or causality breaks;
    they always get trapezoid treatment.
    """
    n = nodes.size
    if n == 1:
        return np.zeros(1)
    d = np.diff(nodes)
    w = np.zeros(n)
    w[:-1] += d / 2.0
    w[1:] += d / 2.0
    if rule == "simpson" and n >= 5:
        # uniform interior nodes[1:-1]; overwrite with composite Simpson
        h = nodes[2] - nodes[1]
        m = n - 2
        if m >= 3 and np.allclose(np.diff(nodes[1:-1]), h):
            ws = _weights(m, h, "simpson")
            w[1:-1] = ws
            w[1] += d[0] / 2.0
            w[-2] += d[-1] / 2.0
    return w


def _block_value(sub: SubTerm, interaction: int, t: float, tau: float, T: float,
                 amp, ops: LiouvilleOperatorSet, q: QuadratureSpec,
                 tau3: np.ndarray, tau4: np.ndarray) -> complex:
    T3 = tau3[:, None]
    T4 = tau4[None, :]
    # causality is sign-definite inside a block: test the center
    c3 = 0.5 * (tau3[0] + tau3[-1])
    c4 = 0.5 * (tau4[0] + tau4[-1])
    for expr in sub.f_args:
        if expr(0.0, tau, T, c3, c4) < 0:
            return 0.0 + 0.0j
    x1 = sub.conj_args[0](t, tau, T, T3, T4)
    y1 = sub.conj_args[1](t, tau, T, T3, T4)
    x2 = sub.args[0](t, tau, T, T3, T4)
    y2 = sub.args[1](t, tau, T, T3, T4)
    phi_c = np.conj(amp.time_value(x1, y1))
    phi = amp.time_value(x2, y2)
    if sub.symmetrize:
        phi = phi + amp.time_value(y2, x2)
    prod = phi_c * phi
    mask = prod != 0
    if not mask.any():
        return 0.0 + 0.0j
    a1 = sub.f_args[0](0.0, tau, T, T3, T4)
    a2 = sub.f_args[1](0.0, tau, T, T3, T4)
    a3 = sub.f_args[2](0.0, tau, T, T3, T4)
    F = np.zeros(prod.shape, dtype=complex)
    F[mask] = ops.expansion(interaction).evaluate(
        np.maximum(a1[mask], 0.0), np.maximum(a2[mask], 0.0),
        np.maximum(a3[mask], 0.0))
    w3 = _segment_weights(tau3, q.rule)
    w4 = _segment_weights(tau4, q.rule)
    return complex(((w3[:, None] * w4[None, :]) * (prod * F)).sum())


def _sub_term_value(sub: SubTerm, interaction: int, tau: float, T: float,
                    amp, ops: LiouvilleOperatorSet, q: QuadratureSpec) -> complex:
    t = q.t_ref
    support = amp.time_support()
    constraints: List[Tuple[float, int, int, float, float]] = []
    if support is not None:
        t1_lo, t1_hi, t2_lo, t2_hi = support
        if sub.symmetrize:
            u_lo, u_hi = min(t1_lo, t2_lo), max(t1_hi, t2_hi)
            boxes = [(t1_lo, t1_hi), (t2_lo, t2_hi), (u_lo, u_hi), (u_lo, u_hi)]
        else:
            boxes = [(t1_lo, t1_hi), (t2_lo, t2_hi), (t1_lo, t1_hi), (t2_lo, t2_hi)]
        for expr, (lo, hi) in zip(sub.conj_args + sub.args, boxes):
            constraints.append((expr.shift(t, tau, T), expr.t3, expr.t4, lo, hi))
    for expr in sub.f_args:
        constraints.append((expr.shift(0.0, tau, T), expr.t3, expr.t4, 0.0, np.inf))
    I3, I4 = [0.0, q.cutoff], [0.0, q.cutoff]
    if not _tighten(I3, I4, constraints):
        return 0.0 + 0.0j

    # split each axis where a causality argument changes sign inside the
    # domain; the integrand jumps there and blocks must not straddle it
    breaks3: List[float] = []
    breaks4: List[float] = []
    for expr in sub.f_args:
        sh = expr.shift(0.0, tau, T)
        if expr.t3 != 0 and expr.t4 != 0:
            continue  # no such rows in the ledger; bounds alone handle them
        if expr.t3 != 0:
            v = -sh / expr.t3
            if I3[0] < v < I3[1]:
                breaks3.append(v)
        elif expr.t4 != 0:
            v = -sh / expr.t4
            if I4[0] < v < I4[1]:
                breaks4.append(v)
    edges3 = [I3[0]] + sorted(breaks3) + [I3[1]]
    edges4 = [I4[0]] + sorted(breaks4) + [I4[1]]
    total = 0.0 + 0.0j
    for a3, b3 in zip(edges3[:-1], edges3[1:]):
        tau3 = _segment_nodes(a3, b3, q)
        if tau3 is None:
            continue
        for a4, b4 in zip(edges4[:-1], edges4[1:]):
            tau4 = _segment_nodes(a4, b4, q)
            if tau4 is None:
                continue
            total += _block_value(sub, interaction, t, tau, T, amp, ops, q,
                                  tau3, tau4)
    return total


def term_value(term: PathwayTerm, tau: float, T: float, s: float,
               amp, ops: LiouvilleOperatorSet, q: QuadratureSpec) -> complex:
    """Unsigned value of one ledger row (sum of its sub-term integrals).

    Detection sign and beam-splitter channel weights are applied by
    :func:`coincidence`, not here.
    """
    amp = _resolve_amplitude(amp, s)
    return sum(
        (_sub_term_value(sub, term.interaction, tau, T, amp, ops, q)
         for sub in term.sub_terms),
        start=0.0 + 0.0j,
    )


def _resolve_amplitude(amp, s: float):
    if isinstance(amp, BiphotonAmplitude):
        return amp if amp.s == s else to_time_domain(amp, s)
    if isinstance(amp, DeltaAmplitude):
        return amp if amp.s == s else dataclasses.replace(amp, s=s)
    if getattr(amp, "s", s) != s:
        raise ValueError(f"amplitude carries s={amp.s}, requested s={s}")
    return amp


def coincidence_terms(tau: float, T: float, s: float, amp,
                      ops: LiouvilleOperatorSet, q: QuadratureSpec,
                      hom: Optional[HomSpec] = None,
                      bs_removed: bool = False) -> Dict[Tuple[str, int], complex]:
    """Signed, channel-weighted values of every contributing ledger row."""
    if hom is None:
        hom = HomSpec(T=T)
    amp = _resolve_amplitude(amp, s)
    out: Dict[Tuple[str, int], complex] = {}
    for term in term_table():
        if bs_removed:
            if term.detection != "I":
                continue
            weight = 1.0  # no splitter: unit transmission on the only path
        else:
            weight = term.weight(hom)
        val = term_value(term, tau, T, s, amp, ops, q)
        out[(term.detection, term.interaction)] = term.sign * weight * val
    return out


def coincidence(tau: float, T: float, s: float, amp,
                ops: LiouvilleOperatorSet, q: QuadratureSpec,
                hom: Optional[HomSpec] = None,
                bs_removed: bool = False) -> float:
    """Real coincidence value: twice the real part of the signed row sum."""
    vals = coincidence_terms(tau, T, s, amp, ops, q, hom=hom,
                             bs_removed=bs_removed)
    return float(2.0 * np.real(sum(vals.values())))


# ---------------------------------------------------------------------------
# narrow-amplitude closed form
# ---------------------------------------------------------------------------

def _kron(x: float, y: float, tol: float) -> float:
    return 1.0 if abs(x - y) <= tol else 0.0


def _heaviside(x: float) -> float:
    return 1.0 if x >= 0 else 0.0


def _line_integral_F5(arg1: float, arg3: float, ops: LiouvilleOperatorSet,
                      q: QuadratureSpec) -> complex:
    tau3 = np.arange(0, q.n_nodes + 1) * q.step
    vals = ops.expansion(5).evaluate(np.full_like(tau3, arg1), tau3,
                                     np.full_like(tau3, arg3))
    w = _weights(tau3.size, q.step, q.rule)
    return complex((w * vals).sum())


def short_te_terms(tau: float, T: float, s: float, ops: LiouvilleOperatorSet,
                   q: QuadratureSpec,
                   hom: Optional[HomSpec] = None) -> Dict[str, complex]:
    """The individual closed-form contributions before the 2 Re projection.

    Valid for tau >= -T and s >= 0; s = 0 reduces to the single surviving
    exchange term F3(T, tau, T) (the other windows close because their
    arguments turn negative, and the delta-gated line integrals would need
    zero-length intervals).

    The published closed form drops the detection-channel amplitudes (they
    are uniform for a 50:50 splitter); pass `hom` to reinstate them, e.g.
    for comparison against the full quadrature.
    """
    if s < 0:
        raise ValueError(f"short entanglement-time form requires s >= 0, got s={s}")
    if tau < -T:
        raise ValueError(f"short entanglement-time form requires tau >= -T, "
                         f"got tau={tau}, T={T}")
    if hom is None:
        w_exchange = w_direct = 1.0
    else:
        # the surviving direct-channel term stems from the both-reflected
        # detection pattern
        w_exchange = hom.t_coeff ** 2 * hom.r_coeff ** 2
        w_direct = hom.r_coeff ** 4
    exp1 = ops.expansion(1)
    exp2 = ops.expansion(2)
    exp3 = ops.expansion(3)
    th = _heaviside(tau + T)
    if s == 0.0:
        return {
            "F1": 0.0j,
            "F2": 0.0j,
            "F3a": -w_exchange * th * complex(exp3.evaluate(T, tau, T)),
            "F3b": 0.0j,
            "F5_direct": 0.0j,
            "F5_exchange": 0.0j,
        }
    out: Dict[str, complex] = {
        "F1": -w_exchange * th * complex(exp1.evaluate(T, tau + T - s, 2 * s - T)),
        "F2": -w_exchange * th * complex(
            exp2.evaluate(2 * T + tau - s, s - T - tau, tau + s)),
        "F3a": -w_exchange * th * complex(exp3.evaluate(T, tau + s, T - 2 * s)),
        "F3b": -w_exchange * th * complex(
            exp3.evaluate(T + tau, s - 2 * T - tau, T + tau)),
        "F5_direct": 0.0j,
        "F5_exchange": 0.0j,
    }
    if _kron(tau, s, q.delta_tol):
        out["F5_direct"] = 2.0 * w_direct * _line_integral_F5(
            abs(tau), abs(tau), ops, q)
    if _kron(2 * T + tau, s, q.delta_tol):
        out["F5_exchange"] = -2.0 * w_exchange * _line_integral_F5(
            abs(tau), 2 * T + tau, ops, q)
    return out


def coincidence_short_Te(tau: float, T: float, s: float,
                         ops: LiouvilleOperatorSet, q: QuadratureSpec,
                         hom: Optional[HomSpec] = None) -> float:
    """Closed-form coincidence in the narrow-amplitude limit (value-one deltas)."""
    vals = short_te_terms(tau, T, s, ops, q, hom=hom)
    return float(2.0 * np.real(sum(vals.values())))


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

@dataclass
class SignalGrid:
    """Real coincidence values over a (tau, T, s) lattice with provenance."""

    tau_values: np.ndarray
    T_values: np.ndarray
    s_values: np.ndarray
    values: np.ndarray
    mode: str
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.tau_values = np.asarray(self.tau_values, dtype=float)
        self.T_values = np.asarray(self.T_values, dtype=float)
        self.s_values = np.asarray(self.s_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.tau_values.size, self.T_values.size, self.s_values.size)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != axes {shape}")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("signal values must be finite")

    def serialize(self) -> str:
        lines = ["# homspec signal grid v1", f"# mode: {self.mode}"]
        for key in sorted(self.meta):
            lines.append(f"# {key}: {self.meta[key]}")
        for name, ax in (("tau_values", self.tau_values),
                         ("T_values", self.T_values),
                         ("s_values", self.s_values)):
            lines.append(f"# {name}: " + " ".join(f"{v:.17g}" for v in ax))
        lines.append("# columns: tau T s C")
        for i, tv in enumerate(self.tau_values):
            for j, Tv in enumerate(self.T_values):
                for k, sv in enumerate(self.s_values):
                    lines.append(f"{tv:.17g} {Tv:.17g} {sv:.17g} "
                                 f"{self.values[i, j, k]:.17g}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path) -> "SignalGrid":
        meta: Dict[str, str] = {}
        axes: Dict[str, np.ndarray] = {}
        mode = ""
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    body = line[1:].strip()
                    if ":" not in body:
                        continue
                    key, _, val = body.partition(":")
                    key, val = key.strip(), val.strip()
                    if key == "mode":
                        mode = val
                    elif key in ("tau_values", "T_values", "s_values"):
                        axes[key] = np.array([float(x) for x in val.split()])
                    elif key not in ("columns", "homspec signal grid v1"):
                        meta[key] = val
                elif line.strip():
                    rows.append([float(x) for x in line.split()])
        values = np.array([r[3] for r in rows]).reshape(
            axes["tau_values"].size, axes["T_values"].size, axes["s_values"].size)
        return cls(axes["tau_values"], axes["T_values"], axes["s_values"],
                   values, mode, meta)


def system_hash(ops: LiouvilleOperatorSet) -> str:
    h = hashlib.sha256()
    h.update(ops.omega.tobytes())
    h.update(ops.V.tobytes())
    h.update(ops.eta.tobytes())
    h.update(repr((ops.system.initial_index(), ops.eta_floor)).encode())
    return h.hexdigest()[:16]


def _check_axes(*axes: np.ndarray) -> None:
    for ax in axes:
        if ax.size > 1 and not (np.all(np.diff(ax) > 0) or np.all(np.diff(ax) < 0)):
            raise ValueError("scan axes must be strictly monotone")


def scan(tau_axis: Sequence[float], T_axis: Sequence[float],
         s_axis: Sequence[float], mode: str, amp, ops: LiouvilleOperatorSet,
         q: QuadratureSpec, hom: Optional[HomSpec] = None,
         workers: Optional[int] = None) -> SignalGrid:
    """Evaluate the chosen signal over the lattice.

    Points are independent and dispatched to a thread pool; results land in
    disjoint array slots, so the output is deterministic for any worker
    count. In short_Te mode every lattice point must satisfy tau >= -T and
    s > 0; violations abort with the offending coordinates before any work
    is dispatched.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    tau_axis = np.asarray(tau_axis, dtype=float)
    T_axis = np.asarray(T_axis, dtype=float)
    s_axis = np.asarray(s_axis, dtype=float)
    _check_axes(tau_axis, T_axis, s_axis)
    values = np.zeros((tau_axis.size, T_axis.size, s_axis.size))
    meta = {
        "system_hash": system_hash(ops),
        "quadrature": (f"cutoff={q.cutoff:.17g} step={q.step:.17g} "
                       f"rule={q.rule} t_ref={q.t_ref:.17g}"),
    }
    if hasattr(amp, "content_hash"):
        meta["amplitude_hash"] = amp.content_hash()
    if values.size == 0:
        return SignalGrid(tau_axis, T_axis, s_axis, values, mode, meta)

    if mode == "short_Te":
        for tv in tau_axis:
            for Tv in T_axis:
                for sv in s_axis:
                    if sv <= 0:
                        raise ValueError(
                            f"short_Te mode requires s > 0; offending point "
                            f"(tau={tv}, T={Tv}, s={sv})")
                    if tv < -Tv:
                        raise ValueError(
                            f"short_Te mode requires tau >= -T; offending "
                            f"point (tau={tv}, T={Tv}, s={sv})")

        def point(i, j, k):
            return coincidence_short_Te(tau_axis[i], T_axis[j], s_axis[k], ops, q)
    else:
        bs_removed = mode == "bs_removed"
        amps = {float(sv): _resolve_amplitude(amp, float(sv)) for sv in s_axis}

        def point(i, j, k):
            return coincidence(tau_axis[i], T_axis[j], float(s_axis[k]),
                               amps[float(s_axis[k])], ops, q, hom=hom,
                               bs_removed=bs_removed)

    jobs = [(i, j, k) for i in range(tau_axis.size)
            for j in range(T_axis.size) for k in range(s_axis.size)]
    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for (i, j, k), val in zip(jobs, pool.map(lambda t: point(*t), jobs)):
                values[i, j, k] = val
    else:
        for i, j, k in jobs:
            values[i, j, k] = point(i, j, k)
    return SignalGrid(tau_axis, T_axis, s_axis, values, mode, meta)


def pathway_probabilities(tau: float, T: float, s: float, amp,
                          ops: LiouvilleOperatorSet, q: QuadratureSpec,
                          hom: Optional[HomSpec] = None,
                          weighting=None) -> np.ndarray:
    """Probability vector over the five interaction pathways at one point.

    By default the magnitude of the detection-summed contribution of each
    pathway is normalized to unit total; pass `weighting` (mapping the
    {(detection, i): value} dict to a vector) to study alternatives.
    """
    vals = coincidence_terms(tau, T, s, amp, ops, q, hom=hom)
    if weighting is not None:
        p = np.asarray(weighting(vals), dtype=float)
    else:
        sums = np.zeros(5, dtype=complex)
        for (_, i), v in vals.items():
            sums[i - 1] += v
        p = np.abs(sums)
    total = p.sum()
    if total == 0:
        raise ValueError("all pathway contributions vanish; probabilities undefined")
    return p / total
