"""Named benchmarks comparing the Liouville pipeline against the brute force.

Both routes run on one shared configuration: a three-level ladder driven by
a Gaussian two-photon amplitude, near-resonant and slow enough that the
brute force's 32-mode / 64-step discretization resolves the dynamics.

`run_benchmark` performs the faithful comparison: the assembled coincidence
value against the brute-force fourth-order counting probability, both
normalized at the first scan point. The module also exposes finer probes
(arm-restricted evolutions and pattern-resolved detection products) that
isolate the exchange-interference content the pathway ledger keeps; the
test suite uses these to validate the quadrature row groups against the
brute force at the level where the two decompositions describe the same
physics. See the repository notes for the bookkeeping conventions relating
the two routes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .biphoton import BiphotonAmplitude, from_frequency_values
from .model import ExcitonSystem, Level, LiouvilleOperatorSet
from .oracle import (DiscretizedField, _pair_products, detection_amplitudes,
                     evolve_perturbative, fourth_order_coincidence)
from .pathways import HomSpec
from .signal import QuadratureSpec, coincidence

__all__ = [
    "Benchmark",
    "three_level_benchmark",
    "run_benchmark",
    "BENCHMARKS",
    "evolve_benchmark_kets",
]


@dataclass
class Benchmark:
    name: str
    system: ExcitonSystem
    amplitude: BiphotonAmplitude
    field: DiscretizedField
    quadrature: QuadratureSpec
    points: List[Tuple[float, float]]   # (tau, T); s fixed below
    s: float
    n_modes: int
    n_steps: int
    t_end: float
    t_start: float


def _gaussian_pair_values(freqs_a, freqs_b, center_sum, sigma_sum, center_diff,
                          sigma_diff):
    wa = np.asarray(freqs_a)[:, None]
    wb = np.asarray(freqs_b)[None, :]
    return np.exp(-((wa + wb - center_sum) / sigma_sum) ** 2
                  - ((wa - wb - center_diff) / sigma_diff) ** 2)


def three_level_benchmark(n_modes: int = 32, n_steps: int = 64) -> Benchmark:
    """Slow, resonant three-level ladder with a compact Gaussian amplitude."""
    omega_eg = 0.85
    omega_fe = 0.90
    system = ExcitonSystem(
        levels=[Level("g0", "g", 0.0), Level("e0", "e", omega_eg),
                Level("f0", "f", omega_eg + omega_fe)],
        dipoles_ge=[[1.0]],
        dipoles_ef=[[0.8]],
        dephasing_default=0.0,
    )
    center = 0.5 * (omega_eg + omega_fe)
    s = 3.0

    # mode lattice: span wide enough that the band-limited emission kernel is
    # sharp, spacing fine enough that the periodized window stays clean
    freqs = np.linspace(center - 0.7, center + 0.7, n_modes)
    vals = _gaussian_pair_values(freqs, freqs, 2 * center, 0.16, 0.0, 0.22)
    field = DiscretizedField.from_values(
        freqs, vals * np.exp(1j * freqs * s)[:, None])

    # wider span for the pipeline grid so the truncation edge sits far below
    # the support threshold of the quadrature clipping
    fine = np.linspace(center - 0.66, center + 0.66, 256)
    amp = from_frequency_values(
        fine, fine, _gaussian_pair_values(fine, fine, 2 * center, 0.16, 0.0, 0.22),
        s=s, delay_arm="a")

    ops = LiouvilleOperatorSet(system)   # dephasing floored at eta_min
    omega_span = float(ops.omega.max() - ops.omega.min())
    q = QuadratureSpec(cutoff=12.0 / ops.eta_floor,
                       step=0.5 * 0.1 * 2 * np.pi / omega_span,
                       rule="trapezoid", t_ref=0.0)
    points = [(1.0, 2.0), (2.5, 2.0), (4.0, 2.0), (1.5, 3.5), (3.0, 1.0)]
    return Benchmark(name="three-level", system=system, amplitude=amp,
                     field=field, quadrature=q, points=points, s=s,
                     n_modes=n_modes, n_steps=n_steps, t_end=40.0,
                     t_start=-40.0)


BENCHMARKS = {"three-level": three_level_benchmark}


def _evolve_arm_restricted(bench: Benchmark, forbidden_first: str):
    """Auxiliary second-order evolution absorbing from one arm only."""
    import homspec.oracle as oracle_mod

    original = oracle_mod._build_couplings

    def patched(system, field, t0, h):
        return [c for c in original(system, field, t0, h)
                if not (c.in_key == "g_ab" and c.out_key == forbidden_first)]

    oracle_mod._build_couplings = patched
    try:
        return evolve_perturbative(bench.system, bench.field, bench.t_end,
                                   t_start=bench.t_start,
                                   n_steps=bench.n_steps, order_max=2)
    finally:
        oracle_mod._build_couplings = original


def evolve_benchmark_kets(bench: Benchmark):
    """(full, arm-a-only, arm-b-only) perturbative states for the benchmark.

    The restricted states isolate which photon of the pair interacted; inner
    products between opposite restrictions select the exchange-interference
    content that the pathway decomposition resolves.
    """
    ket_full = evolve_perturbative(bench.system, bench.field, bench.t_end,
                                   t_start=bench.t_start, n_steps=bench.n_steps)
    ket_a = _evolve_arm_restricted(bench, "e_a")   # only arm-a absorption
    ket_b = _evolve_arm_restricted(bench, "e_b")   # only arm-b absorption
    return ket_full, ket_a, ket_b


def exchange_pair_product(amps_bra, amps_ket, hom: HomSpec) -> complex:
    """Pattern-weighted second-order pair product between two restrictions."""
    t2, r2 = hom.t_coeff ** 2, hom.r_coeff ** 2
    total = t2 ** 2 * np.vdot(amps_bra["through"][2], amps_ket["through"][2])
    total += r2 ** 2 * np.vdot(amps_bra["reflected"][2], amps_ket["reflected"][2])
    total -= t2 * r2 * (np.vdot(amps_bra["through"][2], amps_ket["cross"][2])
                        + np.vdot(amps_bra["cross"][2], amps_ket["through"][2]))
    return complex(total)


def run_benchmark(name: str = "three-level") -> Dict[str, np.ndarray]:
    """Faithful comparison at the benchmark points.

    Evaluates the assembled coincidence C(tau, T, s) and the brute-force
    fourth-order counting probability, normalizes each curve by its first
    point, and reports the maximum relative deviation between them.
    """
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}; have {sorted(BENCHMARKS)}")
    bench = BENCHMARKS[name]()
    ops = LiouvilleOperatorSet(bench.system)
    ket = evolve_perturbative(bench.system, bench.field, bench.t_end,
                              t_start=bench.t_start, n_steps=bench.n_steps)
    pipeline = []
    brute = []
    for tau, T in bench.points:
        hom = HomSpec(T=T)
        pipeline.append(coincidence(tau, T, bench.s, bench.amplitude, ops,
                                    bench.quadrature, hom=hom))
        brute.append(fourth_order_coincidence(ket, hom, bench.quadrature.t_ref,
                                              bench.quadrature.t_ref + tau))
    pipeline = np.array(pipeline)
    brute = np.array(brute)
    pipe_n = pipeline / pipeline[0]
    brute_n = brute / brute[0]
    scale = np.max(np.abs(brute_n))
    return {
        "points": np.array(bench.points),
        "s": bench.s,
        "pipeline": pipeline,
        "brute_force": brute,
        "pipeline_normalized": pipe_n,
        "brute_force_normalized": brute_n,
        "max_rel_dev": float(np.max(np.abs(pipe_n - brute_n)) / scale),
    }
