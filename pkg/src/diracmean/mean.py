"""Streaming self-normalized mean engine.

The accumulator keeps the weighted sum of evaluations, the weight sum
(the empirical partition function), and the sum of absolute weights,
all under compensated (Kahan-Babuska-Neumaier) summation.  The estimate
is their ratio, declared degenerate instead of divided when the weight
sum has cancelled below ``delta`` times the absolute-weight sum, so no
NaN or infinity can ever leak out of a run.

``run`` drives a source/policy/function triple through a finite budget
in vectorized chunks, records a trace, and stops on a window-Cauchy
criterion, persistent degeneracy, or budget exhaustion.  Disjoint index
blocks accumulated independently merge deterministically, which is the
whole parallelism contract: sources and policies are pure, accumulators
are single-writer, and ``merge`` is the only cross-block operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAccumulator, NonFiniteInput

__all__ = [
    "DEGENERATE",
    "Degenerate",
    "MeanAccumulator",
    "StoppingRule",
    "TracePoint",
    "ConvergenceReport",
    "accumulate",
    "merge",
    "run",
    "run_blocked",
]

TRACE_COLUMNS = ("m", "re_num", "im_num", "re_den", "im_den", "re_est", "im_est", "den_ratio")


class Degenerate:
    """Marker value: the normalization cancelled below threshold."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DEGENERATE"


DEGENERATE = Degenerate()


def _kbn_add(total: float, carry: float, value: float) -> tuple[float, float]:
    t = total + value
    if abs(total) >= abs(value):
        carry += (total - t) + value
    else:
        carry += (value - t) + total
    return t, carry


class MeanAccumulator:
    """Running numerator/denominator pair of the self-normalized mean.

    Components are stored as compensated real sums: ``numerator`` is
    ``sum(w_n * f(x_n))``, ``denominator`` is ``sum(w_n)``, and
    ``abs_weight_sum`` is ``sum(|w_n|)`` (always >= |denominator|).
    """

    __slots__ = ("_nr", "_ni", "_nrc", "_nic", "_dr", "_di", "_drc", "_dic",
                 "_aw", "_awc", "count")

    def __init__(self):
        self._nr = self._ni = self._nrc = self._nic = 0.0
        self._dr = self._di = self._drc = self._dic = 0.0
        self._aw = self._awc = 0.0
        self.count = 0

    @property
    def numerator(self) -> complex:
        return complex(self._nr + self._nrc, self._ni + self._nic)

    @property
    def denominator(self) -> complex:
        return complex(self._dr + self._drc, self._di + self._dic)

    @property
    def abs_weight_sum(self) -> float:
        return self._aw + self._awc

    @property
    def den_ratio(self) -> float:
        """|denominator| / abs_weight_sum, the conditioning of the
        empirical partition function (0 for an all-zero weight stream)."""
        aw = self.abs_weight_sum
        return abs(self.denominator) / aw if aw > 0.0 else 0.0

    def add(self, weight: complex, value: complex) -> "MeanAccumulator":
        """Accumulate one term ``weight * value``."""
        w = complex(weight)
        v = complex(value)
        if not (math.isfinite(w.real) and math.isfinite(w.imag)
                and math.isfinite(v.real) and math.isfinite(v.imag)):
            raise NonFiniteInput(f"non-finite term: weight={weight!r}, value={value!r}")
        wv = w * v
        self._nr, self._nrc = _kbn_add(self._nr, self._nrc, wv.real)
        self._ni, self._nic = _kbn_add(self._ni, self._nic, wv.imag)
        self._dr, self._drc = _kbn_add(self._dr, self._drc, w.real)
        self._di, self._dic = _kbn_add(self._di, self._dic, w.imag)
        self._aw, self._awc = _kbn_add(self._aw, self._awc, abs(w))
        self.count += 1
        return self

    def add_block(self, weights: np.ndarray, values: np.ndarray) -> "MeanAccumulator":
        """Accumulate a block of terms: pairwise block sums folded in as
        single compensated addends."""
        if not np.isfinite(weights).all():
            raise NonFiniteInput("non-finite weight in block")
        if not np.isfinite(values).all():
            raise NonFiniteInput("non-finite function value in block")
        wv = np.multiply(weights, values)
        num = complex(np.sum(wv))
        den = complex(np.sum(weights))
        aw = float(np.sum(np.abs(weights)))
        self._nr, self._nrc = _kbn_add(self._nr, self._nrc, num.real)
        self._ni, self._nic = _kbn_add(self._ni, self._nic, num.imag)
        self._dr, self._drc = _kbn_add(self._dr, self._drc, den.real)
        self._di, self._dic = _kbn_add(self._di, self._dic, den.imag)
        self._aw, self._awc = _kbn_add(self._aw, self._awc, aw)
        self.count += len(weights)
        return self

    def estimate(self, delta: float = 1e-8):
        """The normalized mean, or ``DEGENERATE`` when the weight sum has
        cancelled below ``delta`` times the absolute-weight sum.

        The division is done by scaled conjugation rather than the libm
        complex quotient so that a numerator that is an exact real
        multiple of the denominator divides out exactly.
        """
        if self.count == 0:
            raise EmptyAccumulator("no terms accumulated yet")
        aw = self.abs_weight_sum
        den = self.denominator
        if aw <= 0.0 or abs(den) < delta * aw:
            return DEGENERATE
        num = self.numerator
        nr, ni = num.real / aw, num.imag / aw
        dr, di = den.real / aw, den.imag / aw
        norm = dr * dr + di * di
        return complex((nr * dr + ni * di) / norm, (ni * dr - nr * di) / norm)

    def copy(self) -> "MeanAccumulator":
        out = MeanAccumulator()
        for name in self.__slots__:
            setattr(out, name, getattr(self, name))
        return out


def accumulate(acc: MeanAccumulator, weight: complex, value: complex) -> MeanAccumulator:
    """Functional form of :meth:`MeanAccumulator.add`."""
    return acc.add(weight, value)


def merge(a: MeanAccumulator, b: MeanAccumulator) -> MeanAccumulator:
    """Combine accumulators built from disjoint index blocks of the same
    source/policy/function triple; componentwise compensated sums."""
    out = a.copy()
    for s, c in (("_nr", "_nrc"), ("_ni", "_nic"), ("_dr", "_drc"),
                 ("_di", "_dic"), ("_aw", "_awc")):
        total, carry = getattr(out, s), getattr(out, c)
        total, carry = _kbn_add(total, carry, getattr(b, s))
        total, carry = _kbn_add(total, carry, getattr(b, c))
        setattr(out, s, total)
        setattr(out, c, carry)
    out.count = a.count + b.count
    return out


@dataclass(frozen=True)
class StoppingRule:
    """Finite stopping criterion for the infinite mean.

    ``window`` consecutive recorded estimates pairwise within
    ``rel_tol * (1 + |last|)`` stop the run as converged; ``window``
    consecutive degenerate trace snapshots stop it as degenerate.
    Nothing stops before ``min_samples``.
    """

    window: int = 8
    rel_tol: float = 1e-4
    min_samples: int = 1000
    degeneracy_threshold: float = 1e-8

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if not (0.0 < self.degeneracy_threshold < 1.0):
            raise ValueError("degeneracy_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class TracePoint:
    """Snapshot of the accumulator after ``m`` terms; ``estimate`` is
    None when the snapshot was degenerate."""

    m: int
    numerator: complex
    denominator: complex
    estimate: complex | None
    den_ratio: float


@dataclass
class ConvergenceReport:
    """Outcome of a finite-budget run."""

    trace: list[TracePoint]
    final_estimate: complex | Degenerate
    converged: bool
    stop_reason: str  # "window-cauchy" | "budget-exhausted" | "degenerate"
    N_used: int
    settings: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.final_estimate is DEGENERATE

    def trace_rows(self) -> list[tuple]:
        """Trace as rows under :data:`TRACE_COLUMNS`; degenerate snapshots
        leave the estimate cells empty."""
        rows = []
        for p in self.trace:
            est_re = "" if p.estimate is None else repr(p.estimate.real)
            est_im = "" if p.estimate is None else repr(p.estimate.imag)
            rows.append((p.m, repr(p.numerator.real), repr(p.numerator.imag),
                         repr(p.denominator.real), repr(p.denominator.imag),
                         est_re, est_im, repr(p.den_ratio)))
        return rows

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows(self.trace_rows())

    def summary_dict(self) -> dict:
        if self.degenerate:
            final = "degenerate"
        else:
            final = {"re": self.final_estimate.real, "im": self.final_estimate.imag}
        return {
            "final_estimate": final,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "N_used": self.N_used,
            "settings": self.settings,
        }


def _boundaries(budget: int, rule: StoppingRule, trace_stride: int,
                block_size: int) -> tuple[list[int], set[int], set[int]]:
    """Chunk boundaries for a run: trace marks, stopping checkpoints, and
    block edges, merged and sorted.

    Checkpoints are linear up to ``min_samples`` (so a full window exists
    there) and geometric afterwards (so the window always spans a fixed
    ratio of the history rather than a vanishing slice of it).
    """
    first_stop = min(rule.min_samples, budget)
    lin = max(1, min(trace_stride, rule.min_samples // rule.window))
    checks = set(range(lin, first_stop + 1, lin))
    checks.add(first_stop)
    growth = 2.0 ** (1.0 / rule.window)
    m = first_stop
    while m < budget:
        m = min(budget, max(m + 1, math.ceil(m * growth)))
        checks.add(m)
    traces = set(range(trace_stride, budget + 1, trace_stride))
    blocks = set(range(block_size, budget + 1, block_size))
    bounds = sorted(checks | traces | blocks | {budget})
    return bounds, checks, traces


def run(
    source,
    policy,
    func,
    budget: int,
    rule: StoppingRule | None = None,
    trace_stride: int = 1000,
    block_size: int = 4096,
) -> ConvergenceReport:
    """Accumulate ``weight(x_n) * func(x_n)`` for ``n = 0..N-1`` and report
    the self-normalized estimate.

    Parameters
    ----------
    source, policy, func
        A point source, a weight policy, and a finite-rank function; the
        run reads ``max(policy.rank, func.rank, 1)`` coordinates per point.
    budget
        Maximum number of points (must be >= ``rule.min_samples``).
    rule
        Stopping rule; defaults to ``StoppingRule()``.
    trace_stride
        Record a trace snapshot every this many points (the final state
        is always recorded).
    block_size
        Index block size for chunked accumulation.  Runs with equal block
        size are reproducible bit for bit; different block sizes agree to
        compensated-summation accuracy.
    """
    rule = rule if rule is not None else StoppingRule()
    if budget < rule.min_samples:
        raise ValueError(
            f"budget {budget} is below min_samples {rule.min_samples}"
        )
    if trace_stride < 1 or block_size < 1:
        raise ValueError("trace_stride and block_size must be >= 1")
    rank = max(int(getattr(policy, "rank", 0)), int(func.rank), 1)
    delta = rule.degeneracy_threshold
    window = rule.window

    acc = MeanAccumulator()
    trace: list[TracePoint] = []
    recent_checks: list[complex | None] = []
    recent_trace_degenerate: list[bool] = []
    bounds, checks, traces = _boundaries(budget, rule, trace_stride, block_size)

    stop_reason = None
    prev = 0
    for bound in bounds:
        pts = source.block(prev, bound, rank)
        w = policy.weights(pts, start_index=prev)
        v = func.eval_block(pts)
        acc.add_block(w, v)
        prev = bound

        est = acc.estimate(delta)
        degenerate = est is DEGENERATE
        if bound in traces or bound == budget:
            trace.append(TracePoint(
                m=bound,
                numerator=acc.numerator,
                denominator=acc.denominator,
                estimate=None if degenerate else est,
                den_ratio=acc.den_ratio,
            ))
        if bound in traces:
            recent_trace_degenerate.append(degenerate)
            if len(recent_trace_degenerate) > window:
                recent_trace_degenerate.pop(0)
        if bound in checks:
            recent_checks.append(None if degenerate else est)
            if len(recent_checks) > window:
                recent_checks.pop(0)

        if bound >= rule.min_samples:
            if (len(recent_trace_degenerate) == window
                    and all(recent_trace_degenerate)):
                stop_reason = "degenerate"
                break
            if len(recent_checks) == window and all(e is not None for e in recent_checks):
                tol = rule.rel_tol * (1.0 + abs(recent_checks[-1]))
                spread = max(
                    abs(a - b)
                    for i, a in enumerate(recent_checks)
                    for b in recent_checks[i + 1:]
                )
                if spread <= tol:
                    stop_reason = "window-cauchy"
                    break

    n_used = prev
    final = acc.estimate(delta)
    if final is DEGENERATE:
        stop_reason = "degenerate"
    elif stop_reason is None:
        stop_reason = "budget-exhausted"
    if not trace or trace[-1].m < n_used:
        trace.append(TracePoint(
            m=n_used,
            numerator=acc.numerator,
            denominator=acc.denominator,
            estimate=None if final is DEGENERATE else final,
            den_ratio=acc.den_ratio,
        ))
    return ConvergenceReport(
        trace=trace,
        final_estimate=final,
        converged=stop_reason == "window-cauchy",
        stop_reason=stop_reason,
        N_used=n_used,
    )


def run_blocked(
    source,
    policy,
    func,
    total: int,
    n_blocks: int,
    delta: float = 1e-8,
) -> MeanAccumulator:
    """Accumulate ``total`` points as ``n_blocks`` disjoint index blocks
    and merge them in a deterministic pairwise tree; the block-parallel
    evaluation contract."""
    if n_blocks < 1 or total < n_blocks:
        raise ValueError("need 1 <= n_blocks <= total")
    rank = max(int(getattr(policy, "rank", 0)), int(func.rank), 1)
    edges = [round(i * total / n_blocks) for i in range(n_blocks + 1)]
    accs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        acc = MeanAccumulator()
        for start in range(lo, hi, 1 << 16):
            stop = min(start + (1 << 16), hi)
            pts = source.block(start, stop, rank)
            acc.add_block(policy.weights(pts, start_index=start), func.eval_block(pts))
        accs.append(acc)
    while len(accs) > 1:
        paired = [merge(accs[i], accs[i + 1]) for i in range(0, len(accs) - 1, 2)]
        if len(accs) % 2:
            paired.append(accs[-1])
        accs = paired
    return accs[0]
