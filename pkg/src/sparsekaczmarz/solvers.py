"""Iteration engines: sparse Kaczmarz, block sparse Kaczmarz / linearized
Bregman, the online runner with residual-jump stopping, and the
TV-Kaczmarz hybrid.

All solvers start from ``z = x = 0`` and keep ``x = shrink(z)``.
"""

from __future__ import annotations

import csv
import io
import logging
import queue
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .control import Control
from .errors import EmptySystem, InconsistentBlock, ZeroRhs, ZeroRow
from .operators import BlockPartition, RowSystem, grad2d, grad2d_adjoint
from .shrinkage import group_shrink2, objective, shrink, tv_objective
from .stepsize import StepsizeRule, exact_step

log = logging.getLogger(__name__)

CSV_HEADER = ("step", "rows", "residual", "error", "objective")


@dataclass
class SolverState:
    z: np.ndarray
    x: np.ndarray
    k: int = 0
    shrink_mode: str = "signed"

    @classmethod
    def zeros(cls, n: int, shrink_mode: str = "signed") -> "SolverState":
        if shrink_mode not in ("signed", "nonnegative"):
            raise ValueError(f"unknown shrink mode {shrink_mode!r}")
        return cls(np.zeros(n), np.zeros(n), 0, shrink_mode)


@dataclass
class TVState:
    v: np.ndarray
    q: np.ndarray
    u: np.ndarray
    p: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "TVState":
        v = np.zeros(shape)
        q = np.zeros((2,) + tuple(shape))
        return cls(v, q, v, q.copy())


@dataclass
class TraceRecord:
    step: int
    rows: int
    residual: float
    error: Optional[float]
    objective: float
    extra: dict = field(default_factory=dict)


@dataclass
class Arrival:
    """Residuals around one online append, as seen by the stop monitor."""

    step: int
    rows_before: int
    rows_after: int
    pre: float
    post: float
    significant: Optional[bool]


class Trace:
    """Per-step log of a solver run."""

    def __init__(self):
        self.records: list[TraceRecord] = []
        self.arrivals: list[Arrival] = []
        self.max_steps_reached = False
        self.converged = False
        self.stop_step: Optional[int] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def add(self, step, rows, residual, error, objective, **extra) -> None:
        if self.records and step <= self.records[-1].step:
            raise ValueError("trace steps must be strictly increasing")
        self.records.append(TraceRecord(step, rows, residual, error, objective, extra))

    def column(self, name: str) -> np.ndarray:
        if name in CSV_HEADER:
            vals = [getattr(r, name) for r in self.records]
        else:
            vals = [r.extra.get(name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    @property
    def last(self) -> TraceRecord:
        return self.records[-1]

    def write_csv(self, fh) -> None:
        """Write ``step,rows,residual,error,objective`` plus any extra columns."""
        extras = []
        for r in self.records:
            for key in r.extra:
                if key not in extras:
                    extras.append(key)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_HEADER) + extras)
        for r in self.records:
            row = [r.step, r.rows, repr(float(r.residual)),
                   "" if r.error is None else repr(float(r.error)),
                   repr(float(r.objective))]
            row += [repr(float(r.extra[k])) if k in r.extra else "" for k in extras]
            w.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


class StopMonitor:
    """Flags measurement arrivals that no longer raise the residual.

    An append is insignificant when the post-append relative residual is
    at most ``max(eps_abs, gamma * pre)``; after ``patience`` consecutive
    insignificant appends the monitor fires and remembers the step.
    """

    def __init__(self, gamma: float = 2.0, eps_abs: float = 1e-3, patience: int = 2):
        if not gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not eps_abs > 0:
            raise ValueError("eps_abs must be positive")
        if patience < 1:
            raise ValueError("patience must be at least 1")
        self.gamma = gamma
        self.eps_abs = eps_abs
        self.patience = int(patience)
        self.count = 0
        self.stop_step: Optional[int] = None

    def is_significant(self, pre: float, post: float) -> bool:
        return post > max(self.eps_abs, self.gamma * pre)

    def observe(self, step: int, pre: float, post: float) -> bool:
        """Record one append; returns its significance."""
        significant = self.is_significant(pre, post)
        self.count = 0 if significant else self.count + 1
        if self.stop_step is None and self.count >= self.patience:
            self.stop_step = step
        return significant

    @property
    def fired(self) -> bool:
        return self.stop_step is not None


def _relative_error(x, x_true):
    if x_true is None:
        return None
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


def sparse_kaczmarz_step(state: SolverState, a, beta: float, lam: float,
                         rule: Optional[StepsizeRule] = None, a_sq: Optional[float] = None
                         ) -> SolverState:
    """One row step ``z <- z - t a``, ``x <- shrink(z)``.

    The default (``dynamic``/``constant`` on a single row) uses
    ``t = (a^T x - beta) / ||a||^2``; ``exact`` solves for the ``t`` that
    makes the new ``x`` satisfy ``a^T x = beta``.
    """
    if rule is not None and rule.kind == "exact":
        if state.shrink_mode != "signed":
            raise ValueError("exact stepsizes require the signed shrink mode")
        t = exact_step(state.z, a, beta, lam)
    else:
        if a_sq is None:
            a_sq = float(a @ a)
        if a_sq == 0.0:
            raise ZeroRow("row step with a zero row")
        t = (float(a @ state.x) - beta) / a_sq
    z = state.z - t * a
    return SolverState(z, shrink(z, lam, state.shrink_mode), state.k + 1, state.shrink_mode)


def block_step(state: SolverState, block_rows, block_rhs, lam: float,
               rule: Optional[StepsizeRule] = None, key=None) -> SolverState:
    """One block step ``z <- z - t A_l^T (A_l x - b_l)``, ``x <- shrink(z)``."""
    A = np.atleast_2d(block_rows)
    b = np.atleast_1d(block_rhs)
    if rule is not None and rule.kind == "exact":
        if A.shape[0] != 1:
            raise ValueError("exact stepsizes are only available for single-row blocks")
        return sparse_kaczmarz_step(state, A[0], float(b[0]), lam, rule)
    r = A @ state.x - b
    rr = float(r @ r)
    if rr == 0.0:
        return SolverState(state.z, state.x, state.k + 1, state.shrink_mode)
    g = r @ A
    if rule is None or rule.kind == "dynamic":
        gg = float(g @ g)
        if gg == 0.0:
            raise InconsistentBlock("block residual is orthogonal to the block's row space")
        t = rr / gg
    else:
        t = rule.block_step(A, b, state.x, key=key)
    z = state.z - t * g
    return SolverState(z, shrink(z, lam, state.shrink_mode), state.k + 1, state.shrink_mode)


class _Engine:
    """Dispatches one iteration on block ``l`` of a (growing) system."""

    def __init__(self, system: RowSystem, partition: BlockPartition, lam: float,
                 rule: StepsizeRule):
        self.system = system
        self.partition = partition
        self.lam = lam
        self.rule = rule
        self._warned: set = set()

    def step(self, state: SolverState, l: int) -> SolverState:
        sl = self.partition.block(l)
        sys_ = self.system
        if sl.stop - sl.start == 1:
            i = sl.start
            a_sq = float(sys_.row_sq_norms[i])
            if a_sq == 0.0:
                if i not in self._warned:
                    log.warning("skipping zero row %d", i)
                    self._warned.add(i)
                return SolverState(state.z, state.x, state.k + 1, state.shrink_mode)
            return sparse_kaczmarz_step(state, sys_.rows[i], float(sys_.rhs[i]),
                                        self.lam, self.rule, a_sq)
        return block_step(state, sys_.rows[sl], sys_.rhs[sl], self.lam, self.rule,
                          key=(sl.start, sl.stop))

    def weights(self) -> np.ndarray:
        sq = self.system.row_sq_norms
        return np.array([sq[self.partition.block(l)].sum()
                         for l in range(self.partition.n_blocks)])


def _record(trace: Trace, state: SolverState, system: RowSystem, lam: float,
            x_true, step: int) -> float:
    res = system.residual_norm_rel(state.x)
    trace.add(step, system.m, res, _relative_error(state.x, x_true), objective(state.x, lam))
    return res


def run(system: RowSystem, partition: Optional[BlockPartition] = None, lam: float = 1.0,
        control: Optional[Control] = None, rule: Optional[StepsizeRule] = None,
        max_steps: int = 10_000, tol: float = 1e-10, *, shrink_mode: str = "signed",
        x_true=None, log_every: int = 1) -> tuple[np.ndarray, Trace]:
    """Iterate on a fixed system until ``||Ax - b|| / ||b|| <= tol`` or ``max_steps``.

    ``partition`` defaults to one block per row and ``control`` to a
    cyclic sweep. The tolerance is checked at logged steps only.
    Hitting ``max_steps`` is reported through ``trace.max_steps_reached``.
    """
    if system.m == 0:
        raise EmptySystem("cannot solve an empty system")
    if np.linalg.norm(system.rhs) == 0.0:
        raise ZeroRhs("b = 0 has the trivial solution x = 0")
    partition = partition or BlockPartition.singletons(system.m)
    if partition.m != system.m:
        raise ValueError(f"partition covers {partition.m} rows, system has {system.m}")
    rule = rule or StepsizeRule("dynamic")
    engine = _Engine(system, partition, lam, rule)
    if control is None:
        control = Control("cyclic")
    if control.m != partition.n_blocks:
        weights = engine.weights() if control.mode == "rownorm_weighted" else None
        control.grow(partition.n_blocks, weights)
    state = SolverState.zeros(system.n, shrink_mode)
    trace = Trace()
    for step in range(1, max_steps + 1):
        state = engine.step(state, control.next_index())
        if step % log_every == 0 or step == max_steps:
            res = _record(trace, state, system, lam, x_true, step)
            if res <= tol:
                trace.converged = True
                break
    else:
        trace.max_steps_reached = True
    return state.x, trace


def online_run(initial_system: RowSystem, block_stream: Iterable, schedule: int = 50,
               lam: float = 1.0, control: Optional[Control] = None,
               rule: Optional[StepsizeRule] = None, monitor: Optional[StopMonitor] = None,
               *, blocking: str = "arrivals", shrink_mode: str = "signed", x_true=None,
               log_every: int = 1, tail_steps: int = 0, tol: float = 0.0,
               on_log=None) -> tuple[np.ndarray, Trace, Optional[int]]:
    """Solve while measurements keep arriving.

    Repeats: ``schedule`` steps on the rows gathered so far, then append
    the next ``(rows, rhs)`` block from ``block_stream`` and let the
    monitor compare the relative residual just before and just after the
    append (arrivals seen while the iterate is still zero are not
    judged). Once the stream is exhausted, up to ``tail_steps`` further
    steps run (stopping early at ``tol``).

    ``blocking`` chooses how rows are grouped for the control sequence:
    ``"rows"`` (every row is its own block, i.e. increasing-cycle sparse
    Kaczmarz), ``"arrivals"`` (every appended block is one block) or
    ``"whole"`` (a single growing block, i.e. increasing linearized
    Bregman).

    The system is grown in place. ``block_stream`` may be a
    :class:`MeasurementQueue` fed from another thread.
    """
    if schedule < 1:
        raise ValueError("schedule must be at least one step per arrival")
    if blocking not in ("rows", "arrivals", "whole"):
        raise ValueError(f"unknown blocking {blocking!r}")
    system = initial_system
    if system.m == 0:
        raise EmptySystem("online runs need at least one initial row")
    rule = rule or StepsizeRule("dynamic")
    monitor = monitor or StopMonitor()
    control = control or Control("cyclic")

    if blocking == "rows":
        partition = BlockPartition.singletons(system.m)
    else:
        partition = BlockPartition.whole(system.m)
    engine = _Engine(system, partition, lam, rule)

    def sync_control():
        weights = engine.weights() if control.mode == "rownorm_weighted" else None
        control.grow(partition.n_blocks, weights)

    sync_control()
    state = SolverState.zeros(system.n, shrink_mode)
    trace = Trace()
    step = 0
    last_res = None

    def advance(n_steps, stop_at_tol=False):
        nonlocal state, step, last_res
        for _ in range(n_steps):
            state = engine.step(state, control.next_index())
            step += 1
            if step % log_every == 0:
                last_res = _record(trace, state, system, lam, x_true, step)
                if on_log is not None:
                    on_log(trace.last, state)
                if stop_at_tol and last_res <= tol:
                    return True
        return False

    for new_rows, new_rhs in block_stream:
        advance(schedule)
        new_rows = np.atleast_2d(np.asarray(new_rows, dtype=float))
        k = new_rows.shape[0]
        if k == 0:
            continue
        pre = system.residual_norm_rel(state.x)
        m_before = system.m
        system.append(new_rows, new_rhs)
        if blocking == "rows":
            for _ in range(k):
                partition.add_block(1)
        elif blocking == "arrivals":
            partition.add_block(k)
        else:
            partition.extend_last(k)
        sync_control()
        post = system.residual_norm_rel(state.x)
        # with x = 0 both residuals are exactly 1 whatever the data; nothing to judge
        significant = monitor.observe(step, pre, post) if state.x.any() else None
        trace.arrivals.append(Arrival(step, m_before, system.m, pre, post, significant))

    done = advance(schedule + tail_steps, stop_at_tol=True)
    trace.converged = done
    if step % log_every != 0:
        _record(trace, state, system, lam, x_true, step)
    trace.stop_step = monitor.stop_step
    return state.x, trace, monitor.stop_step


class MeasurementQueue:
    """Thread-safe hand-over of measurement blocks to :func:`online_run`.

    A producer thread calls :meth:`put` for each block and :meth:`close`
    when done; iterating blocks until the queue is closed and drained.
    """

    _CLOSED = object()

    def __init__(self, maxsize: int = 0):
        self._q: queue.Queue = queue.Queue(maxsize)

    def put(self, rows, rhs) -> None:
        self._q.put((np.array(rows, dtype=float), np.array(rhs, dtype=float)))

    def close(self) -> None:
        self._q.put(self._CLOSED)

    def __iter__(self):
        while True:
            item = self._q.get()
            if item is self._CLOSED:
                return
            yield item


def tv_kaczmarz_run(system: RowSystem, shape, lam: float, sweeps: int,
                    lb_steps_per_sweep: int = 1, *, x_true=None
                    ) -> tuple[np.ndarray, Trace]:
    """Minimal-TV reconstruction of an image from ``A u = b``.

    Each sweep runs one cyclic Kaczmarz pass over the rows of ``A``
    (acting on ``u`` directly, since the ``u`` part of the objective is
    quadratic) followed by ``lb_steps_per_sweep`` linearized Bregman
    steps on the split constraint ``grad u - p = 0`` with the dynamic
    stepsize and two-dimensional shrinkage of ``p``.

    The trace has one record per sweep; the ``split`` extra column holds
    ``||grad u - p||``.
    """
    h, w = shape
    if system.n != h * w:
        raise ValueError(f"system acts on {system.n} unknowns, image has {h * w}")
    st = TVState.zeros((h, w))
    v = st.v.ravel().copy()
    q = st.q.copy()
    p = st.p
    A, b, sq = system.rows, system.rhs, system.row_sq_norms
    live = np.flatnonzero(sq > 0)
    if live.size < system.m:
        log.warning("skipping %d zero rows", system.m - live.size)
    nb = np.linalg.norm(b)
    trace = Trace()
    for sweep in range(1, sweeps + 1):
        for i in live:
            a = A[i]
            v -= ((a @ v - b[i]) / sq[i]) * a
        u = v.reshape(h, w)
        for _ in range(lb_steps_per_sweep):
            wk = grad2d(u) - p
            ww = float((wk * wk).sum())
            if ww == 0.0:
                break
            gt = grad2d_adjoint(wk)
            bt = float((gt * gt).sum()) + ww
            if bt < ww:
                raise InconsistentBlock("||B^T w|| < ||w|| cannot happen for B = [grad, -I]")
            t = ww / bt
            u = u - t * gt
            q = q + t * wk
            p = group_shrink2(q, lam)
        v = u.ravel().copy()
        split = float(np.linalg.norm(grad2d(u) - p))
        res = float(np.linalg.norm(A @ v - b) / nb)
        err = None if x_true is None else float(
            np.linalg.norm(v - np.ravel(x_true)) / np.linalg.norm(x_true))
        trace.add(sweep, system.m, res, err, tv_objective(u, p, lam), split=split)
    return v.reshape(h, w), trace


def kkt_residual(system: RowSystem, x, lam: float, support_tol: float = 1e-12) -> float:
    """Largest violation of the optimality conditions of
    ``min lam ||x||_1 + 0.5 ||x||^2  s.t.  A x = b``.

    A multiplier ``y`` is fitted by (minimum-norm) least squares to the
    support equations ``(A^T y)_i = x_i + lam * sign(x_i)``; the result is
    the maximum of the support-equation misfit, the off-support excess
    ``max(|(A^T y)_i| - lam, 0)`` and ``||A x - b||``.
    """
    A, b = system.rows, system.rhs
    x = np.asarray(x, dtype=float)
    on = np.abs(x) > support_tol
    target = x[on] + lam * np.sign(x[on])
    if on.any():
        y = np.linalg.lstsq(A[:, on].T, target, rcond=None)[0]
    else:
        y = np.zeros(A.shape[0])
    aty = A.T @ y
    viol = [float(np.linalg.norm(A @ x - b))]
    if on.any():
        viol.append(float(np.max(np.abs(aty[on] - target))))
    if (~on).any():
        viol.append(float(np.max(np.maximum(np.abs(aty[~on]) - lam, 0.0))))
    return max(viol)
