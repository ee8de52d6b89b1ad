"""Trellis map matching of gravity measurements against windowed map cells.

Candidate states at buffered step t are the cells of an n x n window built
around the INS position, optionally refined into an o x o sub-cell lattice
per cell (sub-cells share the parent cell's gravity value).  A path assigns
one state per step and scores the sum of log measurement likelihoods plus
log transition likelihoods, where the transition mean advances the previous
state by the measured velocity.  Greedy chain matchers fix a start state,
extend step by step with a per-step argmax, and select among starts by total
score; the exact solvers optimize over whole state sequences and exist as
oracles for the greedy family.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateSigmaError,
    EmptyCandidatesError,
    LengthMismatchError,
    TooLargeError,
)
from .insmodel import SegmentBuffers
from .mapgrid import GridWindow, subcell_offsets

LOG_2PI = float(np.log(2.0 * np.pi))

# Path-score gap treated as a tie when choosing among candidate chains.
TIE_TOL = 1e-9

# Upper bound on the number of sequences brute_force_map will enumerate.
ENUMERATION_GUARD = 1_000_000

# Soft cap on broadcast (chains x candidates) block size, to bound memory.
_BLOCK = 2_000_000


@dataclass(frozen=True)
class MatchConfig:
    """Matcher parameters.

    T is the correction cadence in steps, n the (odd) window size in cells,
    o the (odd) sub-cell refinement per cell axis, alpha the likelihood-ratio
    pruning threshold in [0, 1] (0 disables pruning), sigma_z the modeled
    gravimeter noise (mGal), sigma_v the modeled velocity noise (deg/s), and
    dt_s the step period in seconds.
    """

    T: int = 6
    n: int = 13
    o: int = 1
    alpha: float = 0.0
    sigma_z: float = 1.0
    sigma_v: float = 9e-6
    dt_s: float = 12.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("segment length T must be >= 1")
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError("window size n must be odd and >= 3")
        if self.o < 1 or self.o % 2 == 0:
            raise ValueError("sub-cell factor o must be odd and >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("pruning threshold alpha must lie in [0, 1]")
        if self.dt_s <= 0:
            raise ValueError("step period must be positive")


@dataclass(frozen=True)
class CandidateState:
    """One matched state: buffered step t, cell label j, sub-cell label l."""

    t: int
    j: int
    l: int
    lon: float
    lat: float
    gravity: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.lon, self.lat)


@dataclass
class PathEstimate:
    """A matched state sequence with its accumulated log posterior.

    work counts likelihood-pair evaluations charged to the search (for the
    greedy family: sum over steps of |A_t| * |A_{t+1}| surviving cells).
    """

    states: list[CandidateState]
    log_posterior: float
    work: int = 0

    def positions(self) -> np.ndarray:
        return np.array([[s.lon, s.lat] for s in self.states], dtype=np.float64)

    def labels(self) -> list[tuple[int, int]]:
        return [(s.j, s.l) for s in self.states]


@dataclass(frozen=True)
class PrunedIndexSets:
    """Surviving cell labels per buffered step, each ascending and 1-based."""

    labels: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def sizes(self) -> list[int]:
        return [len(a) for a in self.labels]


def meas_loglik(z, gravity, sigma_z):
    """Log density of measurement z under N(gravity, sigma_z^2); array-friendly."""
    if sigma_z <= 0:
        raise DegenerateSigmaError("sigma_z must be positive")
    resid = np.asarray(z, dtype=np.float64) - np.asarray(gravity, dtype=np.float64)
    return -0.5 * LOG_2PI - np.log(sigma_z) - resid * resid / (2.0 * sigma_z * sigma_z)


def trans_loglik(c_next, c_prev, velocity, dt_s, sigma_v):
    """Log density of c_next under an isotropic Gaussian step model.

    The mean is c_prev advanced by the measured velocity (deg/hour) over dt_s
    seconds; the per-axis standard deviation is sigma_v (deg/s) times dt_s.
    Positions are (..., 2) arrays or 2-tuples; broadcasting applies.
    """
    if sigma_v <= 0:
        raise DegenerateSigmaError("sigma_v must be positive")
    sigma = sigma_v * dt_s
    mean = np.asarray(c_prev, dtype=np.float64) + np.asarray(
        velocity, dtype=np.float64
    ) * (dt_s / 3600.0)
    diff = np.asarray(c_next, dtype=np.float64) - mean
    sq = np.sum(diff * diff, axis=-1)
    return -LOG_2PI - 2.0 * np.log(sigma) - sq / (2.0 * sigma * sigma)


def prune(window: GridWindow, z: float, cfg: MatchConfig) -> np.ndarray:
    """Cell labels whose measurement likelihood ratio to the best is >= alpha.

    Returns an ascending 1-based label array.  alpha = 0 keeps every cell;
    the best-matching cell always survives.
    """
    logliks = meas_loglik(z, window.gravity, cfg.sigma_z)
    if cfg.alpha <= 0.0:
        return np.arange(1, window.n * window.n + 1, dtype=np.int64)
    keep = logliks - np.max(logliks) >= np.log(cfg.alpha)
    return np.flatnonzero(keep).astype(np.int64) + 1


def prune_all(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PrunedIndexSets:
    """Pruned label sets for every buffered step."""
    if len(windows) != len(buffers):
        raise LengthMismatchError("windows and buffers must share one length")
    zs = buffers.z_array()
    return PrunedIndexSets(
        tuple(prune(w, z, cfg) for w, z in zip(windows, zs))
    )


# ---------------------------------------------------------------------------
# Vectorized greedy chains
# ---------------------------------------------------------------------------


def _step_geometry(window: GridWindow, labels: np.ndarray, o: int):
    """Cell positions and sub-cell lattice scale for one step's survivors."""
    cell_pos = window.positions[labels - 1]
    spacing = np.array([window.res_lon / o, window.res_lat / o])
    return cell_pos, spacing


def _greedy_advance(
    chain_pos: np.ndarray,
    chain_logp: np.ndarray,
    velocity: np.ndarray,
    cell_pos: np.ndarray,
    cell_meas: np.ndarray,
    spacing: np.ndarray,
    o: int,
    cfg: MatchConfig,
):
    """One per-step argmax for many chains at once.

    For each chain, scores every surviving cell at its best sub-cell (the
    lattice point nearest the predicted position, half-way ties toward the
    lower index) and takes the first maximum, which breaks exact score ties
    toward the lowest (cell, sub-cell) label pair.  Returns the chosen cell
    index (into cell_pos), sub-cell label, position, and updated log score.
    """
    sigma = cfg.sigma_v * cfg.dt_s
    if sigma <= 0:
        raise DegenerateSigmaError("sigma_v must be positive")
    const = -LOG_2PI - 2.0 * np.log(sigma)
    half = (o - 1) // 2
    n_chains = chain_pos.shape[0]
    n_cells = cell_pos.shape[0]
    mu = chain_pos + velocity * (cfg.dt_s / 3600.0)
    out_cell = np.empty(n_chains, dtype=np.int64)
    out_l = np.empty(n_chains, dtype=np.int64)
    out_pos = np.empty((n_chains, 2), dtype=np.float64)
    out_logp = np.empty(n_chains, dtype=np.float64)
    chunk = max(1, _BLOCK // max(1, n_cells))
    for lo in range(0, n_chains, chunk):
        hi = min(lo + chunk, n_chains)
        delta = mu[lo:hi, None, :] - cell_pos[None, :, :]
        steps = np.clip(np.ceil(delta / spacing - 0.5), -half, half)
        resid = delta - steps * spacing
        trans = const - np.sum(resid * resid, axis=-1) / (2.0 * sigma * sigma)
        scores = cell_meas[None, :] + trans
        best = np.argmax(scores, axis=1)
        rows = np.arange(hi - lo)
        k = steps[rows, best].astype(np.int64)
        out_cell[lo:hi] = best
        out_l[lo:hi] = (k[:, 1] + half) * o + (k[:, 0] + half) + 1
        out_pos[lo:hi] = cell_pos[best] + steps[rows, best] * spacing
        out_logp[lo:hi] = chain_logp[lo:hi] + scores[rows, best]
    return out_cell, out_l, out_pos, out_logp


def _run_chains(
    windows: list[GridWindow],
    buffers: SegmentBuffers,
    pruned: PrunedIndexSets,
    cfg: MatchConfig,
    start_j: np.ndarray,
    start_l: np.ndarray,
    start_pos: np.ndarray,
):
    """Extend every start state greedily through all buffered steps.

    Returns label, position, and log-score traces for all chains plus the
    work counter (surviving-cell pairs evaluated per step transition).
    """
    t_len = len(windows)
    if t_len == 0:
        raise EmptyCandidatesError("no buffered steps to match")
    for labels in pruned.labels:
        if len(labels) == 0:
            raise EmptyCandidatesError("a pruned candidate set is empty")
    zs = buffers.z_array()
    vs = buffers.v_array()
    n_chains = start_j.shape[0]
    if n_chains == 0:
        raise EmptyCandidatesError("no start states")
    js = np.empty((n_chains, t_len), dtype=np.int64)
    ls = np.empty((n_chains, t_len), dtype=np.int64)
    pos = np.empty((n_chains, t_len, 2), dtype=np.float64)
    js[:, 0] = start_j
    ls[:, 0] = start_l
    pos[:, 0] = start_pos
    start_grav = windows[0].gravity[start_j - 1]
    logp = np.asarray(meas_loglik(zs[0], start_grav, cfg.sigma_z), dtype=np.float64)
    work = 0
    cur = start_pos
    for t in range(1, t_len):
        labels = pruned.labels[t]
        cell_pos, spacing = _step_geometry(windows[t], labels, cfg.o)
        cell_meas = np.asarray(
            meas_loglik(zs[t], windows[t].gravity[labels - 1], cfg.sigma_z)
        )
        cell_idx, l_t, cur, logp = _greedy_advance(
            cur, logp, vs[t - 1], cell_pos, cell_meas, spacing, cfg.o, cfg
        )
        js[:, t] = labels[cell_idx]
        ls[:, t] = l_t
        pos[:, t] = cur
        work += len(pruned.labels[t - 1]) * len(labels)
    return js, ls, pos, logp, work


def _select_index(
    logp: np.ndarray, positions: np.ndarray, s_ins: np.ndarray
) -> int:
    """Best chain index: max log score, near-ties resolved INS-nearest.

    Chains within TIE_TOL of the maximum compete on the summed Euclidean
    degree distance between their positions and the INS positions; remaining
    ties take the first (lowest start label) chain.
    """
    best = np.max(logp)
    tied = np.flatnonzero(logp >= best - TIE_TOL)
    if len(tied) == 1:
        return int(tied[0])
    diff = positions[tied] - s_ins[None, :, :]
    dist = np.sum(np.hypot(diff[..., 0], diff[..., 1]), axis=1)
    return int(tied[np.argmin(dist)])


def _materialize(
    windows: list[GridWindow],
    js: np.ndarray,
    ls: np.ndarray,
    pos: np.ndarray,
    logp: float,
    work: int,
) -> PathEstimate:
    states = [
        CandidateState(
            t=t + 1,
            j=int(js[t]),
            l=int(ls[t]),
            lon=float(pos[t, 0]),
            lat=float(pos[t, 1]),
            gravity=float(windows[t].gravity[int(js[t]) - 1]),
        )
        for t in range(len(windows))
    ]
    return PathEstimate(states=states, log_posterior=float(logp), work=work)


def _start_states(window: GridWindow, labels: np.ndarray, o: int):
    """All (cell, sub-cell) start states, cell-major then sub-cell order."""
    cell_pos = window.positions[labels - 1]
    offs = subcell_offsets(o, window.res_lon, window.res_lat)
    o2 = o * o
    start_j = np.repeat(labels, o2)
    start_l = np.tile(np.arange(1, o2 + 1, dtype=np.int64), len(labels))
    start_pos = (cell_pos[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    return start_j, start_l, start_pos


def _chain_family(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Shared implementation of the greedy chain matchers."""
    _check_segment(windows, buffers, cfg)
    pruned = prune_all(windows, buffers, cfg)
    start_j, start_l, start_pos = _start_states(windows[0], pruned.labels[0], cfg.o)
    js, ls, pos, logp, work = _run_chains(
        windows, buffers, pruned, cfg, start_j, start_l, start_pos
    )
    idx = _select_index(logp, pos, buffers.s_ins_array())
    return _materialize(windows, js[idx], ls[idx], pos[idx], logp[idx], work)


def _check_segment(windows, buffers, cfg) -> None:
    if len(windows) == 0:
        raise EmptyCandidatesError("no windows supplied")
    if len(windows) != len(buffers):
        raise LengthMismatchError("windows and buffers must share one length")


def greedy_chain(
    start: CandidateState,
    windows: list[GridWindow],
    buffers: SegmentBuffers,
    pruned: PrunedIndexSets,
    cfg: MatchConfig,
) -> PathEstimate:
    """Extend a single fixed start state with per-step argmax transitions.

    At each later step the chain scores every surviving cell's best sub-cell
    against measurement and transition likelihood and keeps the maximum,
    breaking exact ties toward the lowest (cell, sub-cell) labels.
    """
    _check_segment(windows, buffers, cfg)
    if len(pruned) != len(windows):
        raise LengthMismatchError("pruned sets and windows must share one length")
    js, ls, pos, logp, work = _run_chains(
        windows,
        buffers,
        pruned,
        cfg,
        np.array([start.j], dtype=np.int64),
        np.array([start.l], dtype=np.int64),
        np.array([[start.lon, start.lat]], dtype=np.float64),
    )
    return _materialize(windows, js[0], ls[0], pos[0], float(logp[0]), work)


def select_start(chains: list[PathEstimate], buffers: SegmentBuffers) -> PathEstimate:
    """Pick the chain with the highest log posterior.

    Chains within 1e-9 of the best compete on summed Euclidean distance to
    the INS positions (nearest wins); remaining ties keep the earliest chain.
    """
    if not chains:
        raise EmptyCandidatesError("no chains to select from")
    logp = np.array([c.log_posterior for c in chains], dtype=np.float64)
    positions = np.stack([c.positions() for c in chains])
    return chains[_select_index(logp, positions, buffers.s_ins_array())]


def vbmp(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Greedy chain matcher over whole cells with no pruning.

    Runs one greedy chain from every cell of the first window and selects
    the best total score.  alpha and o in cfg are ignored (treated as 0, 1).
    """
    return _chain_family(windows, buffers, replace(cfg, alpha=0.0, o=1))


def rvbmp(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Cell-level greedy chain matcher with likelihood-ratio pruning.

    Identical to vbmp except that only cells surviving the per-step pruning
    threshold cfg.alpha participate as starts and transition targets.
    """
    return _chain_family(windows, buffers, replace(cfg, o=1))


def rvbmp2(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Two-layer greedy chain matcher: pruned cells refined into sub-cells.

    Chains start from every sub-cell of every surviving first-step cell and
    transition onto the sub-cell lattice of surviving cells, so the returned
    positions live on the o x o per-cell lattice.  With o=1 this coincides
    with rvbmp exactly.
    """
    return _chain_family(windows, buffers, cfg)


# ---------------------------------------------------------------------------
# Exact solvers (oracles)
# ---------------------------------------------------------------------------


def _explicit_states(windows, pruned, cfg):
    """Explicit (cell, sub-cell) state lists per step: labels, positions."""
    js, ls, pos = [], [], []
    for w, labels in zip(windows, pruned.labels):
        offs = subcell_offsets(cfg.o, w.res_lon, w.res_lat)
        o2 = cfg.o * cfg.o
        cell_pos = w.positions[labels - 1]
        js.append(np.repeat(labels, o2))
        ls.append(np.tile(np.arange(1, o2 + 1, dtype=np.int64), len(labels)))
        pos.append((cell_pos[:, None, :] + offs[None, :, :]).reshape(-1, 2))
    return js, ls, pos


def viterbi_exact(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Exact MAP state sequence by dynamic programming over the trellis.

    Optimizes the same factorized score as the greedy family over the same
    state space (pruned cells times sub-cells); its score therefore upper
    bounds every greedy chain's.  Exact score ties resolve toward the lowest
    label sequence.
    """
    _check_segment(windows, buffers, cfg)
    pruned = prune_all(windows, buffers, cfg)
    js, ls, pos = _explicit_states(windows, pruned, cfg)
    zs = buffers.z_array()
    vs = buffers.v_array()
    sigma = cfg.sigma_v * cfg.dt_s
    if sigma <= 0:
        raise DegenerateSigmaError("sigma_v must be positive")
    const = -LOG_2PI - 2.0 * np.log(sigma)
    value = np.asarray(
        meas_loglik(zs[0], windows[0].gravity[js[0] - 1], cfg.sigma_z),
        dtype=np.float64,
    )
    back: list[np.ndarray] = []
    work = 0
    for t in range(1, len(windows)):
        meas_t = np.asarray(
            meas_loglik(zs[t], windows[t].gravity[js[t] - 1], cfg.sigma_z)
        )
        mu = pos[t - 1] + vs[t - 1] * (cfg.dt_s / 3600.0)
        n_prev, n_cur = len(value), len(meas_t)
        work += n_prev * n_cur
        best_val = np.full(n_cur, -np.inf)
        best_ptr = np.zeros(n_cur, dtype=np.int64)
        chunk = max(1, _BLOCK // max(1, n_prev))
        for lo in range(0, n_cur, chunk):
            hi = min(lo + chunk, n_cur)
            diff = pos[t][lo:hi][None, :, :] - mu[:, None, :]
            scores = value[:, None] + const - np.sum(diff * diff, axis=-1) / (
                2.0 * sigma * sigma
            )
            best_ptr[lo:hi] = np.argmax(scores, axis=0)
            best_val[lo:hi] = scores[best_ptr[lo:hi], np.arange(hi - lo)]
        value = meas_t + best_val
        back.append(best_ptr)
    idx = int(np.argmax(value))
    path = [idx]
    for ptr in reversed(back):
        path.append(int(ptr[path[-1]]))
    path.reverse()
    sel_j = np.array([js[t][i] for t, i in enumerate(path)])
    sel_l = np.array([ls[t][i] for t, i in enumerate(path)])
    sel_pos = np.array([pos[t][i] for t, i in enumerate(path)])
    return _materialize(windows, sel_j, sel_l, sel_pos, float(np.max(value)), work)


def brute_force_map(
    windows: list[GridWindow], buffers: SegmentBuffers, cfg: MatchConfig
) -> PathEstimate:
    """Score every admissible state sequence and return the best.

    Refuses instances whose sequence count exceeds ENUMERATION_GUARD
    (TooLargeError).  Ties within 1e-9 of the best score resolve to the
    sequence nearest the INS positions, then to the lexicographically
    smallest label sequence, mirroring select_start.
    """
    _check_segment(windows, buffers, cfg)
    pruned = prune_all(windows, buffers, cfg)
    for labels in pruned.labels:
        if len(labels) == 0:
            raise EmptyCandidatesError("a pruned candidate set is empty")
    js, ls, pos = _explicit_states(windows, pruned, cfg)
    sizes = [len(a) for a in js]
    total = int(np.prod([float(s) for s in sizes]))
    if float(np.prod([float(s) for s in sizes])) > ENUMERATION_GUARD:
        raise TooLargeError(
            f"{'x'.join(map(str, sizes))} sequences exceed the enumeration guard"
        )
    zs = buffers.z_array()
    vs = buffers.v_array()
    s_ins = buffers.s_ins_array()
    grid = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    combos = np.stack([g.ravel() for g in grid], axis=1)
    t_len = len(windows)
    score = np.zeros(total, dtype=np.float64)
    ins_dist = np.zeros(total, dtype=np.float64)
    prev_pos = None
    for t in range(t_len):
        idx_t = combos[:, t]
        meas_t = np.asarray(
            meas_loglik(zs[t], windows[t].gravity[js[t] - 1], cfg.sigma_z)
        )
        score += meas_t[idx_t]
        pos_t = pos[t][idx_t]
        if t > 0:
            score += trans_loglik(pos_t, prev_pos, vs[t - 1], cfg.dt_s, cfg.sigma_v)
        diff = pos_t - s_ins[t]
        ins_dist += np.hypot(diff[:, 0], diff[:, 1])
        prev_pos = pos_t
    best = np.max(score)
    tied = np.flatnonzero(score >= best - TIE_TOL)
    winner = int(tied[np.argmin(ins_dist[tied])])
    sel = combos[winner]
    sel_j = np.array([js[t][sel[t]] for t in range(t_len)])
    sel_l = np.array([ls[t][sel[t]] for t in range(t_len)])
    sel_pos = np.array([pos[t][sel[t]] for t in range(t_len)])
    return _materialize(
        windows, sel_j, sel_l, sel_pos, float(score[winner]), total * (t_len - 1)
    )


def path_log_posterior(
    path: PathEstimate,
    buffers: SegmentBuffers,
    cfg: MatchConfig,
) -> float:
    """Recompute a path's factorized score from its states and the buffers."""
    zs = buffers.z_array()
    vs = buffers.v_array()
    if len(path.states) != len(zs):
        raise LengthMismatchError("path and buffers must share one length")
    total = float(meas_loglik(zs[0], path.states[0].gravity, cfg.sigma_z))
    for t in range(1, len(path.states)):
        total += float(
            meas_loglik(zs[t], path.states[t].gravity, cfg.sigma_z)
        ) + float(
            trans_loglik(
                path.states[t].position,
                path.states[t - 1].position,
                vs[t - 1],
                cfg.dt_s,
                cfg.sigma_v,
            )
        )
    return total
