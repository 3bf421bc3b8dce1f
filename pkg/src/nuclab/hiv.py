"""Sequence-space epidemic automaton with viral/immune coevolution.

Binary genomes of length n make sequence space the n-hypercube; every
sequence is Susceptible, Infected, or Recovered.  One step picks the viral
or the immune branch (50/50 by default):

* immune branch: a uniformly chosen active receptor replicates; with
  probability (1 - q_is) one random bit mutates, and if the mutant equals an
  Infected sequence that site becomes Recovered;
* viral branch: a uniformly chosen Infected site replicates; with
  probability (1 - q_vs) one random bit mutates, and if the mutant equals a
  Susceptible sequence that site becomes Infected.

Every sequence that has ever hosted an infection registers an immune
receptor; receptors persist forever.  The only transitions are S -> I and
I -> R, so I = 0 is absorbing.

Runs also keep a copy of the state at peak infection: absorbing states have
no infected sites, so cluster statistics (and the second-moment criticality
locator) are taken from the peak snapshot.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import jit
from .exponents import EventRecord
from .lattice import ClusterPartition, RngStream, label_from_edges

S, I, R = 0, 1, 2

NOOP, VIRAL_MUTATION, IMMUNE_MUTATION, NEW_INFECTION, RECOVERY = 0, 1, 2, 3, 4

SELECTION_MODES = {"branch": 0, "entity": 1}


@dataclass
class AutomatonParams:
    q_vs: float
    q_is: float
    n: int
    initial_strains: tuple = (0,)
    max_steps: int = 100_000
    selection: str = "branch"

    def __post_init__(self):
        if not (0.0 <= self.q_vs <= 1.0 and 0.0 <= self.q_is <= 1.0):
            raise ValueError("copy fidelities must lie in [0, 1]")
        if self.n < 1 or self.n > 24:
            raise ValueError("sequence length n must be in [1, 24]")
        strains = tuple(int(s) for s in self.initial_strains)
        if len(set(strains)) != len(strains):
            raise ValueError("initial strains must be pairwise distinct")
        if any(s < 0 or s >= 2 ** self.n for s in strains):
            raise ValueError("initial strain index outside sequence space")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.selection!r}")
        self.initial_strains = strains

    @property
    def n_sequences(self) -> int:
        return 2 ** self.n


@dataclass
class SequenceSpace:
    n: int
    state: np.ndarray                 # uint8 over 2^n sequences
    inf_list: np.ndarray              # active infected sequences (first n_inf)
    inf_pos: np.ndarray               # position of sequence in inf_list, -1 if absent
    imm_list: np.ndarray              # registered receptors (first n_imm), append-only
    n_inf: int
    n_imm: int

    @property
    def n_sequences(self) -> int:
        return 2 ** self.n

    @property
    def counts(self):
        """(S, I, R) site counts."""
        n_r = int(np.count_nonzero(self.state == R))
        return self.n_sequences - self.n_inf - n_r, self.n_inf, n_r

    @property
    def immune_receptors(self) -> frozenset:
        return frozenset(int(x) for x in self.imm_list[:self.n_imm])

    @property
    def absorbed(self) -> bool:
        return self.n_inf == 0


def init(params: AutomatonParams, rng=None) -> SequenceSpace:
    """Initial space: listed strains Infected with matching receptors, rest S."""
    n_seq = params.n_sequences
    state = np.zeros(n_seq, dtype=np.uint8)
    inf_list = np.zeros(n_seq, dtype=np.int64)
    inf_pos = np.full(n_seq, -1, dtype=np.int64)
    imm_list = np.zeros(n_seq, dtype=np.int64)
    for k, strain in enumerate(params.initial_strains):
        state[strain] = I
        inf_list[k] = strain
        inf_pos[strain] = k
        imm_list[k] = strain
    m = len(params.initial_strains)
    return SequenceSpace(params.n, state, inf_list, inf_pos, imm_list, m, m)


@jit
def _step_kernel(state, inf_list, inf_pos, imm_list, n_inf, n_imm,
                 n_bits, q_vs, q_is, mode, u0, u1, u2, u3):
    if n_inf == 0:
        return NOOP, n_inf, n_imm
    if mode == 0:
        viral = u0 < 0.5
    else:
        viral = u0 * (n_inf + n_imm) < n_inf
    if viral:
        j = inf_list[int(u1 * n_inf)]
        if u2 < 1.0 - q_vs:
            m = j ^ (1 << int(u3 * n_bits))
            if state[m] == 0:  # susceptible -> infected
                state[m] = 1
                inf_list[n_inf] = m
                inf_pos[m] = n_inf
                n_inf += 1
                imm_list[n_imm] = m
                n_imm += 1
                return NEW_INFECTION, n_inf, n_imm
            return VIRAL_MUTATION, n_inf, n_imm
        return NOOP, n_inf, n_imm
    if n_imm == 0:
        return NOOP, n_inf, n_imm
    r = imm_list[int(u1 * n_imm)]
    if u2 < 1.0 - q_is:
        m = r ^ (1 << int(u3 * n_bits))
        if state[m] == 1:  # infected -> recovered
            state[m] = 2
            pos = inf_pos[m]
            last = inf_list[n_inf - 1]
            inf_list[pos] = last
            inf_pos[last] = pos
            inf_pos[m] = -1
            n_inf -= 1
            return RECOVERY, n_inf, n_imm
        return IMMUNE_MUTATION, n_inf, n_imm
    return NOOP, n_inf, n_imm


@jit
def _run_chunk(state, inf_list, inf_pos, imm_list, n_inf, n_imm, n_bits,
               q_vs, q_is, mode, u, step_start, max_steps, stride,
               traj, traj_len, peak_state, peak_inf, n_rec):
    absorbed = False
    step = step_start
    for k in range(u.shape[0]):
        if step >= max_steps:
            break
        if step % stride == 0:
            n_seq = state.shape[0]
            traj[traj_len, 0] = step
            traj[traj_len, 1] = n_seq - n_inf - n_rec
            traj[traj_len, 2] = n_inf
            traj[traj_len, 3] = n_rec
            traj_len += 1
        event, n_inf, n_imm = _step_kernel(
            state, inf_list, inf_pos, imm_list, n_inf, n_imm,
            n_bits, q_vs, q_is, mode, u[k, 0], u[k, 1], u[k, 2], u[k, 3])
        if event == RECOVERY:
            n_rec += 1
        step += 1
        if n_inf > peak_inf:
            peak_inf = n_inf
            peak_state[:] = state[:]
        if n_inf == 0:
            absorbed = True
            break
    return n_inf, n_imm, step, absorbed, traj_len, peak_inf, n_rec


def step(space: SequenceSpace, params: AutomatonParams, rng) -> int:
    """One automaton step in place; returns the event tag."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = gen.random(4)
    event, n_inf, n_imm = _step_kernel(
        space.state, space.inf_list, space.inf_pos, space.imm_list,
        space.n_inf, space.n_imm, params.n, params.q_vs, params.q_is,
        SELECTION_MODES[params.selection], u[0], u[1], u[2], u[3])
    space.n_inf, space.n_imm = int(n_inf), int(n_imm)
    return int(event)


@dataclass
class RunResult:
    trajectory: np.ndarray      # rows (step, S, I, R)
    space: SequenceSpace
    absorbed: bool
    steps: int
    peak_state: np.ndarray
    peak_infected: int


def run(params: AutomatonParams, rng, stride=None, chunk=65536) -> RunResult:
    """Run until absorption (I = 0) or the step budget."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    space = init(params)
    if stride is None:
        stride = max(1, params.max_steps // 1024)
    mode = SELECTION_MODES[params.selection]
    cap = params.max_steps // stride + 2
    traj = np.zeros((cap, 4), dtype=np.int64)
    traj_len = 0
    peak_state = space.state.copy()
    peak_inf = space.n_inf
    n_inf, n_imm, n_rec = space.n_inf, space.n_imm, 0
    step_now = 0
    absorbed = n_inf == 0
    while not absorbed and step_now < params.max_steps:
        u = gen.random((min(chunk, params.max_steps - step_now), 4))
        n_inf, n_imm, step_now, absorbed, traj_len, peak_inf, n_rec = _run_chunk(
            space.state, space.inf_list, space.inf_pos, space.imm_list,
            n_inf, n_imm, params.n, params.q_vs, params.q_is, mode,
            u, step_now, params.max_steps, stride,
            traj, traj_len, peak_state, peak_inf, n_rec)
    space.n_inf, space.n_imm = int(n_inf), int(n_imm)
    traj[traj_len] = (step_now, space.n_sequences - n_inf - n_rec, n_inf, n_rec)
    traj_len += 1
    return RunResult(traj[:traj_len].copy(), space, bool(absorbed), int(step_now),
                     peak_state, int(peak_inf))


def infected_clusters_from_state(state: np.ndarray, n: int) -> ClusterPartition:
    """Clusters of Infected sequences under Hamming-distance-1 adjacency."""
    infected = np.nonzero(state == I)[0].astype(np.int64)
    compact = np.full(state.shape[0], -1, dtype=np.int64)
    compact[infected] = np.arange(infected.size)
    ea, eb = [], []
    for b in range(n):
        partner = infected ^ (1 << b)
        ok = (partner > infected) & (state[partner] == I)
        ea.append(compact[infected[ok]])
        eb.append(compact[partner[ok]])
    if infected.size == 0:
        return ClusterPartition.from_labels(np.empty(0, dtype=np.int64))
    return label_from_edges(infected.size,
                            np.concatenate(ea), np.concatenate(eb))


def infected_clusters(space: SequenceSpace) -> ClusterPartition:
    return infected_clusters_from_state(space.state, space.n)


def cluster_sizes_of(partition: ClusterPartition) -> np.ndarray:
    return np.fromiter(partition.cluster_sizes.values(), dtype=np.int64,
                       count=len(partition.cluster_sizes))


@dataclass
class PhaseDiagram:
    q_vs: np.ndarray
    q_is: np.ndarray
    infected_ratio: np.ndarray   # shape (len(q_vs), len(q_is))
    se: np.ndarray


def phase_diagram(n, q_vs_grid, q_is_grid, replicas, rng: RngStream,
                  max_steps=None, initial_strains=(0,), selection="branch") -> PhaseDiagram:
    """Mean final infected ratio I/2^n (at absorption or budget) per grid cell."""
    q_vs_grid = np.asarray(q_vs_grid, dtype=np.float64)
    q_is_grid = np.asarray(q_is_grid, dtype=np.float64)
    if max_steps is None:
        max_steps = 60 * 2 ** n
    ratios = np.zeros((q_vs_grid.size, q_is_grid.size))
    ses = np.zeros_like(ratios)
    n_seq = 2 ** n
    cell = 0
    for a, q_vs in enumerate(q_vs_grid):
        for b, q_is in enumerate(q_is_grid):
            params = AutomatonParams(q_vs=float(q_vs), q_is=float(q_is), n=n,
                                     initial_strains=initial_strains,
                                     max_steps=max_steps, selection=selection)
            vals = np.empty(replicas)
            for rep in range(replicas):
                res = run(params, rng.substream(cell * replicas + rep))
                vals[rep] = res.space.n_inf / n_seq
            ratios[a, b] = vals.mean()
            ses[a, b] = vals.std(ddof=1) / np.sqrt(replicas) if replicas > 1 else 0.0
            cell += 1
    return PhaseDiagram(q_vs_grid, q_is_grid, ratios, ses)


def peak_cluster_second_moment(res: RunResult, exclude_largest=True) -> float:
    """Sum s^2 over peak-state infected clusters (largest excluded) per sequence."""
    part = infected_clusters_from_state(res.peak_state, res.space.n)
    sizes = cluster_sizes_of(part).astype(np.float64)
    if sizes.size and exclude_largest:
        sizes = np.delete(sizes, int(np.argmax(sizes)))
    return float(np.sum(sizes ** 2)) / 2 ** res.space.n


def qvs_criticality_scan(n, q_is, q_vs_grid, replicas, rng: RngStream,
                         max_steps=None, initial_strains=(0,), selection="branch"):
    """Mean peak-snapshot cluster second moment along q_vs; returns
    (grid, means, argmax q_vs)."""
    q_vs_grid = np.asarray(q_vs_grid, dtype=np.float64)
    if max_steps is None:
        max_steps = 60 * 2 ** n
    means = np.empty(q_vs_grid.size)
    for a, q_vs in enumerate(q_vs_grid):
        params = AutomatonParams(q_vs=float(q_vs), q_is=float(q_is), n=n,
                                 initial_strains=initial_strains,
                                 max_steps=max_steps, selection=selection)
        vals = [peak_cluster_second_moment(run(params, rng.substream(a * replicas + r)))
                for r in range(replicas)]
        means[a] = np.mean(vals)
    return q_vs_grid, means, float(q_vs_grid[int(np.argmax(means))])


def sample_cluster_events(n, q_vs, q_is, n_runs, rng: RngStream, max_steps=None,
                          initial_strains=(0,), selection="branch",
                          stream_offset=0) -> list:
    """Peak-snapshot infected-cluster sizes as EventRecords (control = q_vs)."""
    if max_steps is None:
        max_steps = 60 * 2 ** n
    params = AutomatonParams(q_vs=q_vs, q_is=q_is, n=n,
                             initial_strains=initial_strains,
                             max_steps=max_steps, selection=selection)
    events = []
    for k in range(n_runs):
        res = run(params, rng.substream(stream_offset + k))
        part = infected_clusters_from_state(res.peak_state, n)
        sizes = cluster_sizes_of(part)
        if sizes.size:
            events.append(EventRecord(sizes, control=float(q_vs)))
    return events
