"""Differentiable agent-based SIR model on a contact graph.

Agents move along predetermined trajectories over a static graph.  Per
step, susceptible agents are exposed to every co-located infected agent
with a per-node infection probability; an infected agent recovers after
an exponentially distributed delay drawn by inverse transform sampling,
so the gradient of the delay with respect to the rate input is exact.

The differentiable run keeps continuous state indicators in [0, 1]; the
discrete reference twin consumes the identical keyed random draws, so
the two stay in lockstep wherever no draw lands inside a smoothing
window.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from ._kinds import ADDC as _ADDC
from .ad import Tape, Var, Vec, exp, log
from .smooth import DEFAULT_K, logistic


@dataclass
class ContactGraph:
    n_nodes: int
    adjacency: list            # list of int arrays, degree >= 1 everywhere
    coefficients: np.ndarray   # per-node infection probability

    def __post_init__(self):
        if len(self.adjacency) != self.n_nodes:
            raise ValueError("adjacency list length mismatch")
        for i, nb in enumerate(self.adjacency):
            if len(nb) < 1:
                raise ValueError(f"node {i} is isolated; movement needs "
                                 "degree >= 1")


def random_geometric_graph(n_nodes, avg_degree, seed, coefficients=None):
    """Uniform points in the unit square, edges within a radius found by
    bisection on the target average degree.  Isolated nodes are attached
    to their nearest neighbor so movement is always possible."""
    gen = np.random.default_rng(seed)
    pts = gen.uniform(size=(n_nodes, 2))
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)

    def mean_degree(r):
        return (d2 <= r * r).sum() / n_nodes

    lo, hi = 0.0, math.sqrt(2.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mean_degree(mid) < avg_degree:
            lo = mid
        else:
            hi = mid
    adj_mat = d2 <= hi * hi
    nearest = np.argmin(d2, axis=1)
    for i in range(n_nodes):
        if not adj_mat[i].any():
            adj_mat[i, nearest[i]] = adj_mat[nearest[i], i] = True
    adjacency = [np.flatnonzero(adj_mat[i]) for i in range(n_nodes)]
    if coefficients is None:
        coefficients = np.zeros(n_nodes)
    return ContactGraph(n_nodes, adjacency, np.asarray(coefficients,
                                                       dtype=np.float64))


@dataclass
class EpidemicInputs:
    initial_infection_prob: float
    coefficients: np.ndarray     # one per node
    recovery_rate: float         # exponential rate, 1/steps

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if not 0.0 <= self.initial_infection_prob <= 1.0:
            raise ValueError("initial infection probability must be in [0,1]")
        if ((self.coefficients < 0.0) | (self.coefficients > 1.0)).any():
            raise ValueError("infection coefficients must be in [0,1]")
        if self.recovery_rate <= 0.0:
            raise ValueError("recovery rate must be positive")


def agent_trajectories(graph, n_agents, n_steps, seed):
    """Predetermined location sequence, shape (n_steps + 1, n_agents).
    Start nodes uniform; each step an agent moves to a uniformly chosen
    neighbor.  Fixed once the seed is fixed."""
    ids = np.arange(n_agents)
    loc = np.empty((n_steps + 1, n_agents), dtype=np.int64)
    u0 = rng.uniform(seed, rng.INIT_LOC, ids, np.full(n_agents, 1))
    loc[0] = (u0 * graph.n_nodes).astype(np.int64)
    deg = np.array([len(a) for a in graph.adjacency])
    for s in range(n_steps):
        u = rng.uniform(seed, rng.MOVE, ids, np.full(n_agents, s))
        cur = loc[s]
        pick = (u * deg[cur]).astype(np.int64)
        loc[s + 1] = [graph.adjacency[cur[a]][pick[a]] for a in ids]
    return loc


def _colocated_pairs(loc):
    """Ordered pairs (a, j), a != j, of agents sharing a node."""
    order = np.argsort(loc, kind="stable")
    ls = loc[order]
    starts = np.flatnonzero(np.r_[True, ls[1:] != ls[:-1]])
    ends = np.r_[starts[1:], len(ls)]
    A, J = [], []
    for s, e in zip(starts, ends):
        g = e - s
        if g < 2:
            continue
        members = order[s:e]
        aa = np.repeat(members, g)
        jj = np.tile(members, g)
        m = aa != jj
        A.append(aa[m])
        J.append(jj[m])
    if not A:
        z = np.zeros(0, dtype=np.int64)
        return z, z
    return np.concatenate(A), np.concatenate(J)


@dataclass
class EpidemicDiffResult:
    tape: Tape
    initial_prob: Var
    coefficients: Vec
    recovery_rate: Var
    trajectory: list         # per step (S, I, R) Vars, continuous counts
    infected: Vec
    recovered: Vec


def run_epidemic_diff(graph, inputs, n_agents, n_steps, seed,
                      k=DEFAULT_K, tape=None):
    """Differentiable run; registers initial probability, per-node
    coefficients and recovery rate as tape inputs."""
    t = tape if tape is not None else Tape()
    p0 = t.input(inputs.initial_infection_prob)
    coeffs = t.input_vector(inputs.coefficients)
    rate = t.input(inputs.recovery_rate)
    inv_rate = 1.0 / rate
    core = t.core
    ids = np.arange(n_agents)
    loc = agent_trajectories(graph, n_agents, n_steps, seed)

    # init: infected_a = l_k(p - u_a); recovery drawn for everyone, only
    # blended in proportionally to the infection indicator
    u_init = rng.uniform(seed, rng.INIT_INFECT, ids)
    infected = logistic(
        Vec(t, core.unop_carr(_ADDC, np.full(n_agents, p0.idx), -u_init)),
        0.0, k)
    infected = logistic(infected, 0.5, k)
    recovered = t.constant_vector(np.zeros(n_agents))
    sentinel = float(n_steps) + 1.0
    u_rec = rng.uniform(seed, rng.RECOVERY, ids, np.zeros(n_agents, np.int64))
    delay = inv_rate * t.constant_vector(-np.log(u_rec))
    gate0 = logistic(infected, 0.5, k)
    timer = gate0 * delay + (1.0 - gate0) * sentinel

    trajectory = []
    for s in range(n_steps):
        expired = Vec(t, core.logistic(timer.handles, 0.0, -k))
        recov = infected * expired

        cur = loc[s]
        A, J = _colocated_pairs(cur)
        if len(A):
            u_c = rng.uniform(seed, rng.CONTACT, A, J, np.full(len(A), s))
            ce = Vec(t, core.unop_carr(_ADDC, coeffs.handles[cur[A]], -u_c))
            hit = logistic(ce, 0.0, k)
            x = infected.gather(J) * hit
            log1m = log(1.0 - x)
            sums = log1m.segment_sum(A, n_agents)
            hazard = 1.0 - exp(sums)
        else:
            hazard = t.constant_vector(np.zeros(n_agents))
        susc = (1.0 - infected) * (1.0 - recovered)
        new_inf = susc * hazard

        u_rec = rng.uniform(seed, rng.RECOVERY, ids,
                            np.full(n_agents, s + 1, dtype=np.int64))
        delay = inv_rate * t.constant_vector(-np.log(u_rec))
        gate = logistic(new_inf, 0.5, k)
        timer = gate * delay + (1.0 - gate) * (timer - 1.0)

        # re-saturate the indicators so partial masses resolve the same
        # way the discrete twin thresholds them; without this, fuzzy
        # contributions accumulate across steps and drift the attribution
        infected = logistic(infected + new_inf - recov, 0.5, k)
        recovered = logistic(recovered + recov, 0.5, k)

        i_count = infected.sum()
        r_count = recovered.sum()
        trajectory.append((float(n_agents) - i_count - r_count,
                           i_count, r_count))

    return EpidemicDiffResult(t, p0, coeffs, rate, trajectory, infected,
                              recovered)


def run_epidemic_reference(graph, inputs, n_agents, n_steps, seed):
    """Discrete twin on the same keyed random draws."""
    ids = np.arange(n_agents)
    loc = agent_trajectories(graph, n_agents, n_steps, seed)
    coeffs = inputs.coefficients
    rate = inputs.recovery_rate

    u_init = rng.uniform(seed, rng.INIT_INFECT, ids)
    infected = inputs.initial_infection_prob - u_init > 0.0
    recovered = np.zeros(n_agents, dtype=bool)
    sentinel = float(n_steps) + 1.0
    u_rec = rng.uniform(seed, rng.RECOVERY, ids, np.zeros(n_agents, np.int64))
    timer = np.where(infected, -np.log(u_rec) / rate, sentinel)

    trajectory = []
    for s in range(n_steps):
        expired = timer < 0.0
        recov = infected & expired

        cur = loc[s]
        A, J = _colocated_pairs(cur)
        hazard = np.zeros(n_agents, dtype=bool)
        if len(A):
            u_c = rng.uniform(seed, rng.CONTACT, A, J, np.full(len(A), s))
            hit = infected[J] & (coeffs[cur[A]] - u_c > 0.0)
            np.logical_or.at(hazard, A, hit)
        new_inf = ~infected & ~recovered & hazard

        u_rec = rng.uniform(seed, rng.RECOVERY, ids,
                            np.full(n_agents, s + 1, dtype=np.int64))
        timer = np.where(new_inf, -np.log(u_rec) / rate, timer - 1.0)

        recovered = recovered | recov
        infected = (infected | new_inf) & ~recov

        i_count = int(infected.sum())
        r_count = int(recovered.sum())
        trajectory.append((n_agents - i_count - r_count, i_count, r_count))

    return trajectory, infected, recovered


def attribute_states(infected, recovered):
    """Discrete attribution with threshold 0.5: 0=S, 1=I, 2=R."""
    inf = np.asarray(infected, dtype=np.float64)
    rec = np.asarray(recovered, dtype=np.float64)
    return np.where(rec > 0.5, 2, np.where(inf > 0.5, 1, 0))


def state_mismatch(diff_states, ref_states):
    """Fraction of agents attributed to a different discrete state.

    Each argument is an (infected, recovered) pair of indicator arrays;
    the differentiable side may pass continuous values.
    """
    a = attribute_states(*diff_states)
    b = attribute_states(*ref_states)
    if len(a) != len(b):
        raise ValueError("agent count mismatch")
    return float(np.mean(a != b))


def calibration_loss(run_trajectory, reference_trajectory):
    """Sum over steps of squared per-state count differences.

    Works for differentiable (Var counts) or plain trajectories; the loss
    of a trajectory against itself is exactly zero.
    """
    if len(run_trajectory) != len(reference_trajectory):
        raise ValueError("trajectory length mismatch")
    loss = 0.0
    for row, ref in zip(run_trajectory, reference_trajectory):
        for x, y in zip(row, ref):
            d = x - y
            loss = loss + d * d
    return loss


# -- file formats ----------------------------------------------------------

def save_graph(path, graph):
    """Plain text: one `node <id> <coefficient>` line per node, then one
    `edge <u> <v>` line per undirected edge (u < v)."""
    with open(path, "w") as f:
        for i in range(graph.n_nodes):
            f.write(f"node {i} {float(graph.coefficients[i])!r}\n")
        for i in range(graph.n_nodes):
            for j in graph.adjacency[i]:
                if i < j:
                    f.write(f"edge {i} {j}\n")


def load_graph(path):
    coeffs = {}
    edges = []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "node":
                coeffs[int(parts[1])] = float(parts[2])
            elif parts[0] == "edge":
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"unrecognized line: {line.strip()}")
    n = len(coeffs)
    adjacency = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    adjacency = [np.array(sorted(a), dtype=np.int64) for a in adjacency]
    c = np.array([coeffs[i] for i in range(n)])
    return ContactGraph(n, adjacency, c)


def save_trajectory(path, trajectory):
    """CSV `step,S_count,I_count,R_count`; Var entries are written as
    their current values."""
    with open(path, "w") as f:
        f.write("step,S_count,I_count,R_count\n")
        for s, row in enumerate(trajectory):
            vals = [float(x.value if isinstance(x, Var) else x) for x in row]
            f.write(f"{s},{vals[0]!r},{vals[1]!r},{vals[2]!r}\n")


def load_trajectory(path):
    out = []
    with open(path) as f:
        header = f.readline()
        if not header.startswith("step,"):
            raise ValueError("missing trajectory header")
        for line in f:
            parts = line.strip().split(",")
            if len(parts) != 4:
                raise ValueError(f"bad trajectory row: {line.strip()}")
            out.append(tuple(float(x) for x in parts[1:]))
    return out
