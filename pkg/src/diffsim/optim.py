"""Gradient-based and gradient-free optimizers over batched simulations.

A model is any callable ``model(params, seed, needs_gradient)`` returning
``(objective, gradient_or_None)``.  All optimizers maximize; minimize by
negating the objective in the model.  Every batch is a fixed number of
runs with distinct seeds whose objectives (and clipped gradients) are
averaged.

The gradient-free methods are spelled out here in full because their
constants are part of the artifact contract:

SPSA  gains a_k = step_size / (k + 1 + A)^alpha with A=10, alpha=0.602,
      c_k = c0 / (k + 1)^gamma with c0=0.1, gamma=0.101, Rademacher
      perturbations; two evaluations per iteration.
SA    Gaussian proposal sigma=0.5, initial temperature 1.0, geometric
      cooling 0.98 per step, Metropolis acceptance.
DE    rand/1/bin, F=0.5, CR=0.9, population = generation size (50).
CNE   truncation selection of the top 20%, offspring = uniform-random
      parent + Gaussian mutation sigma=0.1, elitist (best survives).
"""

import time
from dataclasses import dataclass, field

import numpy as np

CLIP_BOUND = 10.0
GENERATION_SIZE = 50


def clip_gradient(g, bound=CLIP_BOUND):
    """Componentwise clamp to [-bound, bound]."""
    if bound <= 0:
        raise ValueError("clip bound must be positive")
    return np.clip(np.asarray(g, dtype=np.float64), -bound, bound)


@dataclass
class EvalResult:
    objective: float                    # batch mean
    gradient: object                    # mean of per-run clipped gradients
    per_run_objectives: np.ndarray
    per_run_gradients: list


def batch_evaluate(model, params, seeds, needs_gradient=False,
                   clip_bound=CLIP_BOUND, threads=1):
    """Mean objective (and mean per-run-clipped gradient) over seeds.

    Results are merged in run-index order, so the outcome is independent
    of scheduling; a permuted seed list yields the same mean.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("batch needs at least one seed")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            runs = list(ex.map(
                lambda s: model(params, s, needs_gradient), seeds))
    else:
        runs = [model(params, s, needs_gradient) for s in seeds]
    objs = np.array([r[0] for r in runs], dtype=np.float64)
    grads = None
    mean_grad = None
    if needs_gradient:
        grads = [clip_gradient(r[1], clip_bound) for r in runs]
        mean_grad = np.mean(grads, axis=0)
    return EvalResult(float(objs.mean()), mean_grad, objs, grads)


# -- gradient ascent steps -------------------------------------------------

def sgd_step(params, gradient, step_size):
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != np.shape(params):
        raise ValueError("gradient length mismatch")
    return params + step_size * gradient


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def zeros(n):
        return AdamState(np.zeros(n), np.zeros(n))


def adam_step(state, params, gradient, step_size):
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != np.shape(params):
        raise ValueError("gradient length mismatch")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    mhat = state.m / (1.0 - state.beta1 ** state.t)
    vhat = state.v / (1.0 - state.beta2 ** state.t)
    return params + step_size * mhat / (np.sqrt(vhat) + state.eps)


def nadam_step(state, params, gradient, step_size):
    """Adam with Nesterov momentum in the numerator."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != np.shape(params):
        raise ValueError("gradient length mismatch")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    mhat = state.m / (1.0 - state.beta1 ** state.t)
    vhat = state.v / (1.0 - state.beta2 ** state.t)
    nudge = (state.beta1 * mhat
             + (1.0 - state.beta1) * g / (1.0 - state.beta1 ** state.t))
    return params + step_size * nudge / (np.sqrt(vhat) + state.eps)


# -- SPSA ------------------------------------------------------------------

@dataclass
class SpsaState:
    k: int = 0
    A: float = 10.0
    alpha: float = 0.602
    c0: float = 0.1
    gamma: float = 0.101


def spsa_step(state, params, evaluator, step_size, gen):
    """One SPSA iteration: two evaluations at +/- c_k * delta, ascent
    along the simultaneous-perturbation estimate.  Returns
    (new_params, f_plus, f_minus)."""
    n = len(params)
    delta = gen.integers(0, 2, n) * 2.0 - 1.0
    ck = state.c0 / (state.k + 1.0) ** state.gamma
    ak = step_size / (state.k + 1.0 + state.A) ** state.alpha
    f_plus = evaluator(params + ck * delta)
    f_minus = evaluator(params - ck * delta)
    ghat = (f_plus - f_minus) / (2.0 * ck) / delta
    state.k += 1
    return params + ak * ghat, f_plus, f_minus


# -- simulated annealing ---------------------------------------------------

@dataclass
class SaState:
    current: np.ndarray
    current_value: float
    temperature: float = 1.0
    sigma: float = 0.5
    cooling: float = 0.98


def sa_step(state, evaluator, gen):
    """One Metropolis step with a Gaussian proposal; returns the proposal
    objective (the candidate value for the trace)."""
    prop = state.current + gen.normal(0.0, state.sigma, len(state.current))
    val = evaluator(prop)
    d = val - state.current_value
    if d >= 0.0 or gen.uniform() < np.exp(d / max(state.temperature, 1e-300)):
        state.current = prop
        state.current_value = val
    state.temperature *= state.cooling
    return val


# -- population methods ----------------------------------------------------

@dataclass
class PopulationState:
    members: np.ndarray            # (population, n_params)
    values: np.ndarray


def init_population(x0, size, gen, sigma=0.5):
    """First member is the shared starting point; the rest are Gaussian
    perturbations of it."""
    pop = x0 + gen.normal(0.0, sigma, (size, len(x0)))
    pop[0] = x0
    return pop


def de_generation(state, evaluator, gen, F=0.5, CR=0.9, on_candidate=None):
    """DE rand/1/bin; greedy replacement.  ``on_candidate(value)`` is
    called after each trial evaluation for trace bookkeeping."""
    pop, vals = state.members, state.values
    size, n = pop.shape
    for i in range(size):
        r = gen.choice([j for j in range(size) if j != i], 3, replace=False)
        mutant = pop[r[0]] + F * (pop[r[1]] - pop[r[2]])
        cross = gen.uniform(size=n) < CR
        cross[gen.integers(0, n)] = True
        trial = np.where(cross, mutant, pop[i])
        v = evaluator(trial)
        if on_candidate is not None:
            on_candidate(v)
        if v >= vals[i]:
            pop[i] = trial
            vals[i] = v
    return state


def cne_generation(state, evaluator, gen, elite_frac=0.2, sigma=0.1,
                   on_candidate=None):
    """Truncation selection + Gaussian mutation, elitist."""
    pop, vals = state.members, state.values
    size, n = pop.shape
    order = np.argsort(-vals)
    n_elite = max(1, int(size * elite_frac))
    parents = pop[order[:n_elite]]
    best = pop[order[0]].copy()
    best_val = vals[order[0]]
    new_pop = np.empty_like(pop)
    new_vals = np.empty_like(vals)
    new_pop[0] = best
    new_vals[0] = best_val
    for i in range(1, size):
        p = parents[gen.integers(0, n_elite)]
        child = p + gen.normal(0.0, sigma, n)
        v = evaluator(child)
        if on_candidate is not None:
            on_candidate(v)
        new_pop[i] = child
        new_vals[i] = v
    state.members = new_pop
    state.values = new_vals
    return state


# -- driver ----------------------------------------------------------------

GRADIENT_ALGORITHMS = ("sgd", "adam", "nadam")
FREE_ALGORITHMS = ("spsa", "sa", "de", "cne")
ALGORITHMS = GRADIENT_ALGORITHMS + FREE_ALGORITHMS


@dataclass
class TraceRecord:
    batch: int
    wall_clock_s: float
    candidate_objective: float
    best_objective: float


@dataclass
class OptimizationTrace:
    algorithm: str
    step_size: float
    records: list = field(default_factory=list)
    final_params: np.ndarray = None
    best_params: np.ndarray = None     # parameters at the best batch

    @property
    def best(self):
        return self.records[-1].best_objective if self.records else None


def optimize(model, x0, algorithm, step_size=0.1, batch_size=10,
             budget_batches=None, budget_seconds=None, seed=0,
             clip_bound=CLIP_BOUND, threads=1, seed_offset=0):
    """Run one optimizer from ``x0``; every objective evaluation is one
    batch and yields one trace record.  The batch in flight when a time
    budget expires is completed.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if budget_batches is None and budget_seconds is None:
        raise ValueError("need a batch or time budget")
    x = np.array(x0, dtype=np.float64)
    n = len(x)
    trace = OptimizationTrace(algorithm, step_size)
    start = time.monotonic()
    counter = [0]
    best = [-np.inf]

    # common random numbers: every batch reuses one fixed seed list, so
    # objective differences between batches reflect parameter changes,
    # not seed luck
    base = seed_offset + seed * 1000003
    batch_seeds = [base + j for j in range(batch_size)]

    def seeds_for_batch(b):
        return batch_seeds

    def record(value, params):
        if value > best[0]:
            best[0] = value
            trace.best_params = np.array(params, dtype=np.float64)
        trace.records.append(TraceRecord(counter[0],
                                         time.monotonic() - start,
                                         value, best[0]))
        counter[0] += 1

    def evaluate(params, needs_gradient=False):
        res = batch_evaluate(model, params, seeds_for_batch(counter[0]),
                             needs_gradient, clip_bound, threads)
        record(res.objective, params)
        return res

    def out_of_budget():
        if budget_batches is not None and counter[0] > budget_batches:
            return True
        if budget_seconds is not None and (time.monotonic() - start
                                           >= budget_seconds):
            return True
        return False

    gen = np.random.default_rng(seed)
    evaluate(x)     # shared initial point, batch 0

    if algorithm in GRADIENT_ALGORITHMS:
        state = AdamState.zeros(n) if algorithm in ("adam", "nadam") else None
        while not out_of_budget():
            res = evaluate(x, needs_gradient=True)
            if algorithm == "sgd":
                x = sgd_step(x, res.gradient, step_size)
            elif algorithm == "adam":
                x = adam_step(state, x, res.gradient, step_size)
            else:
                x = nadam_step(state, x, res.gradient, step_size)
    elif algorithm == "spsa":
        state = SpsaState()

        def ev(p):
            return evaluate(p).objective

        while not out_of_budget():
            x, _, _ = spsa_step(state, x, ev, step_size, gen)
    elif algorithm == "sa":
        state = SaState(x.copy(), trace.records[0].candidate_objective)
        while not out_of_budget():
            sa_step(state, lambda p: evaluate(p).objective, gen)
        x = state.current
    else:
        class _Budget(Exception):
            pass

        def ev(p):
            if out_of_budget():
                raise _Budget
            return evaluate(p).objective

        state = None
        try:
            pop = init_population(x, GENERATION_SIZE, gen)
            vals = np.array([ev(m) for m in pop[1:]])
            vals = np.concatenate(([trace.records[0].candidate_objective],
                                   vals))
            state = PopulationState(pop, vals)
            step = de_generation if algorithm == "de" else cne_generation
            while not out_of_budget():
                step(state, ev, gen)
        except _Budget:
            pass
        if state is not None:
            x = state.members[np.argmax(state.values)]

    trace.final_params = x
    return trace


# -- file formats ----------------------------------------------------------

def save_trace(path, trace, comment=None):
    """CSV `batch,wall_clock_s,candidate_objective,best_objective`."""
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write("batch,wall_clock_s,candidate_objective,best_objective\n")
        for r in trace.records:
            f.write(f"{r.batch},{float(r.wall_clock_s)!r},"
                    f"{float(r.candidate_objective)!r},"
                    f"{float(r.best_objective)!r}\n")


def load_trace(path):
    records = []
    with open(path) as f:
        for line in f:
            if line.startswith("#") or line.startswith("batch,"):
                continue
            b, w, c, v = line.strip().split(",")
            records.append(TraceRecord(int(b), float(w), float(c), float(v)))
    return records


def save_params(path, values):
    with open(path, "w") as f:
        for v in np.asarray(values, dtype=np.float64):
            f.write(f"{float(v)!r}\n")


def load_params(path):
    with open(path) as f:
        return np.array([float(ln) for ln in f if ln.strip()])
