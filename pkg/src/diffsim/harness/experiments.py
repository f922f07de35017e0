"""Experiment drivers behind the CLI subcommands.

Each driver takes a parsed config dict, writes CSVs into the output
directory, and returns the list of files written.  All CSVs start with a
comment line recording the config hash and the seed list, then a header
row, so every artifact is traceable to its configuration.
"""

import os
import time
import tracemalloc

import numpy as np

from .. import epidemics as ep
from .. import neural, optim
from ..traffic import (GridScenario, SingleRoadScenario,
                       initial_single_road_state, run_grid_diff,
                       run_grid_reference, run_single_road_diff,
                       run_single_road_reference)
from .config import ConfigError, config_hash


def _open_csv(path, cfg, seeds, header):
    f = open(path, "w")
    f.write(f"# config_hash={config_hash(cfg)} seeds={list(seeds)}\n")
    f.write(header + "\n")
    return f


def _grid_scenario(cfg, n_vehicles=None):
    return GridScenario(width=cfg["grid.width"], height=cfg["grid.height"],
                        n_vehicles=n_vehicles or cfg["grid.vehicles"],
                        period=cfg["grid.period"])


def build_model(cfg):
    """Returns (model, x0) for the configured variant and mode; model is
    ``model(params, seed, needs_gradient) -> (objective, gradient)``."""
    variant = cfg["model.variant"]
    mode = cfg["model.mode"]
    horizon = cfg["run.horizon"]
    objective = cfg["model.objective"]
    gen = np.random.default_rng(cfg["optimize.seed"])

    if variant == "single_road":
        scn = SingleRoadScenario()
        init = initial_single_road_state(scn, cfg["single_road.vehicles"])

        def model(params, seed, needs_gradient):
            if mode == "reference":
                _, total, _ = run_single_road_reference(
                    scn, float(params[0]), *init, horizon)
                return total, None
            res = run_single_road_diff(scn, float(params[0]), *init, horizon)
            g = None
            if needs_gradient:
                g = np.array([res.tape.backward(res.total_progress)
                              .wrt(res.offset)])
            return res.total_progress.value, g

        return model, np.array([cfg["single_road.offset"]])

    if variant in ("grid_static", "grid_nn"):
        scn = _grid_scenario(cfg)
        if variant == "grid_static":
            x0 = gen.uniform(0.0, scn.period, scn.network.n_intersections)
            kwargs = lambda p: {"offsets": p}
        else:
            spec = neural.spec_for_grid(scn.network.n_intersections,
                                        cfg["nn.hidden"])
            x0 = (neural.init_standard_normal(spec, cfg["optimize.seed"])
                  * cfg["nn.init_scale"])
            kwargs = lambda p: {"nn": (spec, p)}

        def model(params, seed, needs_gradient):
            if mode == "reference":
                _, total, _, _ = run_grid_reference(
                    scn, seed, horizon, objective=objective, **kwargs(params))
                return total, None
            res = run_grid_diff(scn, seed, horizon, objective=objective,
                                **kwargs(params))
            g = None
            if needs_gradient:
                g = res.tape.backward(res.objective).wrt(res.inputs)
            return res.objective.value, g

        return model, x0

    if variant == "sir":
        graph = ep.random_geometric_graph(cfg["sir.nodes"],
                                          cfg["sir.avg_degree"],
                                          cfg["sir.graph_seed"])
        cgen = np.random.default_rng(cfg["sir.coeff_seed"])
        true = ep.EpidemicInputs(cfg["sir.p0"],
                                 cgen.uniform(0.0, 0.1, cfg["sir.nodes"]),
                                 cfg["sir.rate"])
        target, _, _ = ep.run_epidemic_reference(
            graph, true, cfg["sir.agents"], cfg["sir.steps"],
            cfg["sir.target_seed"])

        def clamp(params):
            p0 = float(np.clip(params[0], 1e-6, 1.0 - 1e-6))
            rate = float(max(params[1], 1e-6))
            coeffs = np.clip(params[2:], 0.0, 1.0)
            return ep.EpidemicInputs(p0, coeffs, rate)

        def model(params, seed, needs_gradient):
            inputs = clamp(params)
            if mode == "reference":
                traj, _, _ = ep.run_epidemic_reference(
                    graph, inputs, cfg["sir.agents"], cfg["sir.steps"], seed)
                return -ep.calibration_loss(traj, target), None
            res = ep.run_epidemic_diff(graph, inputs, cfg["sir.agents"],
                                       cfg["sir.steps"], seed)
            loss = ep.calibration_loss(res.trajectory, target)
            g = None
            if needs_gradient:
                grad = res.tape.backward(loss)
                g = -np.concatenate(([grad.wrt(res.initial_prob)],
                                     [grad.wrt(res.recovery_rate)],
                                     grad.wrt(res.coefficients)))
            return -loss.value, g

        x0 = np.concatenate(([gen.uniform(0.0, 0.1)],
                             [gen.uniform(0.0, 0.01) + 1e-6],
                             gen.uniform(0.0, 0.1, cfg["sir.nodes"])))
        return model, x0

    raise ConfigError(f"unknown variant {variant!r}")


def run_simulate(cfg, out_dir, threads=1, seed_offset=0):
    model, x0 = build_model(cfg)
    seeds = [s + seed_offset for s in cfg["run.seeds"]]
    diff = cfg["model.mode"] == "diff"
    path = os.path.join(out_dir, "simulate.csv")
    header = "seed,objective"
    if diff:
        header += "".join(f",g{i}" for i in range(len(x0)))
    with _open_csv(path, cfg, seeds, header) as f:
        for s in seeds:
            value, grad = model(x0, s, diff)
            row = f"{s},{value!r}"
            if diff:
                row += "".join(f",{float(g)!r}" for g in grad)
            f.write(row + "\n")
    return [path]


def run_optimize(cfg, out_dir, threads=1, seed_offset=0):
    if (cfg["optimize.budget_batches"] is None
            and cfg["optimize.budget_seconds"] is None):
        raise ConfigError("optimize needs a batch or time budget")
    alg = cfg["optimize.algorithm"]
    if alg in optim.GRADIENT_ALGORITHMS and cfg["model.mode"] != "diff":
        raise ConfigError(f"{alg} needs model.mode = diff")
    model, x0 = build_model(cfg)
    trace = optim.optimize(
        model, x0, alg, step_size=cfg["optimize.step_size"],
        batch_size=cfg["run.batch_size"],
        budget_batches=cfg["optimize.budget_batches"],
        budget_seconds=cfg["optimize.budget_seconds"],
        seed=cfg["optimize.seed"], threads=threads, seed_offset=seed_offset)
    trace_path = os.path.join(out_dir, "trace.csv")
    optim.save_trace(trace_path, trace,
                     comment=f"config_hash={config_hash(cfg)} "
                             f"seeds=batch:{cfg['run.batch_size']}")
    params_path = os.path.join(out_dir, "params.txt")
    optim.save_params(params_path, trace.best_params)
    return [trace_path, params_path]


def run_fidelity(cfg, out_dir, threads=1, seed_offset=0):
    variant = cfg["model.variant"]
    gen = np.random.default_rng(cfg["fidelity.seed"])
    n_samples = cfg["fidelity.samples"]
    n_seeds = cfg["fidelity.seeds_per_sample"]
    deviations = []
    rows = []

    if variant == "sir":
        graph = ep.random_geometric_graph(cfg["sir.nodes"],
                                          cfg["sir.avg_degree"],
                                          cfg["sir.graph_seed"])
        for i in range(n_samples):
            inputs = ep.EpidemicInputs(
                gen.uniform(0.0, 0.1),
                gen.uniform(0.0, 0.1, cfg["sir.nodes"]),
                gen.uniform(0.0, 0.01) + 1e-6)
            for j in range(n_seeds):
                seed = seed_offset + i * n_seeds + j
                res = ep.run_epidemic_diff(graph, inputs, cfg["sir.agents"],
                                           cfg["sir.steps"], seed)
                _, ri, rr = ep.run_epidemic_reference(
                    graph, inputs, cfg["sir.agents"], cfg["sir.steps"], seed)
                d = ep.state_mismatch(
                    (res.infected.values, res.recovered.values), (ri, rr))
                deviations.append(d)
                rows.append((i, seed, d))
    elif variant == "single_road":
        scn = SingleRoadScenario()
        init = initial_single_road_state(scn, cfg["single_road.vehicles"])
        for i in range(n_samples):
            offset = gen.uniform(0.0, scn.period)
            res = run_single_road_diff(scn, offset, *init,
                                       cfg["run.horizon"])
            prog_ref, _, _ = run_single_road_reference(
                scn, offset, *init, cfg["run.horizon"])
            prog = np.array([p.value for p in res.progress])
            d = float(np.abs(prog - prog_ref).mean())
            deviations.append(d)
            rows.append((i, 0, d))
    else:
        raise ConfigError("fidelity supports sir and single_road variants")

    path = os.path.join(out_dir, "fidelity.csv")
    with _open_csv(path, cfg, [r[1] for r in rows],
                   "sample,seed,deviation") as f:
        for i, s, d in rows:
            f.write(f"{i},{s},{d!r}\n")
    dev = np.array(deviations)
    summary_path = os.path.join(out_dir, "fidelity_summary.csv")
    with _open_csv(summary_path, cfg, [r[1] for r in rows],
                   "median,q95,q99") as f:
        f.write(f"{float(np.median(dev))!r},{float(np.quantile(dev, 0.95))!r},"
                f"{float(np.quantile(dev, 0.99))!r}\n")
    return [path, summary_path]


def run_bench(cfg, out_dir, threads=1, seed_offset=0):
    horizon = cfg["run.horizon"]
    counts = cfg["bench.vehicle_counts"]
    repeats = cfg["bench.repeats"]
    path = os.path.join(out_dir, "bench.csv")
    with _open_csv(path, cfg, [seed_offset],
                   "vehicles,diff_time_s,ref_time_s,diff_mem_bytes,"
                   "ref_mem_bytes,time_factor,mem_factor") as f:
        for count in counts:
            scn = _grid_scenario(cfg, n_vehicles=count)
            offsets = np.zeros(scn.network.n_intersections)
            dts, rts, dms, rms = [], [], [], []
            for r in range(repeats):
                t0 = time.perf_counter()
                res = run_grid_diff(scn, seed_offset, horizon,
                                    offsets=offsets)
                res.tape.backward(res.objective)
                dts.append(time.perf_counter() - t0)
                dms.append(res.tape.nbytes)
                del res
                tracemalloc.start()
                t0 = time.perf_counter()
                run_grid_reference(scn, seed_offset, horizon,
                                   offsets=offsets)
                rts.append(time.perf_counter() - t0)
                _, peak = tracemalloc.get_traced_memory()
                tracemalloc.stop()
                rms.append(peak)
            dt, rt = float(np.median(dts)), float(np.median(rts))
            dm, rm = float(np.median(dms)), float(np.median(rms))
            f.write(f"{count},{dt!r},{rt!r},{int(dm)},{int(rm)},"
                    f"{dt / rt!r},{dm / rm!r}\n")
    return [path]
