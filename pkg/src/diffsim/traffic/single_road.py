"""Single multi-lane road with a periodic traffic light.

Two implementations of the same model: a fully differentiable one in which
every element (leader selection, lane changes, light braking, wrap-around)
is built from smooth blocks, and a discrete reference twin.  The
differentiable variant is deliberately small-scale; it exists to study
gradients, not to scale.
"""

from dataclasses import dataclass

import numpy as np

from .. import smooth as sm
from ..ad import Tape, Vec, detach
from .idm import IdmParams, idm_acceleration

BIG_GAP = 1.0e4

# attribute-match windows for leader retrieval: positions matched within
# 0.5 m, lanes within half a lane
_POS_CFG = sm.SmoothConfig(k=32.0, eps=0.5, match_k=32.0)
_LANE_CFG = sm.SmoothConfig(k=32.0, eps=0.5, match_k=32.0)


@dataclass
class SingleRoadScenario:
    n_lanes: int = 3
    length: float = 250.0
    light_pos: float = 100.0
    period: float = 10.0              # full cycle; red and green halves
    speed_limit: float = 50.0 / 3.6
    lane_change_interval: float = 2.5
    min_clearance_gain: float = 10.0
    tau: float = 0.1
    spawn_spacing: float = 40.0
    k: float = sm.DEFAULT_K
    idm: IdmParams = None

    def __post_init__(self):
        if self.idm is None:
            self.idm = IdmParams(v_d=self.speed_limit)


def initial_single_road_state(scn, n_vehicles):
    """Vehicles at non-zero multiples of the spawn spacing, lanes cycling."""
    pos = scn.spawn_spacing * np.arange(1, n_vehicles + 1, dtype=np.float64)
    vel = np.zeros(n_vehicles)
    lane = np.arange(n_vehicles) % scn.n_lanes
    return pos, vel, lane.astype(np.float64)


@dataclass
class SingleRoadDiffResult:
    tape: Tape
    offset: object                 # Var, registered input
    pos_inputs: list               # initial-position Vars
    vel_inputs: list
    progress: list                 # per-vehicle accumulated displacement Vars
    total_progress: object         # Var
    history: list                  # per step: (positions, velocities) arrays


def run_single_road_diff(scn, offset, pos0, vel0, lane0, horizon,
                         tape=None, collect=False):
    """Run the fully differentiable model.

    offset is the time of the first switch to red and is registered as a
    tape input, as are the initial positions and velocities.
    """
    t = tape if tape is not None else Tape()
    k = scn.k
    n = len(pos0)
    off = t.input(offset)
    pos_in = [t.input(p) for p in pos0]
    vel_in = [t.input(v) for v in vel0]
    pos = list(pos_in)
    vel = list(vel_in)
    lane = [t.constant(l) for l in lane0]
    progress = [t.constant(0.0) for _ in range(n)]
    big = t.constant(BIG_GAP)

    def gap_on_lane(i, lane_val):
        masked = []
        for j in range(n):
            if j == i:
                continue
            dp = pos[j] - pos[i]
            lane_m = sm.in_range(lane[j] - lane_val, -0.5, 0.5, k)
            ahead = sm.logistic(dp, 0.0, k)
            masked.append(sm.smooth_branch(lane_m * ahead, dp, BIG_GAP))
        if not masked:
            return big
        return sm.smooth_min(masked)

    def leader_velocity(i, gap):
        others = [j for j in range(n) if j != i]
        if not others:
            return t.constant(0.0)
        refs_pos = Vec.from_vars([pos[j] for j in others])
        refs_lane = Vec.from_vars([lane[j] for j in others])
        targets = Vec.from_vars([vel[j] for j in others])
        return sm.select_by_attribute(
            [refs_pos, refs_lane], [pos[i] + gap, lane[i]], targets,
            [_POS_CFG, _LANE_CFG])

    n_steps = int(round(horizon / scn.tau))
    lc_every = max(1, int(round(scn.lane_change_interval / scn.tau)))
    half_period = scn.period / 2.0
    history = []

    for step in range(n_steps):
        t_sim = step * scn.tau

        if step > 0 and step % lc_every == 0:
            new_lane = []
            for i in range(n):
                c0 = gap_on_lane(i, lane[i])
                cl = gap_on_lane(i, lane[i] + 1.0)
                cr = gap_on_lane(i, lane[i] - 1.0)
                vl = sm.in_range(lane[i] + 1.0, -0.5, scn.n_lanes - 0.5, k)
                vr = sm.in_range(lane[i] - 1.0, -0.5, scn.n_lanes - 0.5, k)
                s_l = sm.smooth_branch(vl, cl, -BIG_GAP)
                s_r = sm.smooth_branch(vr, cr, -BIG_GAP)
                gain = sm.smooth_max([s_l, s_r]) - c0
                change = sm.logistic(gain, scn.min_clearance_gain, k)
                delta = sm.smooth_branch(sm.logistic(s_l - s_r, 0.0, k),
                                         1.0, -1.0)
                new_lane.append(lane[i] + change * delta)
            lane = new_lane

        red = sm.periodic_step(t_sim - off, half_period, k)
        acc = []
        for i in range(n):
            gap = gap_on_lane(i, lane[i])
            lead_vel = leader_velocity(i, gap)
            lgap = scn.light_pos - pos[i]
            ahead_l = sm.logistic(lgap, 0.0, k)
            closer = sm.logistic(gap - lgap, 0.0, k)
            # re-sharpened so the huge free-road gap in the blend does not
            # delay braking until the condition fully saturates
            use = sm.logistic(red * ahead_l * closer, 0.5, k)
            eff_gap = sm.smooth_branch(use, lgap, gap)
            eff_dv = sm.smooth_branch(use, vel[i], vel[i] - lead_vel)
            acc.append(idm_acceleration(vel[i], eff_gap, eff_dv, scn.idm))

        for i in range(n):
            vraw = vel[i] + acc[i] * scn.tau
            vnew = sm.smooth_branch(sm.logistic(vraw, 0.0, k), vraw, 0.0)
            dpos = vnew * scn.tau
            pnew = pos[i] + dpos
            wrap = sm.logistic(pnew, scn.length, k)
            pos[i] = sm.smooth_branch(wrap, pnew - scn.length, pnew)
            vel[i] = vnew
            progress[i] = progress[i] + dpos

        if collect:
            history.append((np.array([detach(p) for p in pos]),
                            np.array([detach(v) for v in vel])))

    total = Vec.from_vars(progress).sum()
    return SingleRoadDiffResult(t, off, pos_in, vel_in, progress, total,
                                history)


def run_single_road_reference(scn, offset, pos0, vel0, lane0, horizon,
                              collect=False):
    """Discrete twin: exact branches, exact min, hard clamps and wrap."""
    n = len(pos0)
    pos = np.array(pos0, dtype=np.float64)
    vel = np.array(vel0, dtype=np.float64)
    lane = np.array(lane0, dtype=np.float64)
    progress = np.zeros(n)

    def gap_on_lane(i, lane_val):
        best = BIG_GAP
        for j in range(n):
            if j == i or abs(lane[j] - lane_val) > 0.5:
                continue
            dp = pos[j] - pos[i]
            if 0.0 < dp < best:
                best = dp
        return best

    def leader_velocity(i, lane_val):
        best, v = BIG_GAP, 0.0
        for j in range(n):
            if j == i or abs(lane[j] - lane_val) > 0.5:
                continue
            dp = pos[j] - pos[i]
            if 0.0 < dp < best:
                best, v = dp, vel[j]
        return v

    n_steps = int(round(horizon / scn.tau))
    lc_every = max(1, int(round(scn.lane_change_interval / scn.tau)))
    half_period = scn.period / 2.0
    history = []

    for step in range(n_steps):
        t_sim = step * scn.tau

        if step > 0 and step % lc_every == 0:
            new_lane = lane.copy()
            for i in range(n):
                c0 = gap_on_lane(i, lane[i])
                scores = []
                for d in (1.0, -1.0):
                    cand = lane[i] + d
                    if -0.5 < cand < scn.n_lanes - 0.5:
                        scores.append((gap_on_lane(i, cand), d))
                    else:
                        scores.append((-BIG_GAP, d))
                best, d = max(scores)
                if best - c0 > scn.min_clearance_gain:
                    new_lane[i] = lane[i] + d
            lane = new_lane

        red = (t_sim - offset) % scn.period < half_period
        acc = np.empty(n)
        for i in range(n):
            gap = gap_on_lane(i, lane[i])
            lead_vel = leader_velocity(i, lane[i])
            lgap = scn.light_pos - pos[i]
            use = red and lgap > 0.0 and gap > lgap
            eff_gap = lgap if use else gap
            eff_dv = vel[i] if use else vel[i] - lead_vel
            acc[i] = idm_acceleration(vel[i], eff_gap, eff_dv, scn.idm)

        vel = np.maximum(0.0, vel + acc * scn.tau)
        dpos = vel * scn.tau
        pos = pos + dpos
        pos = np.where(pos >= scn.length, pos - scn.length, pos)
        progress += dpos
        if collect:
            history.append((pos.copy(), vel.copy()))

    return progress, float(progress.sum()), history
