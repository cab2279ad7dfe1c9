"""Deterministic closed-loop replay.

Per control tick, in fixed order: tracking (consume due tracker frames),
contact/controller, command link, plant, state link, twin, metrics. All
randomness comes from generators derived from the scenario seed, and all
time is the simulated clock, so a (scenario, seed) pair determines every
output byte. Wall-clock tick timings are kept apart in a `perf` record.
"""
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..arm_kinematics import tcp_position
from ..contact import contact_events
from ..controller import EncounterController
from ..plant import PlantState, plant_step
from ..tracking import CalibrationTransform, FilterState, apply_calibration, filter_step
from ..twin_protocol import (
    LinkConfig, SimulatedLink, TwinState, decode, encode, state_update,
    target_command, twin_apply, twin_staleness,
)
from .participant import INDEX, add_noise, build_trajectory


@dataclass
class ReplayResult:
    metrics: dict
    perf: dict
    command_log: list
    twin_log: list
    streams: dict = field(default_factory=dict)


def _derived_link(cfg, seed):
    return SimulatedLink(LinkConfig(latency_mean=cfg.latency_mean,
                                    jitter_std=cfg.jitter_std,
                                    drop_prob=cfg.drop_prob, seed=seed))


def _json_line(obj):
    return json.dumps(obj, separators=(",", ":"))


def run_replay(scenario, out_dir=None, links=None):
    """Run one scenario; returns a ReplayResult and optionally writes
    command_log.ndjson, twin_log.ndjson, metrics.json and perf.json."""
    mesh = scenario.build_mesh()
    trajectory = build_trajectory(scenario.trajectory)
    haptic_active = scenario.mode == "haptic"

    ss = np.random.SeedSequence(scenario.seed)
    noise_seed, cmd_seed, state_seed = ss.spawn(3)
    rng_noise = np.random.default_rng(noise_seed)
    if links is None:
        cmd_link = _derived_link(scenario.link,
                                 int(cmd_seed.generate_state(1)[0]))
        state_link = _derived_link(scenario.link,
                                   int(state_seed.generate_state(1)[0]))
    else:
        cmd_link, state_link = links

    controller = EncounterController(scenario.controller, scenario.dh,
                                     scenario.joint_limits, scenario.linkage,
                                     mesh)
    state = controller.initial_state()
    plant = PlantState.at_rest(controller.retract_q,
                               controller.home_linkage.as_array())
    setpoint = TwinState(joints=controller.retract_q,
                         linkage=controller.home_linkage.as_array())
    twin = TwinState(joints=controller.retract_q,
                     linkage=controller.home_linkage.as_array())
    filter_state = FilterState(params=scenario.filter_params)
    calibration = CalibrationTransform.identity()

    dt = 1.0 / scenario.controller.tick_rate
    n_ticks = int(round(scenario.duration * scenario.controller.tick_rate))
    tracker_period = 1.0 / scenario.tracker_rate

    latest_frame = trajectory.frame(0.0)
    latest_noisy = latest_frame
    frame_idx = 0
    cmd_seq = 0
    state_seq = 0
    last_profile = None

    command_log = []
    twin_log = []
    ts = np.empty(n_ticks)
    haptic_stream = np.full(n_ticks, np.inf)
    visual_stream = np.full(n_ticks, np.inf)
    truth_stream = np.full(n_ticks, np.inf)
    desync_stream = np.zeros(n_ticks)
    staleness_stream = np.zeros(n_ticks)
    target_err_stream = np.full(n_ticks, np.inf)
    modes = []
    compute_total = 0.0
    compute_max = 0.0

    for i in range(n_ticks):
        t = i * dt
        tick_start = time.perf_counter()

        # tracking: consume tracker frames due by now
        while frame_idx * tracker_period <= t + 1e-12:
            ft = frame_idx * tracker_period
            raw = trajectory.frame(ft)
            noisy = add_noise(raw, rng_noise, scenario.noise_sigma)
            filter_state, smoothed = filter_step(filter_state, noisy)
            latest_frame = apply_calibration(calibration, smoothed)
            latest_noisy = noisy
            frame_idx += 1

        truth_tip = trajectory.index_position(t)
        truth_valid = bool(np.all(np.isfinite(truth_tip)))
        if truth_valid:
            _, _, d_truth = mesh.closest_point(truth_tip)
            truth_stream[i] = d_truth
        # visual proximity comes from the raw noisy tracker feed: what a
        # proximity-only rendering would judge contact by
        if latest_noisy.valid:
            _, _, d_vis = mesh.closest_point(latest_noisy.fingertips[INDEX])
            visual_stream[i] = d_vis

        if haptic_active:
            state, command, linkage_cmd = controller.tick(state, latest_frame, dt)
            if state.profile is not last_profile and state.target is not None:
                # a fresh plan: publish the Cartesian goal on the wire
                last_profile = state.profile
                tc = target_command(cmd_seq, t,
                                    controller.target_pose(state.target),
                                    linkage_cmd.as_array())
                cmd_seq += 1
                cmd_link.send(t, encode(tc))
            su = state_update(cmd_seq, t, command.q, linkage_cmd.as_array())
            cmd_seq += 1
            cmd_link.send(t, encode(su))

            for _, payload in cmd_link.poll(t):
                msg = decode(payload)
                if msg.kind == "StateUpdate":
                    setpoint = twin_apply(setpoint, msg, t)
                else:
                    twin_log.append(payload.decode().rstrip("\n"))

            plant = plant_step(plant, setpoint.joints, setpoint.linkage, dt,
                               scenario.plant_tau)

            pu = state_update(state_seq, t, plant.joints, plant.linkage)
            state_seq += 1
            state_link.send(t, encode(pu))
            for _, payload in state_link.poll(t):
                msg = decode(payload)
                twin = twin_apply(twin, msg, t)
                twin_log.append(payload.decode().rstrip("\n"))

            ee = tcp_position(scenario.dh, plant.joints)
            if truth_valid:
                haptic_stream[i] = float(np.linalg.norm(truth_tip[:2] - ee[:2]))
            if state.target is not None:
                target_err_stream[i] = float(
                    np.linalg.norm(ee - state.target.point))
            desync_stream[i] = float(np.linalg.norm(
                tcp_position(scenario.dh, twin.joints) - ee))
            staleness = twin_staleness(twin, t)
            staleness_stream[i] = staleness if np.isfinite(staleness) else 0.0
            command_log.append(_json_line({
                "t": t, "mode": state.mode.value,
                "q": [float(v) for v in command.q],
                "linkage": [float(v) for v in linkage_cmd.as_array()]}))
            modes.append(state.mode.value)
        else:
            modes.append("visual_only")

        ts[i] = t
        elapsed = time.perf_counter() - tick_start
        compute_total += elapsed
        compute_max = max(compute_max, elapsed)

    haptic_events = contact_events(list(zip(ts, haptic_stream)),
                                   scenario.d_on, scenario.d_off) \
        if haptic_active else []
    visual_events = contact_events(list(zip(ts, visual_stream)),
                                   scenario.d_on, scenario.d_off)
    truth_events = contact_events(list(zip(ts, truth_stream)),
                                  scenario.d_on, scenario.d_off)

    metrics = {
        "mode": scenario.mode,
        "seed": scenario.seed,
        "duration_s": scenario.duration,
        "n_ticks": n_ticks,
        "tick_rate_hz": scenario.controller.tick_rate,
        "events": {
            "haptic": [[float(a), float(b)] for a, b in haptic_events],
            "visual": [[float(a), float(b)] for a, b in visual_events],
            "truth_proximity": [[float(a), float(b)] for a, b in truth_events],
        },
        "max_desync_m": float(np.max(desync_stream)) if haptic_active else 0.0,
        "max_staleness_s": float(np.max(staleness_stream)) if haptic_active else 0.0,
        "command_messages": cmd_seq,
        "state_messages": state_seq,
        "final_mode": modes[-1] if modes else "none",
        "perf_file": "perf.json",
    }
    perf = {
        "mean_tick_s": compute_total / max(n_ticks, 1),
        "max_tick_s": compute_max,
        "n_ticks": n_ticks,
    }
    result = ReplayResult(metrics=metrics, perf=perf,
                          command_log=command_log, twin_log=twin_log,
                          streams={
                              "t": ts,
                              "haptic": haptic_stream,
                              "visual": visual_stream,
                              "truth": truth_stream,
                              "desync": desync_stream,
                              "staleness": staleness_stream,
                              "target_error": target_err_stream,
                              "modes": modes,
                          })
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "command_log.ndjson"), "w") as fh:
        for line in result.command_log:
            fh.write(line + "\n")
    with open(os.path.join(out_dir, "twin_log.ndjson"), "w") as fh:
        for line in result.twin_log:
            fh.write(line + "\n")
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(result.metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "perf.json"), "w") as fh:
        json.dump(result.perf, fh, indent=2, sort_keys=True)
        fh.write("\n")
