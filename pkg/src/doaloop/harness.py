"""Closed-loop trials on simulated time, experiment grids, persistence.

A trial walks a fixed tick grid (one tick per t_h of simulated time). Each
tick the frames of the precomputed multichannel STFT whose windows are fully
captured are masked with the most recently published steering DOA and
overlap-added into the enhanced stream; the quality stream scores the latest
t_w of finalized output against the time-aligned clean reference; after
warm-up the corrector consumes the smoothed quality and publishes a new DOA
for the next tick. Everything is deterministic given the seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .arraysim import (
    ScenePlan,
    SourceSpec,
    default_triangular_geometry,
    fractional_delay,
    render_mixture,
    steering_delays,
    synth_speech_like,
)
from .beamform import BeamformerConfig, mask_gains_block
from .corrector import CorrectorConfig, corrector_init, corrector_step
from .quality import QualityConfig, QualitySample, QualityStream, gate, si_sdr, vad_activity
from .spectral import ola_denominator, stft, synthesis_frames
from . import svgplot


class TrialError(ValueError):
    """Inconsistent trial configuration rejected before execution."""


@dataclass(frozen=True)
class LoopConfig:
    """All knobs of one closed-loop trial."""

    beamformer: BeamformerConfig = field(default_factory=BeamformerConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    corrector: CorrectorConfig = field(default_factory=CorrectorConfig)
    window_len: int = 1024


@dataclass
class RunRecord:
    """Per-trial time series plus the config snapshot that produced them."""

    run_id: str
    seed: int
    config: dict
    theta_series: list
    quality_series: list
    good: bool
    final_third_mean_theta: float
    warnings: list


@dataclass
class TrajectoryStats:
    time_grid: np.ndarray
    mean_theta: np.ndarray
    std_theta: np.ndarray
    n_runs: int
    good_run_count: int


# ---------------------------------------------------------------------------
# scenes

def default_two_source_scene(duration_s: float = 90.0, fs: int = 16000,
                             seed: int = 0, gains: tuple = (1.0, 1.0),
                             diffuse_noise_db: float | None = None) -> ScenePlan:
    """Two equal-power speech-like sources: SOI at 0 deg, interferer at 90 deg."""
    soi = SourceSpec(synth_speech_like(duration_s, fs, seed=[seed, 10]), 0.0, gains[0])
    interferer = SourceSpec(synth_speech_like(duration_s, fs, seed=[seed, 11]), 90.0, gains[1])
    return ScenePlan(default_triangular_geometry(), (soi, interferer), fs=fs,
                     diffuse_noise_db=diffuse_noise_db, duration_s=duration_s, seed=seed)


def three_source_scene(soi_doa: float, duration_s: float = 90.0, fs: int = 16000,
                       seed: int = 0) -> ScenePlan:
    """Sources at 0/90/180 deg; the one at ``soi_doa`` listed first as SOI."""
    doas = (0.0, 90.0, 180.0)
    if soi_doa not in doas:
        raise TrialError(f"soi_doa must be one of {doas}")
    specs = [SourceSpec(synth_speech_like(duration_s, fs, seed=[seed, 10 + i]), doa)
             for i, doa in enumerate(doas)]
    specs.sort(key=lambda s: s.true_doa_deg != soi_doa)
    return ScenePlan(default_triangular_geometry(), tuple(specs), fs=fs,
                     duration_s=duration_s, seed=seed)


def scene_digest(scene: ScenePlan) -> str:
    """Content hash of the scene's ground truth (geometry, sources, settings)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(scene.geometry.mic_positions).tobytes())
    h.update(np.float64(scene.geometry.speed_of_sound).tobytes())
    for src in scene.sources:
        h.update(np.ascontiguousarray(src.signal).tobytes())
        h.update(np.float64([src.true_doa_deg, src.gain]).tobytes())
    noise = -np.inf if scene.diffuse_noise_db is None else scene.diffuse_noise_db
    h.update(np.float64([scene.fs, noise, scene.duration_s, scene.seed]).tobytes())
    return h.hexdigest()[:16]


class PreparedScene:
    """Rendered scene with per-channel spectra, shared read-only across runs."""

    def __init__(self, scene: ScenePlan, config: LoopConfig):
        _validate_trial(scene, config)
        self.scene = scene
        self.config = config
        self.window_len = config.window_len
        self.hop = config.window_len // 4
        channels, reference = render_mixture(scene)
        grids = [stft(ch, window_len=self.window_len, fs=scene.fs) for ch in channels]
        self.stack = np.stack([g.data for g in grids])
        self.frames_total = self.stack.shape[1]
        self.den = np.maximum(
            ola_denominator(self.frames_total, self.window_len, self.hop), 1e-12)
        ref_mic = config.beamformer.reference_channel
        ref_delay = steering_delays(scene.geometry, scene.soi.true_doa_deg)[ref_mic]
        # align the oracle reference with the SOI as seen at the reference mic
        self.oracle_reference = fractional_delay(reference, ref_delay * scene.fs)
        self.digest = scene_digest(scene)


def _validate_trial(scene: ScenePlan, config: LoopConfig):
    q = config.quality
    fs = scene.fs
    tick = q.t_h * fs
    if abs(tick - round(tick)) > 1e-9 or round(tick) <= 0:
        raise TrialError(f"t_h={q.t_h} is not a whole number of samples at fs={fs}")
    if q.t_w > scene.duration_s:
        raise TrialError(f"capture window t_w={q.t_w}s exceeds scene duration "
                         f"{scene.duration_s}s")
    if scene.num_samples < config.window_len:
        raise TrialError("scene shorter than one analysis window")
    for i, src in enumerate(scene.sources):
        if src.fs is not None and src.fs != fs:
            raise TrialError(f"source {i} sample rate {src.fs} != scene fs {fs}")


def _config_snapshot(prepared: PreparedScene, theta_est: float, seed: int) -> dict:
    cfg = prepared.config
    return {
        "scene_digest": prepared.digest,
        "scene": {
            "fs": prepared.scene.fs,
            "duration_s": prepared.scene.duration_s,
            "seed": prepared.scene.seed,
            "num_sources": len(prepared.scene.sources),
            "source_doas_deg": [s.true_doa_deg for s in prepared.scene.sources],
            "source_gains": [s.gain for s in prepared.scene.sources],
            "diffuse_noise_db": prepared.scene.diffuse_noise_db,
        },
        "true_doa_deg": prepared.scene.soi.true_doa_deg,
        "theta_est_deg": theta_est,
        "seed": seed,
        "window_len": cfg.window_len,
        "beamformer": asdict(cfg.beamformer),
        "quality": asdict(cfg.quality),
        "corrector": asdict(cfg.corrector),
    }


# ---------------------------------------------------------------------------
# the closed loop

def run_trial(scene: ScenePlan, config: LoopConfig, theta_est: float,
              seed: int, run_id: str | None = None) -> RunRecord:
    """Run one closed-loop trial; fully deterministic given ``seed``."""
    prepared = PreparedScene(scene, config)
    return run_prepared_trial(prepared, theta_est, seed, run_id=run_id)


def run_prepared_trial(prepared: PreparedScene, theta_est: float, seed: int,
                       run_id: str | None = None) -> RunRecord:
    """Same as run_trial but reusing a prepared scene (shared per grid cell)."""
    scene = prepared.scene
    config = prepared.config
    qcfg = config.quality
    ccfg = config.corrector
    fs = scene.fs
    wl, hop = prepared.window_len, prepared.hop
    tick_samples = int(round(qcfg.t_h * fs))
    capture_samples = int(round(qcfg.t_w * fs))
    n_ticks = int(round(scene.duration_s / qcfg.t_h))
    n_total_nominal = capture_samples // int(round(qcfg.t_vad * fs))
    geometry = scene.geometry
    ref_ch = config.beamformer.reference_channel
    stack = prepared.stack

    rng_quality = np.random.default_rng([seed, 1])
    rng_dropout = np.random.default_rng([seed, 2])
    qstream = QualityStream(qcfg, fs, rng_quality)
    state = corrector_init(theta_est, ccfg)
    theta_now = float(theta_est)

    out_len = prepared.den.size
    accum = np.zeros(out_len)
    enhanced = np.zeros(out_len)
    frames_done = 0
    theta_series: list[tuple[float, float]] = []
    quality_series: list[QualitySample] = []
    warnings: list[str] = []

    for k in range(1, n_ticks + 1):
        t = k * qcfg.t_h
        captured = k * tick_samples
        frames_avail = min(max(0, (captured - wl) // hop + 1), prepared.frames_total)
        drop = rng_dropout.random() < qcfg.dropout_prob
        if frames_avail > frames_done:
            block = stack[:, frames_done:frames_avail]
            gains = mask_gains_block(block, geometry, theta_now, fs, config.beamformer)
            segs = synthesis_frames(block[ref_ch] * gains, wl)
            for i in range(segs.shape[0]):
                start = (frames_done + i) * hop
                accum[start:start + wl] += segs[i]
            span = slice(frames_done * hop, frames_avail * hop)
            if drop:
                enhanced[span] = 0.0
            else:
                enhanced[span] = accum[span] / prepared.den[span]
            frames_done = frames_avail
        frontier = frames_done * hop

        if frontier >= capture_samples:
            sample = qstream.step(t, enhanced[frontier - capture_samples:frontier],
                                  prepared.oracle_reference[frontier - capture_samples:frontier])
        else:
            sample = QualitySample(t, None, qstream.smooth_q, False, 0, n_total_nominal)
        quality_series.append(sample)

        if t >= ccfg.warmup_s and qstream.smooth_q is not None:
            new_state, theta_now = corrector_step(state, qstream.smooth_q, ccfg)
            if new_state is state:
                warnings.append(f"tick t={t:.3f}s: non-finite quality, step rejected")
            state = new_state
        theta_series.append((t, theta_now))

    true_doa = scene.soi.true_doa_deg
    final_mean = final_third_mean_theta(theta_series)
    record = RunRecord(
        run_id=run_id if run_id is not None else f"run-{seed}",
        seed=seed,
        config=_config_snapshot(prepared, theta_est, seed),
        theta_series=theta_series,
        quality_series=quality_series,
        good=bool(abs(final_mean - true_doa) < 5.0),
        final_third_mean_theta=final_mean,
        warnings=warnings,
    )
    return record


def final_third_mean_theta(theta_series) -> float:
    if not theta_series:
        raise ValueError("empty trajectory")
    thetas = [th for _, th in theta_series]
    return float(np.mean(thetas[(2 * len(thetas)) // 3:]))


def classify_good_run(record: RunRecord, true_doa: float) -> bool:
    """Good iff the mean steered DOA over the final third is within 5 deg."""
    return abs(final_third_mean_theta(record.theta_series) - true_doa) < 5.0


def aggregate(records) -> TrajectoryStats:
    """Per-tick mean and population std of theta across runs."""
    records = list(records)
    if not records:
        raise ValueError("aggregate needs at least one record")
    grid = [t for t, _ in records[0].theta_series]
    for rec in records[1:]:
        if [t for t, _ in rec.theta_series] != grid:
            raise ValueError("records have mismatched tick grids")
    thetas = np.array([[th for _, th in rec.theta_series] for rec in records])
    return TrajectoryStats(
        time_grid=np.asarray(grid),
        mean_theta=thetas.mean(axis=0),
        std_theta=thetas.std(axis=0),
        n_runs=len(records),
        good_run_count=int(sum(rec.good for rec in records)),
    )


def steered_quality_profile(scene: ScenePlan, config: LoopConfig, doas) -> dict:
    """Mean oracle SI-SDR of the beamformed output per fixed steering DOA.

    Scores exactly the (ungated) t_w windows the closed loop would score; the
    noisy-estimator setting is ignored, this is the clean landscape probe.
    """
    prepared = PreparedScene(scene, config)
    qcfg = config.quality
    fs = scene.fs
    tick_samples = int(round(qcfg.t_h * fs))
    capture_samples = int(round(qcfg.t_w * fs))
    n_ticks = int(round(scene.duration_s / qcfg.t_h))
    hop, wl = prepared.hop, prepared.window_len
    ref_ch = config.beamformer.reference_channel
    result = {}
    for doa in doas:
        gains = mask_gains_block(prepared.stack, scene.geometry, float(doa), fs,
                                 config.beamformer)
        segs = synthesis_frames(prepared.stack[ref_ch] * gains, wl)
        out = np.zeros(prepared.den.size)
        for i in range(segs.shape[0]):
            out[i * hop:i * hop + wl] += segs[i]
        out /= prepared.den
        scores = []
        for k in range(1, n_ticks + 1):
            frames_avail = min(max(0, (k * tick_samples - wl) // hop + 1),
                               prepared.frames_total)
            frontier = frames_avail * hop
            if frontier < capture_samples:
                continue
            win = out[frontier - capture_samples:frontier]
            n_act, n_total = vad_activity(win, qcfg.t_vad, fs,
                                          qcfg.vad_energy_threshold_db)
            if gate(n_act, n_total):
                scores.append(si_sdr(
                    win, prepared.oracle_reference[frontier - capture_samples:frontier]))
        result[float(doa)] = float(np.mean(scores)) if scores else float("nan")
    return result


# ---------------------------------------------------------------------------
# persistence

def write_run_record(record: RunRecord, directory) -> tuple[str, str]:
    """Write run-<id>.csv plus the config snapshot sidecar; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, f"{record.run_id}.csv")
    json_path = os.path.join(directory, f"{record.run_id}.json")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "theta_deg", "raw_q_db", "smooth_q_db", "vad_active"])
        for (t, theta), sample in zip(record.theta_series, record.quality_series):
            writer.writerow([
                f"{t:.4f}",
                f"{theta:.8f}",
                "" if sample.raw_q_db is None else f"{sample.raw_q_db:.6f}",
                "" if sample.smooth_q_db is None else f"{sample.smooth_q_db:.6f}",
                "1" if sample.vad_active else "0",
            ])
    sidecar = {
        "run_id": record.run_id,
        "config": record.config,
        "good": record.good,
        "final_third_mean_theta": record.final_third_mean_theta,
        "warnings": record.warnings,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def write_aggregate_csv(stats: TrajectoryStats, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "mean_theta", "std_theta"])
        for t, m, s in zip(stats.time_grid, stats.mean_theta, stats.std_theta):
            writer.writerow([f"{t:.4f}", f"{m:.8f}", f"{s:.8f}"])


def load_aggregate_csv(path):
    times, means, stds = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "mean_theta", "std_theta"]:
            raise ValueError(f"{path}: not an aggregate CSV (header {header})")
        for row in reader:
            times.append(float(row[0]))
            means.append(float(row[1]))
            stds.append(float(row[2]))
    if not times:
        raise ValueError(f"{path}: empty aggregate CSV")
    return np.array(times), np.array(means), np.array(stds)


def load_run_csv(path):
    times, thetas = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "theta_deg", "raw_q_db", "smooth_q_db", "vad_active"]:
            raise ValueError(f"{path}: not a run CSV (header {header})")
        for row in reader:
            times.append(float(row[0]))
            thetas.append(float(row[1]))
    if not times:
        raise ValueError(f"{path}: empty run CSV")
    return np.array(times), np.array(thetas)


def write_cell_plot(cell_dir, true_doa=None) -> str:
    """(Re)generate plot.svg from the persisted aggregate.csv, byte-stable."""
    agg_path = os.path.join(cell_dir, "aggregate.csv")
    times, means, stds = load_aggregate_csv(agg_path)
    meta_path = os.path.join(cell_dir, "cell.json")
    title = os.path.basename(os.path.normpath(cell_dir))
    if true_doa is None and os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        true_doa = meta.get("true_doa_deg")
        title = meta.get("label", title)
    svg = svgplot.render_trajectory_svg(times, means, std=stds, true_value=true_doa,
                                        title=title)
    plot_path = os.path.join(cell_dir, "plot.svg")
    with open(plot_path, "w") as fh:
        fh.write(svg)
    return plot_path


# ---------------------------------------------------------------------------
# experiment presets (grids mirroring the evaluation figures)

@dataclass(frozen=True)
class GridCell:
    label: str
    theta_est: float
    corrector_overrides: dict = field(default_factory=dict)
    scene_soi_doa: float | None = None  # None: default two-source scene


@dataclass(frozen=True)
class GridPreset:
    cells: tuple
    runs: int
    description: str


PRESETS = {
    "eta-sweep": GridPreset(
        cells=tuple(GridCell(f"eta-{eta}", 15.0, {"eta": eta})
                    for eta in (0.01, 0.1, 0.2, 0.3)),
        runs=5,
        description="learning-rate sweep at theta_est=15",
    ),
    "bias-ablation": GridPreset(
        cells=(GridCell("bias-on", 15.0, {"bias_correction": True}),
               GridCell("bias-off", 15.0, {"bias_correction": False})),
        runs=30,
        description="Adam bias correction on/off at theta_est=15",
    ),
    "theta-sweep": GridPreset(
        cells=tuple(GridCell(f"theta-est-{int(th)}", float(th))
                    for th in (1, 5, 10, 15, 20, 25)),
        runs=30,
        description="initial estimate error sweep",
    ),
    "near-interference": GridPreset(
        cells=(GridCell("theta-est-105", 105.0),),
        runs=5,
        description="start near the interferer at 90 deg",
    ),
    "three-source": GridPreset(
        cells=(GridCell("soi-90-est-105", 105.0, scene_soi_doa=90.0),
               GridCell("soi-180-est-195", 195.0, scene_soi_doa=180.0),
               GridCell("soi-0-est--15", -15.0, scene_soi_doa=0.0)),
        runs=5,
        description="three sources at 0/90/180 deg, 15 deg initial error each",
    ),
}


@dataclass
class CellResult:
    label: str
    stats: TrajectoryStats
    plot_path: str
    records: list


def _cell_scene(cell: GridCell, duration_s, fs, scene_seed):
    if cell.scene_soi_doa is None:
        return default_two_source_scene(duration_s=duration_s, fs=fs, seed=scene_seed)
    return three_source_scene(cell.scene_soi_doa, duration_s=duration_s, fs=fs,
                              seed=scene_seed)


def experiment_grid(preset: str, out_dir, master_seed: int = 0,
                    config: LoopConfig | None = None, runs: int | None = None,
                    duration_s: float = 90.0, fs: int = 16000,
                    progress=None) -> list:
    """Run a preset grid; persists every run, per-cell aggregates, plots, and
    a manifest that marks incomplete cells if execution is interrupted."""
    if preset not in PRESETS:
        raise TrialError(
            f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
    spec = PRESETS[preset]
    base = config if config is not None else LoopConfig()
    n_runs = runs if runs is not None else spec.runs
    exp_dir = os.path.join(out_dir, preset)
    os.makedirs(exp_dir, exist_ok=True)
    manifest_path = os.path.join(exp_dir, "manifest.json")
    manifest = {
        "experiment": preset,
        "master_seed": master_seed,
        "runs_per_cell": n_runs,
        "duration_s": duration_s,
        "cells": [{"label": c.label, "complete": False} for c in spec.cells],
    }
    _write_manifest(manifest_path, manifest)

    results = []
    for idx, cell in enumerate(spec.cells):
        cell_config = replace(base, corrector=replace(base.corrector,
                                                      **cell.corrector_overrides))
        scene = _cell_scene(cell, duration_s, fs, master_seed)
        prepared = PreparedScene(scene, cell_config)
        records = []
        files = []
        cell_dir = os.path.join(exp_dir, cell.label)
        for k in range(n_runs):
            record = run_prepared_trial(prepared, cell.theta_est,
                                        master_seed + k, run_id=f"run-{k}")
            records.append(record)
            files.extend(os.path.basename(p)
                         for p in write_run_record(record, cell_dir))
            if progress is not None:
                progress(cell.label, k, record)
        stats = aggregate(records)
        write_aggregate_csv(stats, os.path.join(cell_dir, "aggregate.csv"))
        cell_meta = {
            "label": cell.label,
            "theta_est_deg": cell.theta_est,
            "true_doa_deg": scene.soi.true_doa_deg,
            "corrector_overrides": cell.corrector_overrides,
            "seeds": [master_seed + k for k in range(n_runs)],
            "good_run_count": stats.good_run_count,
            "n_runs": stats.n_runs,
        }
        with open(os.path.join(cell_dir, "cell.json"), "w") as fh:
            json.dump(cell_meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        plot_path = write_cell_plot(cell_dir)
        files.extend(["aggregate.csv", "cell.json", os.path.basename(plot_path)])
        manifest["cells"][idx] = {
            "label": cell.label,
            "complete": True,
            "theta_est_deg": cell.theta_est,
            "true_doa_deg": scene.soi.true_doa_deg,
            "good_run_count": stats.good_run_count,
            "n_runs": stats.n_runs,
            "files": sorted(files),
        }
        _write_manifest(manifest_path, manifest)
        results.append(CellResult(cell.label, stats, plot_path, records))
    return results


def _write_manifest(path, manifest) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
