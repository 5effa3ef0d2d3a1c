"""Command-line front end: single runs, experiment presets, plot regeneration.

Settings resolve with total precedence defaults < config file < flags. The
config file is plain ``key = value`` text, one per line, ``#`` comments;
unknown keys are rejected. Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .arraysim import (
    ScenePlan,
    SceneError,
    SourceSpec,
    default_triangular_geometry,
    synth_speech_like,
)
from .beamform import ALIASING_POLICIES, BeamformerConfig
from .corrector import CorrectorConfig
from .harness import (
    LoopConfig,
    PRESETS,
    TrialError,
    default_two_source_scene,
    experiment_grid,
    load_run_csv,
    run_trial,
    three_source_scene,
    write_cell_plot,
    write_run_record,
)
from .quality import ESTIMATORS, QualityConfig
from . import svgplot
from .wavio import WavError, load_wav

SCENE_PRESETS = ("two-source", "three-source-0", "three-source-90", "three-source-180")


class CliError(ValueError):
    """Bad flags, config keys, or input files."""


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise CliError(f"expected a boolean, got {text!r}")


def _parse_noise_db(text: str):
    if text.lower() in ("off", "none"):
        return None
    return float(text)


#: every settable key with its parser; doubles as the validation whitelist
KEY_PARSERS = {
    "theta_est": float,
    "eta": float,
    "alpha": float,
    "seed": int,
    "duration": float,
    "out": str,
    "scene": str,
    "scene_seed": int,
    "diffuse_noise_db": _parse_noise_db,
    "estimator": str,
    "noise_sigma_db": float,
    "dropout_prob": float,
    "bias_correction": _parse_bool,
    "beta_m": float,
    "beta_v": float,
    "epsilon": float,
    "warmup_s": float,
    "q_ceiling": float,
    "t_h": float,
    "t_w": float,
    "t_vad": float,
    "vad_energy_threshold_db": float,
    "phase_tolerance_rad": float,
    "mask_floor": float,
    "aliasing_policy": str,
    "window_len": int,
    "master_seed": int,
    "runs": int,
    "fs": int,
}


def default_settings() -> dict:
    bf = BeamformerConfig()
    q = QualityConfig()
    c = CorrectorConfig()
    return {
        "theta_est": 15.0,
        "eta": c.eta,
        "alpha": q.alpha,
        "seed": 0,
        "duration": 90.0,
        "out": "out",
        "scene": "two-source",
        "scene_seed": 0,
        "diffuse_noise_db": None,
        "estimator": q.estimator,
        "noise_sigma_db": q.noise_sigma_db,
        "dropout_prob": q.dropout_prob,
        "bias_correction": c.bias_correction,
        "beta_m": c.beta_m,
        "beta_v": c.beta_v,
        "epsilon": c.epsilon,
        "warmup_s": c.warmup_s,
        "q_ceiling": c.q_ceiling,
        "t_h": q.t_h,
        "t_w": q.t_w,
        "t_vad": q.t_vad,
        "vad_energy_threshold_db": q.vad_energy_threshold_db,
        "phase_tolerance_rad": bf.phase_tolerance_rad,
        "mask_floor": bf.mask_floor,
        "aliasing_policy": bf.aliasing_policy,
        "window_len": 1024,
        "master_seed": 0,
        "runs": None,
        "fs": 16000,
    }


def parse_config_file(path) -> dict:
    """Parse a key=value config file, rejecting unknown keys."""
    settings = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KEY_PARSERS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            settings[key] = KEY_PARSERS[key](value)
        except (ValueError, CliError) as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return settings


def build_loop_config(s: dict) -> LoopConfig:
    beamformer = BeamformerConfig(
        phase_tolerance_rad=s["phase_tolerance_rad"],
        mask_floor=s["mask_floor"],
        aliasing_policy=s["aliasing_policy"],
    )
    quality = QualityConfig(
        t_h=s["t_h"], t_w=s["t_w"], t_vad=s["t_vad"], alpha=s["alpha"],
        vad_energy_threshold_db=s["vad_energy_threshold_db"],
        estimator=s["estimator"], noise_sigma_db=s["noise_sigma_db"],
        dropout_prob=s["dropout_prob"],
    )
    corrector = CorrectorConfig(
        eta=s["eta"], beta_m=s["beta_m"], beta_v=s["beta_v"], epsilon=s["epsilon"],
        bias_correction=s["bias_correction"], warmup_s=s["warmup_s"],
        q_ceiling=s["q_ceiling"],
    )
    return LoopConfig(beamformer, quality, corrector, window_len=s["window_len"])


def build_scene(s: dict) -> ScenePlan:
    name = s["scene"]
    if os.path.isfile(name):
        return scene_from_file(name, s)
    if name == "two-source":
        return default_two_source_scene(duration_s=s["duration"], fs=s["fs"],
                                        seed=s["scene_seed"],
                                        diffuse_noise_db=s["diffuse_noise_db"])
    if name.startswith("three-source-"):
        soi = float(name.rsplit("-", 1)[1])
        return three_source_scene(soi, duration_s=s["duration"], fs=s["fs"],
                                  seed=s["scene_seed"])
    raise CliError(f"unknown scene {name!r}: use one of {', '.join(SCENE_PRESETS)} "
                   "or a scene file path")


SCENE_FILE_KEYS = {"fs": int, "duration_s": float, "seed": int,
                   "diffuse_noise_db": _parse_noise_db}
SOURCE_FIELD_KEYS = {"kind": str, "path": str, "doa": float, "gain": float, "seed": int}


def scene_from_file(path, s: dict) -> ScenePlan:
    """Build a ScenePlan from a key=value scene description.

    Scene-level keys: fs, duration_s, seed, diffuse_noise_db. Sources are
    numbered groups, e.g. ``source1.kind = synth`` / ``source1.doa = 0`` or
    ``source2.kind = wav`` / ``source2.path = talker.wav``; source1 is the SOI.
    """
    scene_kv = {}
    sources_kv: dict[int, dict] = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read scene file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("source") and "." in key:
            prefix, _, fieldname = key.partition(".")
            try:
                index = int(prefix[len("source"):])
            except ValueError:
                raise CliError(f"{path}:{lineno}: bad source key {key!r}") from None
            if fieldname not in SOURCE_FIELD_KEYS:
                raise CliError(f"{path}:{lineno}: unknown source field {fieldname!r}")
            sources_kv.setdefault(index, {})[fieldname] = \
                SOURCE_FIELD_KEYS[fieldname](value)
        elif key in SCENE_FILE_KEYS:
            scene_kv[key] = SCENE_FILE_KEYS[key](value)
        else:
            raise CliError(f"{path}:{lineno}: unknown scene key {key!r}")
    if not sources_kv:
        raise CliError(f"{path}: scene file declares no sources")
    fs = scene_kv.get("fs", s["fs"])
    duration = scene_kv.get("duration_s", s["duration"])
    seed = scene_kv.get("seed", s["scene_seed"])
    sources = []
    for index in sorted(sources_kv):
        fields = sources_kv[index]
        kind = fields.get("kind", "synth")
        doa = fields.get("doa")
        if doa is None:
            raise CliError(f"{path}: source{index} is missing its doa")
        gain = fields.get("gain", 1.0)
        if kind == "synth":
            signal = synth_speech_like(duration, fs,
                                       seed=[seed, fields.get("seed", index)])
            sources.append(SourceSpec(signal, doa, gain))
        elif kind == "wav":
            wav_path = fields.get("path")
            if not wav_path:
                raise CliError(f"{path}: source{index} kind=wav needs a path")
            signal, wav_fs = load_wav(os.path.join(os.path.dirname(path), wav_path)
                                      if not os.path.isabs(wav_path) else wav_path)
            sources.append(SourceSpec(signal, doa, gain, fs=wav_fs))
        else:
            raise CliError(f"{path}: source{index} has unknown kind {kind!r}")
    return ScenePlan(default_triangular_geometry(), tuple(sources), fs=fs,
                     diffuse_noise_db=scene_kv.get("diffuse_noise_db",
                                                   s["diffuse_noise_db"]),
                     duration_s=duration, seed=seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _add_shared_flags(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--out", help="output directory (default ./out)")


def _add_run_flags(parser):
    parser.add_argument("--scene", help="scene preset or scene file "
                        f"({', '.join(SCENE_PRESETS)})")
    parser.add_argument("--theta-est", type=float, dest="theta_est",
                        help="initial DOA estimate in degrees")
    parser.add_argument("--eta", type=float, help="corrector learning rate")
    parser.add_argument("--alpha", type=float, help="quality smoothing factor")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--duration", type=float, help="scene duration in seconds")
    parser.add_argument("--bias-correction", dest="bias_correction",
                        action="store_const", const=True,
                        help="enable Adam bias correction")
    parser.add_argument("--dropout-prob", type=float, dest="dropout_prob",
                        help="per-tick probability of a zeroed output window")
    parser.add_argument("--estimator", choices=ESTIMATORS,
                        help="quality estimator")
    parser.add_argument("--noise-sigma-db", type=float, dest="noise_sigma_db",
                        help="noisy-oracle noise std in dB")


def make_parser() -> _Parser:
    parser = _Parser(prog="doaloop",
                     description="closed-loop DOA correction simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one closed-loop trial")
    _add_shared_flags(run_p)
    _add_run_flags(run_p)

    exp_p = sub.add_parser("experiment", help="run an experiment preset grid")
    exp_p.add_argument("preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    _add_shared_flags(exp_p)
    _add_run_flags(exp_p)
    exp_p.add_argument("--master-seed", type=int, dest="master_seed",
                       help="base seed; run k uses master_seed + k")
    exp_p.add_argument("--runs", type=int, help="runs per grid cell")

    plot_p = sub.add_parser("plot", help="regenerate an SVG from persisted CSVs")
    plot_p.add_argument("path", help="cell directory (with aggregate.csv) or run CSV")
    return parser


def resolve_settings(args) -> dict:
    settings = default_settings()
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for key in KEY_PARSERS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if getattr(args, "aliasing_policy", None) is None \
            and settings["aliasing_policy"] not in ALIASING_POLICIES:
        raise CliError(f"aliasing_policy must be one of {ALIASING_POLICIES}")
    return settings


def cmd_run(args) -> int:
    settings = resolve_settings(args)
    config = build_loop_config(settings)
    scene = build_scene(settings)
    record = run_trial(scene, config, settings["theta_est"], settings["seed"])
    out_dir = settings["out"]
    csv_path, _ = write_run_record(record, out_dir)
    verdict = "good" if record.good else "not-good"
    true_doa = scene.soi.true_doa_deg
    print(f"{record.run_id}: {verdict}, final-third mean theta "
          f"{record.final_third_mean_theta:.3f} deg (true {true_doa:.1f} deg) "
          f"-> {csv_path}")
    return 0


def cmd_experiment(args) -> int:
    settings = resolve_settings(args)
    config = build_loop_config(settings)
    if args.preset not in PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; "
                       f"available: {', '.join(sorted(PRESETS))}")
    results = experiment_grid(
        args.preset, settings["out"], master_seed=settings["master_seed"],
        config=config, runs=settings["runs"], duration_s=settings["duration"],
        fs=settings["fs"],
    )
    for cell in results:
        print(f"{args.preset}/{cell.label}: {cell.stats.good_run_count}"
              f"/{cell.stats.n_runs} good runs -> {cell.plot_path}")
    return 0


def cmd_plot(args) -> int:
    path = args.path
    if os.path.isdir(path):
        agg = os.path.join(path, "aggregate.csv")
        if not os.path.exists(agg):
            raise CliError(f"missing {agg}: nothing to plot in {path}")
        plot_path = write_cell_plot(path)
        print(plot_path)
        return 0
    if os.path.isfile(path) and path.endswith(".csv"):
        times, thetas = load_run_csv(path)
        svg = svgplot.render_trajectory_svg(
            times, thetas, title=os.path.splitext(os.path.basename(path))[0])
        plot_path = os.path.splitext(path)[0] + ".svg"
        with open(plot_path, "w") as fh:
            fh.write(svg)
        print(plot_path)
        return 0
    raise CliError(f"{path}: not a run CSV or a cell directory")


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "experiment":
            return cmd_experiment(args)
        if args.command == "plot":
            return cmd_plot(args)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, SceneError, TrialError, WavError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run '{parser.prog} --help' for usage", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive runtime guard
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    raise SystemExit(main())
