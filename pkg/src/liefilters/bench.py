"""Benchmark harness: simulate tracks, run filters, sweep parameter grids.

Subcommands: ``simulate``, ``filter``, ``sweep``, ``compare-ekf``.  Options
can come from a key=value config file (``--config``) with command-line flags
taking precedence.  All randomness flows from a single ``--seed``, making
every output byte-identical across runs.  Exit codes: 0 success, 1 fatal
error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .ekf import EkfConfig, EkfState, ekf_run
from .lie import MotionState, geodesic_distance, prod_log, se3_exp, se3_log, se3_mat, se3_vec
from .mef import FilterConfig, FilterState, kinematic_drift, mef_frame_step
from .observation import LinearObservation, Observation
from .synth import (
    NoiseModel,
    Track,
    generate_track,
    load_pose_file,
    observation_stream,
    rotation_error_deg,
    save_pose_file,
    translation_error,
)

OBS_SCHEMA = "observations-v1"
RESULTS_SCHEMA = "results-v1"
SWEEP_SCHEMA = "sweep-v1"
COMPARE_SCHEMA = "compare-ekf-v1"


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def parse_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _vector6(text: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 6:
        raise ConfigError(f"expected 6 numbers, got {len(parts)}: {text!r}")
    return np.array([float(p) for p in parts])


def make_track(args) -> Track:
    """Track from a pose file or from the kinematic generator.

    ``track_order`` is the kinematic order of the frame-to-frame motion; the
    generator integrates the one-higher-order system so the relative pose
    follows the requested model.
    """
    if args.pose_file:
        if not Path(args.pose_file).exists():
            raise ConfigError(f"pose file {args.pose_file} does not exist")
        return load_pose_file(args.pose_file, delta=args.delta)
    j = args.track_order
    gen_order = j + 1
    v0 = np.zeros((gen_order - 1, 6))
    twist = _vector6(args.track_twist) if args.track_twist else None
    if j == 1:
        v0[0] = twist if twist is not None else np.array([0.25, -0.2, 0.3, 0.9, 0.5, -1.2])
    else:
        base = np.array([0.25, -0.2, 0.3, 0.9, 0.5, -1.2])
        v0[gen_order - 2] = base * args.track_scale
        if twist is not None:
            v0[0] = twist
    return generate_track(gen_order, np.eye(4), v0, args.frames, args.delta)


def make_filter_config(args, q_dim: int = 2) -> FilterConfig:
    pose_block = np.diag([args.s1] * 3 + [args.s2] * 3)
    vel_block = np.eye(6) * args.s_vel
    blocks = np.stack([pose_block] + [vel_block] * (args.order - 1))
    q = (args.q_scale / max(args.n_obs, 1)) * np.eye(q_dim)
    return FilterConfig(
        order=args.order,
        alpha=args.alpha,
        delta=args.delta,
        s_blocks=blocks,
        q=q,
        substeps=args.substeps,
    )


def write_observations(stream, path: str) -> None:
    p = Path(path)
    if p.suffix == ".jsonl":
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"schema": OBS_SCHEMA}) + "\n")
            for frame, batch in enumerate(stream, start=1):
                for k, o in enumerate(batch):
                    fh.write(
                        json.dumps(
                            {
                                "frame": frame,
                                "point_id": k,
                                "x1": o.pixel[0],
                                "x2": o.pixel[1],
                                "depth": o.depth,
                                "y1": o.y[0],
                                "y2": o.y[1],
                            }
                        )
                        + "\n"
                    )
        return
    with open(p, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={OBS_SCHEMA}\n")
        fh.write("frame,point_id,x1,x2,depth,y1,y2\n")
        for frame, batch in enumerate(stream, start=1):
            for k, o in enumerate(batch):
                fields = [str(frame), str(k), _fmt(o.pixel[0]), _fmt(o.pixel[1]),
                          _fmt(o.depth), _fmt(o.y[0]), _fmt(o.y[1])]
                fh.write(",".join(fields) + "\n")


def read_observations(path: str) -> list[list[Observation]]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"observation file {path} does not exist")
    frames: dict[int, list[Observation]] = {}

    def add(frame, x1, x2, depth, y1, y2, where):
        try:
            obs = Observation.from_measurement(
                np.array([float(x1), float(x2)]), float(depth),
                np.array([float(y1), float(y2)]))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        frames.setdefault(int(frame), []).append(obs)

    if p.suffix == ".jsonl":
        for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "schema" in rec:
                continue
            add(rec["frame"], rec["x1"], rec["x2"], rec["depth"], rec["y1"], rec["y2"],
                f"{path}:{lineno}")
    else:
        for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip() or line.startswith("#") or line.startswith("frame,"):
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ConfigError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            add(parts[0], *parts[2:], where=f"{path}:{lineno}")
    if not frames:
        raise ConfigError(f"{path}: no observations found")
    n_frames = max(frames)
    return [frames.get(l, []) for l in range(1, n_frames + 1)]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    track = make_track(args)
    noise = None
    if args.noise_kind != "none":
        noise = NoiseModel(kind=args.noise_kind, mean=args.noise_mean,
                           variance=args.noise_var, seed=args.seed)
    stream = observation_stream(track, n=args.n_obs, rng=rng, noise=noise)
    save_pose_file(track, args.out_prefix + "_poses.txt")
    ext = ".jsonl" if args.jsonl else ".csv"
    write_observations(stream, args.out_prefix + "_obs" + ext)
    print(f"wrote {args.out_prefix}_poses.txt and {args.out_prefix}_obs{ext}")
    return 0


def _pose_row(E: np.ndarray) -> list[str]:
    return [_fmt(v) for v in E[:3, :].ravel()]


def cmd_filter(args) -> int:
    stream = read_observations(args.obs_file)
    n_frames = len(stream)
    track = None
    if args.pose_file:
        if not Path(args.pose_file).exists():
            raise ConfigError(f"pose file {args.pose_file} does not exist")
        track = load_pose_file(args.pose_file, delta=args.delta)
    if track is not None and len(track) != n_frames + 1:
        raise ConfigError(
            f"pose file has {len(track)} poses but observations cover {n_frames} frames"
        )
    config = make_filter_config(args)
    if args.init == "gt" and track is not None:
        G0 = MotionState(track.relative_pose(1), np.zeros((args.order - 1, 6)))
        state = FilterState(G0, args.p0 * np.eye(6 * args.order), 0.0)
    else:
        state = FilterState(
            MotionState.identity(args.order), args.p0 * np.eye(6 * args.order), 0.0
        )
    accumulated = track.poses[0].copy() if track is not None else np.eye(4)

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={RESULTS_SCHEMA}\n")
        header = (
            ["frame", "t"]
            + [f"rel_{i}" for i in range(12)]
            + [f"abs_{i}" for i in range(12)]
            + ["geodesic_error", "rotation_error_deg", "translation_error"]
        )
        fh.write(",".join(header) + "\n")
        for frame, batch in enumerate(stream, start=1):
            try:
                state = mef_frame_step(state, batch, config)
            except Exception as exc:
                print(f"error: frame {frame}: {exc}", file=sys.stderr)
                return 1
            accumulated = accumulated @ state.G.pose
            row = [str(frame), _fmt(state.t)]
            row += _pose_row(state.G.pose)
            row += _pose_row(accumulated)
            if track is not None:
                rel_gt = track.relative_pose(frame)
                row += [
                    _fmt(geodesic_distance(rel_gt, state.G.pose)),
                    _fmt(rotation_error_deg(rel_gt, state.G.pose)),
                    _fmt(translation_error(rel_gt, state.G.pose)),
                ]
            else:
                row += ["", "", ""]
            fh.write(",".join(row) + "\n")
    print(f"wrote {args.out}")
    return 0


def _sweep_cell(payload):
    """One (order, noise kind, variance, n, alpha) cell; returns a row dict."""
    (order, kind, sigma2, n, alpha, repeats, base, seed) = payload
    kind_id = ("none", "AG", "AU", "MG", "MU").index(kind)
    errors = []
    for rep in range(repeats):
        rng = np.random.default_rng((seed, order, kind_id, int(sigma2 * 1e9), n, rep))
        try:
            args = argparse.Namespace(**base)
            args.track_order = min(order, 4) if base["match_track"] else base["track_order"]
            args.pose_file = None
            track = make_track(args)
            noise = None
            if kind != "none":
                noise = NoiseModel(kind=kind, mean=1.0 if kind.startswith("M") else 0.0,
                                   variance=sigma2, seed=int(rng.integers(2**31)))
            stream = observation_stream(track, n=n, rng=rng, noise=noise)
            fargs = argparse.Namespace(**base)
            fargs.order = order
            fargs.alpha = alpha
            fargs.n_obs = n
            config = make_filter_config(fargs)
            G0 = MotionState(track.relative_pose(1), np.zeros((order - 1, 6)))
            state = FilterState(G0, base["p0"] * np.eye(6 * order), 0.0)
            errs = []
            for frame, batch in enumerate(stream, start=1):
                state = mef_frame_step(state, batch, config)
                errs.append(geodesic_distance(track.relative_pose(frame), state.G.pose))
            errors.append(float(np.mean(errs)))
        except Exception as exc:
            return dict(order=order, kind=kind, sigma2=sigma2, n=n, alpha=alpha,
                        repeats=rep, mean_error="", status=f"failed: {exc}")
    return dict(order=order, kind=kind, sigma2=sigma2, n=n, alpha=alpha,
                repeats=repeats, mean_error=float(np.mean(errors)), status="ok")


def cmd_sweep(args) -> int:
    orders = [int(v) for v in args.orders.split(",")]
    kinds = args.noise_kinds.split(",")
    sigmas = [float(v) for v in args.sigmas.split(",")] if args.sigmas else [0.0]
    ns = [int(v) for v in args.n_obs_list.split(",")]
    alphas = [float(v) for v in args.alphas.split(",")]
    base = dict(
        frames=args.frames, delta=args.delta, track_order=args.track_order,
        track_scale=args.track_scale, track_twist=args.track_twist,
        s1=args.s1, s2=args.s2, s_vel=args.s_vel, q_scale=args.q_scale,
        substeps=args.substeps, p0=args.p0, match_track=args.match_track,
    )
    cells = [
        (order, kind, sigma2, n, alpha, args.repeats, base, args.seed)
        for order in orders
        for kind in kinds
        for sigma2 in sigmas
        for n in ns
        for alpha in alphas
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={SWEEP_SCHEMA}\n")
        fh.write("order,noise,sigma2,n_obs,alpha,repeats,mean_geodesic_error,status\n")
        for row in rows:
            mean = _fmt(row["mean_error"]) if row["mean_error"] != "" else ""
            fh.write(
                f"{row['order']},{row['kind']},{_fmt(row['sigma2'])},{row['n']},"
                f"{_fmt(row['alpha'])},{row['repeats']},{mean},{row['status']}\n"
            )
    print(f"wrote {args.out} ({len(rows)} cells)")
    return 0


def make_linear_scenario(seed: int, frames: int, delta: float, process_std2: float,
                         obs_var: float):
    """Noise-driven order-2 ground truth observed through the four pose columns."""
    rng = np.random.default_rng(seed)
    E0 = se3_exp(se3_mat(rng.normal(size=6) * 0.5))
    v0 = rng.normal(size=6) * 0.05
    gt = [MotionState(E0, v0.reshape(1, 6))]
    h = delta / 10.0
    for _ in range(frames):
        G = gt[-1].copy()
        for _ in range(10):
            eps = np.sqrt(process_std2) * rng.standard_normal(12)
            from .lie import prod_exp

            G = G.compose(prod_exp(h * kinematic_drift(G) + np.sqrt(h) * eps, 2))
        gt.append(G)
    directions = [np.eye(4)[k] for k in range(4)]
    stream = [
        [
            LinearObservation(a=a, y=gt[l].pose @ a + rng.normal(size=4) * np.sqrt(obs_var))
            for a in directions
        ]
        for l in range(1, frames + 1)
    ]
    return gt, stream


def cmd_compare_ekf(args) -> int:
    if args.mode == "linear":
        gt, stream = make_linear_scenario(
            args.seed, args.frames, args.delta, args.process_var, args.obs_var
        )
        gt_rel = [g.pose for g in gt]
        mef_cfg = FilterConfig(
            order=2, alpha=args.alpha, delta=args.delta, substeps=args.substeps,
            s_blocks=np.stack([args.mef_s * np.eye(6)] * 2), q=args.mef_q * np.eye(4),
        )
        ekf_cfg = EkfConfig(s=args.process_var * np.eye(12),
                            q_l=args.obs_var * np.eye(4), delta=args.delta)
        gt_logs = [prod_log(g)[:6] for g in gt]
    else:
        rng = np.random.default_rng(args.seed)
        track = make_track(args)
        stream = observation_stream(track, n=args.n_obs, rng=rng)
        gt_rel = [np.eye(4)] + [track.relative_pose(l) for l in range(1, len(track))]
        mef_cfg = make_filter_config(args)
        ekf_cfg = EkfConfig(s=args.process_var * np.eye(12),
                            q_l=args.obs_var * np.eye(2), delta=args.delta)
        gt_logs = [np.zeros(6)] + [
            se3_vec(se3_log(track.relative_pose(l)), check=False)
            for l in range(1, len(track))
        ]

    mef_state = FilterState(MotionState.identity(2), args.p0 * np.eye(12), 0.0)
    ekf_state = EkfState.initial()
    mef_failed = ekf_failed = None

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={COMPARE_SCHEMA}\n")
        header = (
            ["frame", "t"]
            + [f"gt_{i}" for i in range(6)]
            + [f"mef_{i}" for i in range(6)]
            + [f"ekf_{i}" for i in range(6)]
            + ["mef_geodesic_error", "ekf_geodesic_error", "mef_status", "ekf_status"]
        )
        fh.write(",".join(header) + "\n")
        from .ekf import ekf_propagate, ekf_update

        for frame, batch in enumerate(stream, start=1):
            if mef_failed is None:
                try:
                    mef_state = mef_frame_step(mef_state, batch, mef_cfg)
                except Exception as exc:
                    mef_failed = f"frame {frame}: {exc}"
            if ekf_failed is None:
                try:
                    ekf_state = ekf_update(
                        ekf_propagate(ekf_state, args.delta, ekf_cfg), batch, ekf_cfg
                    )
                except Exception as exc:
                    ekf_failed = f"frame {frame}: {exc}"
            row = [str(frame), _fmt(frame * args.delta)]
            row += [_fmt(v) for v in gt_logs[frame]]
            row += [_fmt(v) for v in prod_log(mef_state.G)[:6]]
            row += [_fmt(v) for v in prod_log(ekf_state.G)[:6]]
            row += [
                _fmt(geodesic_distance(gt_rel[frame], mef_state.G.pose)),
                _fmt(geodesic_distance(gt_rel[frame], ekf_state.G.pose)),
                mef_failed or "ok",
                ekf_failed or "ok",
            ]
            fh.write(",".join(row) + "\n")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--delta", type=float, default=1.0 / 50.0)
    p.add_argument("--n-obs", type=int, default=50)
    p.add_argument("--order", type=int, default=2, choices=(1, 2, 3, 4))
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--s1", type=float, default=1e-2, help="pose-level rotation weight")
    p.add_argument("--s2", type=float, default=1e-5, help="pose-level translation weight")
    p.add_argument("--s-vel", type=float, default=1e-5, help="velocity-level weight")
    p.add_argument("--q-scale", type=float, default=0.1, help="observation weight: q_scale / n")
    p.add_argument("--substeps", type=int, default=1)
    p.add_argument("--p0", type=float, default=1.0, help="initial information matrix scale")
    p.add_argument("--track-order", type=int, default=2, choices=(1, 2, 3, 4))
    p.add_argument("--track-scale", type=float, default=4.0)
    p.add_argument("--track-twist", default="", help="initial twist, 6 comma-separated floats")
    p.add_argument("--pose-file", default="", help="drive the track from a pose file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liefilters-bench",
                                 description="synthetic benchmarks for SE(3) motion filters")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a track and observation files")
    _add_common(p)
    p.add_argument("--noise-kind", default="none", choices=("AG", "AU", "MG", "MU", "none"))
    p.add_argument("--noise-mean", type=float, default=0.0)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--jsonl", action="store_true", help="write observations as JSON lines")
    p.add_argument("--out-prefix", default="sim")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run the minimum energy filter on an observation file")
    _add_common(p)
    p.add_argument("--obs-file", required=True)
    p.add_argument("--init", default="id", choices=("id", "gt"))
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sweep", help="grid of (order, noise, variance, n, alpha) cells")
    _add_common(p)
    p.add_argument("--orders", default="1,2,3,4")
    p.add_argument("--noise-kinds", default="none")
    p.add_argument("--sigmas", default="")
    p.add_argument("--n-obs-list", default="50")
    p.add_argument("--alphas", default="2.0")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--match-track", action="store_true",
                   help="regenerate the track at each cell's order")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare-ekf", help="minimum energy filter vs Kalman baseline")
    _add_common(p)
    p.add_argument("--mode", default="linear", choices=("linear", "projective"))
    p.add_argument("--process-var", type=float, default=0.02)
    p.add_argument("--obs-var", type=float, default=1e-8)
    p.add_argument("--mef-q", type=float, default=100.0)
    p.add_argument("--mef-s", type=float, default=1.0)
    p.add_argument("--out", default="compare.csv")
    p.set_defaults(func=cmd_compare_ekf)
    return ap


def _apply_config(args, overrides: dict, argv: list[str]) -> None:
    """Config values fill in options not given explicitly on the command line."""
    explicit = {
        tok[2:].split("=", 1)[0].replace("-", "_") for tok in argv if tok.startswith("--")
    }
    for key, value in overrides.items():
        if key in ("command", "func", "config") or key in explicit:
            continue
        if not hasattr(args, key):
            raise ConfigError(f"unknown option {key!r}")
        current = getattr(args, key)
        try:
            if isinstance(current, bool):
                setattr(args, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(args, key, int(value))
            elif isinstance(current, float):
                setattr(args, key, float(value))
            else:
                setattr(args, key, value)
        except ValueError as exc:
            raise ConfigError(f"option {key}: {exc}") from exc


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.config:
            _apply_config(args, parse_config_file(args.config), argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
