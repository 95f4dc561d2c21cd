"""Command-line front end.

The CLI is a thin client of the FastAPI service: each subcommand builds a
request, posts it, and renders the response. Without --server the service
app runs in-process; with --server the same requests go to a remote
instance over HTTP.

Flag values override config-file entries, which override the built-in
defaults (workers additionally honours RGBD_BGSEG_WORKERS). Config files
are plain `key = value` lines whose keys match the flag names with
underscores; algorithm parameters use dotted keys (gmm.tau, pbas.n) and the
repeatable `--set key=value` flag is their command-line equivalent.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import WORKERS_ENV, default_workers, parse_config_file
from .errors import ConfigError
from .synth import SCENARIOS

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# Every flag key the config file may carry, with its coercion type.
_KEY_TYPES = {
    "algo": str, "mode": str, "rgb_dir": str, "depth_dir": str, "gt_dir": str,
    "out_dir": str, "mask_dir": str, "sequence": str, "seed": int,
    "workers": int, "sizes": str, "algos": str, "modes": str, "frames": int,
    "width": int, "height": int, "entry_frame": int, "object_w": int,
    "object_h": int, "speed": int, "depth_offset": int, "colour_offset": int,
    "ramp_slope": float, "shadow_strength": float, "depth_format": str,
    "server": str,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgbdseg",
        description="RGB-D foreground segmentation: segment, evaluate, bench, synth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--server", help="service URL (default: run the service in-process)")
        p.add_argument("--set", dest="param_sets", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="algorithm parameter override, e.g. gmm.tau=4.0 (repeatable)")

    seg = sub.add_parser("segment", help="segment a sequence and write masks")
    seg.add_argument("--algo", choices=("gmm", "pbas"))
    seg.add_argument("--mode", choices=("rgb_only", "rgbd"))
    seg.add_argument("--rgb-dir")
    seg.add_argument("--depth-dir")
    seg.add_argument("--out-dir")
    seg.add_argument("--seed", type=int)
    seg.add_argument("--workers", type=int)
    common(seg)

    ev = sub.add_parser("evaluate", help="compare a mask directory against ground truth")
    ev.add_argument("--mask-dir")
    ev.add_argument("--gt-dir")
    ev.add_argument("--out-dir", help="write metrics.csv here")
    ev.add_argument("--sequence", help="sequence label for the report")
    ev.add_argument("--algo", help="algorithm label for the report")
    ev.add_argument("--mode", help="mode label for the report")
    common(ev)

    be = sub.add_parser("bench", help="measure throughput on synthetic sequences")
    be.add_argument("--sizes", help="comma list of rgb/depth pairs, e.g. 480p/480p,720p/480p")
    be.add_argument("--algos", help="comma list of algorithms (default gmm,pbas)")
    be.add_argument("--modes", help="comma list of modes (default rgbd)")
    be.add_argument("--workers", help="comma list of worker counts (default 1,4)")
    be.add_argument("--frames", type=int)
    be.add_argument("--seed", type=int)
    common(be)

    sy = sub.add_parser("synth", help="generate a synthetic RGB-D sequence")
    sy.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    sy.add_argument("--out-dir")
    sy.add_argument("--width", type=int)
    sy.add_argument("--height", type=int)
    sy.add_argument("--frames", type=int)
    sy.add_argument("--entry-frame", type=int)
    sy.add_argument("--object-w", type=int)
    sy.add_argument("--object-h", type=int)
    sy.add_argument("--speed", type=int)
    sy.add_argument("--depth-offset", type=int)
    sy.add_argument("--colour-offset", type=int)
    sy.add_argument("--ramp-slope", type=float)
    sy.add_argument("--shadow-strength", type=float)
    sy.add_argument("--depth-format", choices=("png", "pgm"))
    common(sy)
    return parser


def _merge_options(args, defaults: dict):
    """flag > config file > environment/builtin default, per option key."""
    file_map = {}
    param_overrides = {}
    if args.config:
        for key, value in parse_config_file(args.config).items():
            if key.startswith(("gmm.", "pbas.")):
                param_overrides[key] = value
            elif key in _KEY_TYPES:
                try:
                    file_map[key] = _KEY_TYPES[key](value)
                except ValueError as exc:
                    raise ConfigError(f"config key {key}: bad value {value!r} ({exc})")
            else:
                raise ConfigError(f"config file has unknown key {key!r}")

    merged = {}
    for key, builtin in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in file_map:
            merged[key] = file_map[key]
        else:
            merged[key] = builtin

    for entry in args.param_sets:
        if "=" not in entry:
            raise ConfigError(f"--set expects KEY=VALUE, got {entry!r}")
        key, _, value = entry.partition("=")
        key = key.strip()
        if not key.startswith(("gmm.", "pbas.")):
            raise ConfigError(f"--set key must be gmm.* or pbas.*, got {key!r}")
        param_overrides[key] = value.strip()
    return merged, param_overrides


def _params_payload(param_overrides: dict) -> dict:
    """Split dotted overrides into the gmm/pbas request sub-objects."""
    payload = {"gmm": {}, "pbas": {}}
    from .config import PipelineConfig, apply_param_overrides

    probe = PipelineConfig()
    apply_param_overrides(probe, param_overrides)  # validates names and values
    for key, value in param_overrides.items():
        group, _, name = key.partition(".")
        payload[group][name] = getattr(getattr(probe, group), name)
    return {k: v for k, v in payload.items() if v}


def _echo_config(command: str, merged: dict, param_overrides: dict) -> None:
    print(f"effective config ({command}):")
    for key in sorted(merged):
        if merged[key] is not None:
            print(f"  {key} = {merged[key]}")
    for key in sorted(param_overrides):
        print(f"  {key} = {param_overrides[key]}")


class ServiceClient:
    """POSTs to a remote service, or to the in-process app by default."""

    def __init__(self, server=None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict):
        response = self._client.post(path, json=payload)
        try:
            body = response.json()
        except ValueError:
            body = {"detail": response.text}
        return response.status_code, body

    def close(self):
        self._client.close()


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _service_error(body: dict) -> str:
    detail = body.get("detail", body)
    if isinstance(detail, dict) and "field" in detail:
        flag = "--" + str(detail["field"]).replace("_", "-")
        return f"{flag}: {detail.get('message', 'rejected')}"
    return str(detail)


def _cmd_segment(args) -> int:
    defaults = {
        "algo": "gmm", "mode": "rgbd", "rgb_dir": None, "depth_dir": None,
        "out_dir": None, "seed": 0, "workers": default_workers(),
    }
    merged, params = _merge_options(args, defaults)
    if not merged["rgb_dir"]:
        return _fail("segment needs --rgb-dir")
    if not merged["out_dir"]:
        return _fail("segment needs --out-dir")
    if merged["mode"] == "rgbd" and not merged["depth_dir"]:
        return _fail("rgbd mode needs --depth-dir (or use --mode rgb_only)")
    _echo_config("segment", merged, params)
    payload = {
        "algorithm": merged["algo"], "mode": merged["mode"],
        "rgb_dir": merged["rgb_dir"], "depth_dir": merged["depth_dir"],
        "out_dir": merged["out_dir"], "emit_masks": True,
        "seed": merged["seed"], "workers": merged["workers"],
        **_params_payload(params),
    }
    client = ServiceClient(args.server or merged.get("server"))
    try:
        status, body = client.post("/segment", payload)
    finally:
        client.close()
    if status != 200:
        return _fail(_service_error(body), EXIT_RUNTIME)
    summary = (
        f"frames = {body['frames']}\n"
        f"segment_seconds = {body['seconds']:.4f}\n"
        f"seconds_per_frame = {body['seconds_per_frame']:.6f}\n"
        f"fps = {body['fps']:.2f}"
    )
    print(summary)
    out_dir = Path(merged["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_stats.txt").write_text(summary + "\n")
    print(f"masks written to {body['mask_dir']}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    defaults = {
        "mask_dir": None, "gt_dir": None, "out_dir": None,
        "sequence": None, "algo": "-", "mode": "-",
    }
    merged, params = _merge_options(args, defaults)
    if not merged["mask_dir"]:
        return _fail("evaluate needs --mask-dir")
    if not merged["gt_dir"]:
        return _fail("evaluate needs --gt-dir")
    sequence = merged["sequence"] or Path(merged["mask_dir"]).name
    csv_path = None
    if merged["out_dir"]:
        out_dir = Path(merged["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = str(out_dir / "metrics.csv")
    _echo_config("evaluate", merged, params)
    payload = {
        "mask_dir": merged["mask_dir"], "gt_dir": merged["gt_dir"],
        "sequence": sequence, "algorithm": merged["algo"], "mode": merged["mode"],
        "csv_path": csv_path,
    }
    client = ServiceClient(args.server or merged.get("server"))
    try:
        status, body = client.post("/evaluate", payload)
    finally:
        client.close()
    if status != 200:
        return _fail(_service_error(body), EXIT_RUNTIME)
    print(body["table"])
    if csv_path:
        print(f"metrics written to {csv_path}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    env_workers = None
    try:
        import os

        if os.environ.get(WORKERS_ENV):
            env_workers = str(default_workers())
    except ConfigError:
        pass
    defaults = {
        "sizes": "480p/480p,720p/480p,720p/720p,1080p/720p",
        "algos": "gmm,pbas", "modes": "rgbd",
        "workers": env_workers or "1,4", "frames": 50, "seed": 0,
    }
    merged, params = _merge_options(args, defaults)
    _echo_config("bench", merged, params)

    def csv_list(value):
        return [item.strip() for item in str(value).split(",") if item.strip()]

    try:
        workers = [int(w) for w in csv_list(merged["workers"])]
    except ValueError:
        return _fail(f"--workers expects integers, got {merged['workers']!r}")
    payload = {
        "sizes": csv_list(merged["sizes"]),
        "algorithms": csv_list(merged["algos"]),
        "modes": csv_list(merged["modes"]),
        "workers": workers,
        "frames": merged["frames"], "seed": merged["seed"],
    }
    client = ServiceClient(args.server or merged.get("server"))
    try:
        status, body = client.post("/bench", payload)
    finally:
        client.close()
    if status != 200:
        return _fail(_service_error(body), EXIT_RUNTIME)
    print(body["table"])
    return EXIT_OK


def _cmd_synth(args) -> int:
    defaults = {
        "out_dir": None, "width": 160, "height": 120, "frames": 160,
        "entry_frame": 100, "object_w": 40, "object_h": 40, "speed": 4,
        "depth_offset": 80, "colour_offset": 90, "ramp_slope": 0.01,
        "shadow_strength": 0.55, "depth_format": "png",
    }
    merged, params = _merge_options(args, defaults)
    if args.scenario not in SCENARIOS:
        return _fail(
            f"unknown scenario {args.scenario!r}; valid scenarios: " + ", ".join(SCENARIOS)
        )
    if not merged["out_dir"]:
        return _fail("synth needs --out-dir")
    _echo_config("synth", {**merged, "scenario": args.scenario}, params)
    payload = {"scenario": args.scenario, **{k: v for k, v in merged.items() if k != "out_dir"},
               "out_dir": merged["out_dir"]}
    client = ServiceClient(args.server or merged.get("server"))
    try:
        status, body = client.post("/synth", payload)
    finally:
        client.close()
    if status != 200:
        return _fail(_service_error(body), EXIT_RUNTIME)
    print(f"wrote {body['frames_written']} frames:")
    for key in ("rgb_dir", "depth_dir", "gt_dir"):
        print(f"  {key} = {body[key]}")
    return EXIT_OK


_COMMANDS = {
    "segment": _cmd_segment,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
