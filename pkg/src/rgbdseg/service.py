"""FastAPI service exposing the segmentation pipeline.

Batch endpoints (/segment, /evaluate, /bench, /synth) mirror the CLI
commands and operate on directories the service can reach. The /sessions
endpoints expose the engine as a long-running stream: create a session,
push PNG-encoded frames one at a time, receive the mask for each. Per-pixel
model state lives inside the session between calls.

Run it with `uvicorn rgbdseg.service:app` (or `python -m rgbdseg.service`).
"""

from __future__ import annotations

import base64
import io
import threading
import uuid
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image
from pydantic import BaseModel, Field

from . import bench as bench_mod
from . import frames as frame_io
from . import metrics as metrics_mod
from . import synth as synth_mod
from .config import PipelineConfig
from .engine import SegmentationEngine, process_sequence
from .errors import RgbdSegError
from .gmm import GmmParams
from .pbas import PbasParams

Algorithm = Literal["gmm", "pbas"]
Mode = Literal["rgb_only", "rgbd"]


class GmmParamsModel(BaseModel):
    k_rgb: int = 7
    k_d: int = 3
    alpha: float = 0.001
    s: float = 10000.0
    tau: float = 1.0
    match_lambda: float = 2.5
    var_init: float = 225.0
    w_init: float = 0.05

    def to_params(self) -> GmmParams:
        return GmmParams(**self.model_dump())


class PbasParamsModel(BaseModel):
    n: int = 20
    min_matches: int = 2
    r_init: float = 18.0
    r_lower: float = 18.0
    r_scale: float = 5.0
    r_inc_dec: float = 0.05
    t_init: float = 18.0
    t_lower: float = 2.0
    t_upper: float = 200.0
    t_inc: float = 1.0
    t_dec: float = 0.05

    def to_params(self) -> PbasParams:
        return PbasParams(**self.model_dump())


class SegmentRequest(BaseModel):
    algorithm: Algorithm = "gmm"
    mode: Mode = "rgbd"
    rgb_dir: str
    depth_dir: Optional[str] = None
    out_dir: Optional[str] = None
    emit_masks: bool = True
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    gmm: GmmParamsModel = Field(default_factory=GmmParamsModel)
    pbas: PbasParamsModel = Field(default_factory=PbasParamsModel)


class SegmentResponse(BaseModel):
    frames: int
    seconds: float
    seconds_per_frame: float
    fps: float
    mask_dir: Optional[str] = None


class MetricsRowModel(BaseModel):
    sequence: str
    algorithm: str
    mode: str
    pwc: Optional[float]
    fnr: Optional[float]
    fpr: Optional[float]
    si: Optional[float]
    tp: int
    tn: int
    fp: int
    fn: int


class EvaluateRequest(BaseModel):
    mask_dir: str
    gt_dir: str
    sequence: str = "-"
    algorithm: str = "-"
    mode: str = "-"
    csv_path: Optional[str] = None


class EvaluateResponse(BaseModel):
    row: MetricsRowModel
    table: str
    csv_path: Optional[str] = None


class BenchRequest(BaseModel):
    sizes: list[str] = Field(default_factory=lambda: list(bench_mod.DEFAULT_SIZES))
    algorithms: list[Algorithm] = Field(default_factory=lambda: ["gmm", "pbas"])
    modes: list[Mode] = Field(default_factory=lambda: ["rgbd"])
    workers: list[int] = Field(default_factory=lambda: [1, 4])
    frames: int = Field(default=50, ge=1)
    seed: int = 0


class BenchRowModel(BaseModel):
    size: str
    algorithm: str
    mode: str
    workers: int
    frames: int
    seconds: float
    fps: float


class BenchResponse(BaseModel):
    rows: list[BenchRowModel]
    table: str


class SynthRequest(BaseModel):
    scenario: str
    out_dir: str
    width: int = 160
    height: int = 120
    frames: int = 160
    entry_frame: int = 100
    object_w: int = 40
    object_h: int = 40
    speed: int = 4
    depth_offset: int = 80
    colour_offset: int = 90
    ramp_slope: float = 0.01
    shadow_strength: float = 0.55
    depth_format: Literal["png", "pgm"] = "png"


class SynthResponse(BaseModel):
    frames_written: int
    rgb_dir: str
    depth_dir: str
    gt_dir: str


class SessionCreateRequest(BaseModel):
    algorithm: Algorithm = "gmm"
    mode: Mode = "rgbd"
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    gmm: GmmParamsModel = Field(default_factory=GmmParamsModel)
    pbas: PbasParamsModel = Field(default_factory=PbasParamsModel)


class SessionInfo(BaseModel):
    session_id: str
    algorithm: str
    mode: str
    width: int
    height: int
    frames_processed: int


class FramePushRequest(BaseModel):
    rgb_png: str                      # base64-encoded 8-bit RGB PNG
    depth_png: Optional[str] = None   # base64-encoded 16-bit depth PNG


class FramePushResponse(BaseModel):
    frame_index: int
    mask_png: str                     # base64-encoded 0/255 mask PNG
    foreground_pixels: int


def _bad_request(field: str, message: str) -> HTTPException:
    return HTTPException(status_code=400, detail={"field": field, "message": message})


def _require_dir(field: str, value: str) -> Path:
    path = Path(value)
    if not path.is_dir():
        raise _bad_request(field, f"directory not found: {value}")
    return path


def _build_config(req, emit_masks: bool, out_dir) -> PipelineConfig:
    return PipelineConfig(
        algorithm=req.algorithm,
        mode=req.mode,
        gmm=req.gmm.to_params(),
        pbas=req.pbas.to_params(),
        seed=req.seed,
        workers=req.workers,
        emit_masks=emit_masks,
        out_dir=out_dir,
    )


class _Session:
    def __init__(self, req: SessionCreateRequest):
        config = _build_config(req, emit_masks=False, out_dir=None)
        self.config = config
        self.engine = SegmentationEngine(config, req.width, req.height)
        self.lock = threading.Lock()


def _decode_png_b64(field: str, payload: str):
    try:
        raw = base64.b64decode(payload, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise _bad_request(field, f"not a decodable base64 PNG: {exc}")
    return img


def _encode_mask_b64(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(mask, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app() -> FastAPI:
    app = FastAPI(title="rgbdseg", description="RGB-D foreground segmentation service")
    sessions: dict[str, _Session] = {}
    sessions_lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/segment", response_model=SegmentResponse)
    def segment(req: SegmentRequest):
        rgb_dir = _require_dir("rgb_dir", req.rgb_dir)
        depth_dir = None
        if req.mode == "rgbd":
            if req.depth_dir is None:
                raise _bad_request("depth_dir", "rgbd mode needs a depth directory")
            depth_dir = _require_dir("depth_dir", req.depth_dir)
        out_dir = None
        if req.emit_masks:
            if req.out_dir is None:
                raise _bad_request("out_dir", "emit_masks needs an output directory")
            out_dir = Path(req.out_dir)
        try:
            source = frame_io.SequenceSource.discover(rgb_dir, depth_dir)
            config = _build_config(req, emit_masks=req.emit_masks, out_dir=out_dir)
            stats = process_sequence(source, config)
        except RgbdSegError as exc:
            raise _bad_request("rgb_dir", str(exc))
        return SegmentResponse(
            frames=stats.frames_processed,
            seconds=stats.seconds,
            seconds_per_frame=stats.seconds_per_frame,
            fps=stats.fps,
            mask_dir=str(out_dir) if out_dir is not None else None,
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        mask_dir = _require_dir("mask_dir", req.mask_dir)
        gt_dir = _require_dir("gt_dir", req.gt_dir)
        masks = {p.stem: p for p in sorted(mask_dir.glob("*.png"))}
        gts = {p.stem: p for p in sorted(gt_dir.glob("*.png"))}
        if not masks:
            raise _bad_request("mask_dir", f"no .png masks in {mask_dir}")
        if set(masks) != set(gts):
            raise _bad_request(
                "mask_dir",
                f"mask/ground-truth stems differ: {len(masks)} masks vs {len(gts)} gt frames",
            )
        counts = []
        try:
            for stem in sorted(masks):
                mask = frame_io.load_mask(masks[stem])
                gt = frame_io.load_ground_truth(gts[stem])
                counts.append(metrics_mod.compare_masks(mask, gt))
        except RgbdSegError as exc:
            raise _bad_request("mask_dir", str(exc))
        report = metrics_mod.aggregate_sequence(counts)
        row = metrics_mod.ReportRow(req.sequence, req.algorithm, req.mode, report)
        csv_path = None
        if req.csv_path:
            csv_path = req.csv_path
            metrics_mod.write_report_csv(csv_path, [row])
        c = report.counts
        return EvaluateResponse(
            row=MetricsRowModel(
                sequence=req.sequence, algorithm=req.algorithm, mode=req.mode,
                pwc=report.pwc, fnr=report.fnr, fpr=report.fpr, si=report.si,
                tp=c.tp, tn=c.tn, fp=c.fp, fn=c.fn,
            ),
            table=metrics_mod.format_report_table([row]),
            csv_path=csv_path,
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        try:
            results = bench_mod.run_benchmark(
                req.sizes, req.algorithms, req.modes, req.workers, req.frames, req.seed
            )
        except RgbdSegError as exc:
            raise _bad_request("sizes", str(exc))
        rows = [
            BenchRowModel(
                size=r.size, algorithm=r.algorithm, mode=r.mode, workers=r.workers,
                frames=r.frames, seconds=r.seconds, fps=r.fps,
            )
            for r in results
        ]
        return BenchResponse(rows=rows, table=bench_mod.format_bench_table(results))

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        spec = synth_mod.SynthSpec(
            scenario=req.scenario, width=req.width, height=req.height,
            frames=req.frames, entry_frame=req.entry_frame,
            object_w=req.object_w, object_h=req.object_h, speed=req.speed,
            depth_offset=req.depth_offset, colour_offset=req.colour_offset,
            ramp_slope=req.ramp_slope, shadow_strength=req.shadow_strength,
        )
        try:
            dirs = synth_mod.write_sequence(spec, req.out_dir, req.depth_format)
        except RgbdSegError as exc:
            raise _bad_request("scenario", str(exc))
        return SynthResponse(
            frames_written=dirs["frames"],
            rgb_dir=str(dirs["rgb"]), depth_dir=str(dirs["depth"]), gt_dir=str(dirs["gt"]),
        )

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: SessionCreateRequest):
        try:
            session = _Session(req)
        except RgbdSegError as exc:
            raise _bad_request("width", str(exc))
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = session
        return _session_info(session_id, session)

    def _get_session(session_id: str) -> _Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def _session_info(session_id: str, session: _Session) -> SessionInfo:
        return SessionInfo(
            session_id=session_id,
            algorithm=session.config.algorithm,
            mode=session.config.mode,
            width=session.engine.width,
            height=session.engine.height,
            frames_processed=session.engine.frame_idx,
        )

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def session_info(session_id: str):
        return _session_info(session_id, _get_session(session_id))

    @app.post("/sessions/{session_id}/frames", response_model=FramePushResponse)
    def push_frame(session_id: str, req: FramePushRequest):
        session = _get_session(session_id)
        img = _decode_png_b64("rgb_png", req.rgb_png)
        if img.mode != "RGB":
            img = img.convert("RGB")
        rgb = np.asarray(img, dtype=np.uint8)
        engine = session.engine
        if rgb.shape[:2] != (engine.height, engine.width):
            raise _bad_request(
                "rgb_png",
                f"frame is {rgb.shape[1]}x{rgb.shape[0]}, session expects "
                f"{engine.width}x{engine.height}",
            )
        if session.config.mode == "rgbd" and req.depth_png is not None:
            dimg = _decode_png_b64("depth_png", req.depth_png)
            if dimg.mode not in ("I;16", "I;16B", "I;16L", "I"):
                raise _bad_request("depth_png", f"need a 16-bit depth PNG, got {dimg.mode!r}")
            depth16 = np.asarray(dimg)
            if depth16.dtype != np.uint16:
                depth16 = depth16.astype(np.uint16)
            if depth16.shape != rgb.shape[:2]:
                depth16 = frame_io.resample_depth(depth16, rgb.shape[1], rgb.shape[0])
            frame = frame_io.pack_frame(rgb, depth16)
        else:
            frame = np.zeros(rgb.shape[:2] + (4,), dtype=np.uint8)
            frame[:, :, :3] = rgb
        with session.lock:
            index = engine.frame_idx
            mask = engine.process_frame(frame)
        return FramePushResponse(
            frame_index=index,
            mask_png=_encode_mask_b64(mask),
            foreground_pixels=int(np.count_nonzero(mask)),
        )

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with sessions_lock:
            session = sessions.pop(session_id, None)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        session.engine.close()
        return {"deleted": session_id}

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("rgbdseg.service:app", host="127.0.0.1", port=8000)
