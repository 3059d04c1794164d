"""File formats: binary tensors and parameters, cue sources, scene directories, trajectories.

Binary files are little-endian with a short magic + version header.

tensor (``.mpt``)::

    b"MPTT" | u16 version | u8 dtype code | u8 ndim | u64 shape[ndim] | data

parameters (``.mptp``)::

    b"MPTP" | u32 version | u32 C | u32 hidden | f64 w1, b1, w2, b2, shift, scale

A scene directory holds ``audio.wav`` (one float32 channel per microphone),
``frames/000000.png`` ... (16-bit grayscale), ``truth.csv`` (optional) and
``scene.yaml`` with calibration, rates and the first-frame box.
"""

from __future__ import annotations

import csv
import io as _io
import json
import struct
from pathlib import Path

import numpy as np
import yaml
from PIL import Image
from scipy.io import wavfile

from .audio_cues import SgcfSequence
from .errors import ConfigurationError, InputError
from .geometry import CameraModel, MicArrayConfig, RoomModel
from .perception import PerceptionParams
from .pipeline import CueSources, Scene
from .simulator import SceneTruth
from .tracker import Trajectory
from .visual_cues import Frame

TENSOR_MAGIC = b"MPTT"
TENSOR_VERSION = 1
PARAMS_MAGIC = b"MPTP"
PARAMS_VERSION = 1
_DTYPES = {0: "<f8", 1: "<f4", 2: "<i8", 3: "|u1", 4: "|b1"}
_CODES = {np.dtype(v).str: k for k, v in _DTYPES.items()}


def tensor_bytes(arr) -> bytes:
    a = np.asarray(arr)
    dt = a.dtype.newbyteorder("<") if a.dtype.byteorder == ">" else a.dtype
    code = _CODES.get(np.dtype(dt).str)
    if code is None:
        raise InputError(f"unsupported tensor dtype {a.dtype}")
    a = np.array(a, dtype=_DTYPES[code], order="C")  # keeps 0-d shapes, unlike ascontiguousarray
    header = TENSOR_MAGIC + struct.pack("<HBB", TENSOR_VERSION, code, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + a.tobytes()


def tensor_from_bytes(blob: bytes) -> np.ndarray:
    if blob[:4] != TENSOR_MAGIC:
        raise InputError("not a tensor file (bad magic)")
    version, code, ndim = struct.unpack_from("<HBB", blob, 4)
    if version != TENSOR_VERSION:
        raise InputError(f"unsupported tensor version {version}")
    if code not in _DTYPES:
        raise InputError(f"unknown dtype code {code}")
    shape = struct.unpack_from(f"<{ndim}Q", blob, 8)
    start = 8 + 8 * ndim
    dt = np.dtype(_DTYPES[code])
    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) - start != count * dt.itemsize:
        raise InputError("tensor payload size does not match its header")
    return np.frombuffer(blob, dtype=dt, count=count, offset=start).reshape(shape).copy()


def write_tensor(path, arr) -> None:
    Path(path).write_bytes(tensor_bytes(arr))


def read_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


# --- attention parameters ---------------------------------------------------

def params_bytes(p: PerceptionParams) -> bytes:
    head = PARAMS_MAGIC + struct.pack("<III", PARAMS_VERSION, p.n_channels, p.hidden)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (*p.arrays(), p.shift, p.scale))
    return head + body


def params_from_bytes(blob: bytes) -> PerceptionParams:
    if blob[:4] != PARAMS_MAGIC:
        raise InputError("not a parameter file (bad magic)")
    version, C, hid = struct.unpack_from("<III", blob, 4)
    if version != PARAMS_VERSION:
        raise InputError(f"unsupported parameter file version {version}")
    shapes = [(hid, C), (hid,), (C, hid), (C,), (2, C), (2, C)]
    sizes = [int(np.prod(s)) for s in shapes]
    if len(blob) - 16 != 8 * sum(sizes):
        raise InputError("parameter payload size does not match its header")
    flat = np.frombuffer(blob, dtype="<f8", offset=16)
    parts, pos = [], 0
    for shape, n in zip(shapes, sizes):
        parts.append(flat[pos:pos + n].reshape(shape).astype(float))
        pos += n
    return PerceptionParams(*parts)


def save_params(path, p: PerceptionParams) -> None:
    Path(path).write_bytes(params_bytes(p))


def load_params(path) -> PerceptionParams:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"parameter file not found: {path}")
    return params_from_bytes(path.read_bytes())


def write_loss_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(history):
            w.writerow([i, repr(float(v))])


def read_loss_history(path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(row["loss"]) for row in csv.DictReader(fh)]


# --- cue sources --------------------------------------------------------------

def save_cue_sources(directory, src: CueSources) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(d / "sgcf_maps.mpt", src.sgcf.raw_maps)
    write_tensor(d / "sgcf_kmax.mpt", src.sgcf.k_max.astype(np.int64))
    write_tensor(d / "sgcf_peaks.mpt", src.sgcf.peak_values)
    write_tensor(d / "audio_index.mpt", src.audio_index.astype(np.int64))
    write_tensor(d / "visual.mpt", src.visual.astype(np.float32))
    write_tensor(d / "visual_peaks.mpt", src.visual_raw_peaks)
    (d / "cues.json").write_text(json.dumps({"m1": src.m1, "m2": src.m2}) + "\n")


def load_cue_sources(directory) -> CueSources:
    d = Path(directory)
    meta_path = d / "cues.json"
    if not meta_path.is_file():
        raise InputError(f"no cue sources in {d}")
    meta = json.loads(meta_path.read_text())
    sg = SgcfSequence(read_tensor(d / "sgcf_maps.mpt"), read_tensor(d / "sgcf_kmax.mpt"),
                      read_tensor(d / "sgcf_peaks.mpt"))
    return CueSources(sg, read_tensor(d / "audio_index.mpt"), read_tensor(d / "visual.mpt"),
                      read_tensor(d / "visual_peaks.mpt"), int(meta["m1"]), int(meta["m2"]))


# --- scene directories ----------------------------------------------------------

TRUTH_FIELDS = ["frame", "time", "x", "y", "X", "Y", "Z", "speaking", "occluded"]


def _scene_meta(scene: Scene) -> dict:
    cam, mics, room = scene.cam, scene.mics, scene.room
    return {
        "sample_rate": float(scene.sample_rate),
        "fps": float(scene.fps),
        "n_frames": scene.n_frames,
        "bbox": [float(v) for v in scene.bbox],
        "camera": {
            "intrinsics": cam.intrinsics.tolist(),
            "rotation": cam.rotation.tolist(),
            "translation": cam.translation.tolist(),
            "image_size": list(cam.image_size),
        },
        "mics": {
            "positions": mics.mic_positions.tolist(),
            "pairs": [list(p) for p in mics.pairs],
            "speed_of_sound": float(mics.speed_of_sound),
        },
        "room": {"extent": [list(e) for e in room.extent], "table_height": float(room.table_height)},
    }


def write_scene(directory, scene: Scene, extra: dict | None = None) -> Path:
    """Write ``scene`` in the scene-directory layout; ``extra`` is echoed into scene.yaml."""
    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    wavfile.write(d / "audio.wav", int(round(scene.sample_rate)), np.ascontiguousarray(scene.audio.T, dtype=np.float32))
    for f in scene.frames:
        px = np.round(np.clip(f.pixels, 0.0, 1.0) * 65535.0).astype(np.uint16)
        Image.fromarray(px).save(d / "frames" / f"{f.index:06d}.png")
    meta = _scene_meta(scene)
    if extra:
        meta["config"] = extra
    (d / "scene.yaml").write_text(yaml.safe_dump(meta, sort_keys=False))
    if scene.truth is not None:
        tr = scene.truth
        with open(d / "truth.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRUTH_FIELDS)
            for i in range(len(tr.times)):
                w.writerow([i, repr(float(tr.times[i])), repr(float(tr.positions_2d[i, 0])),
                            repr(float(tr.positions_2d[i, 1])), *(repr(float(v)) for v in tr.positions_3d[i]),
                            int(tr.speaking[i]), int(tr.occluded[i])])
    return d


def _require(meta: dict, key: str, where: str):
    if key not in meta:
        raise ConfigurationError(f"{where}: missing field {key!r}")
    return meta[key]


def read_truth(path, bbox_size) -> SceneTruth:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"{path}: empty truth table")
    missing = [k for k in TRUTH_FIELDS if k not in rows[0]]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    col = lambda k, t=float: np.array([t(r[k]) for r in rows])  # noqa: E731
    return SceneTruth(np.stack([col("X"), col("Y"), col("Z")], axis=1), np.stack([col("x"), col("y")], axis=1),
                      col("speaking", int).astype(bool), col("occluded", int).astype(bool), col("time"),
                      tuple(bbox_size))


def read_scene(directory) -> Scene:
    """Load a scene directory (simulated or recorded data in the same layout)."""
    d = Path(directory)
    meta_path = d / "scene.yaml"
    if not meta_path.is_file():
        raise InputError(f"{d}: no scene.yaml")
    meta = yaml.safe_load(meta_path.read_text()) or {}
    where = str(meta_path)
    cm = _require(meta, "camera", where)
    cam = CameraModel(np.array(_require(cm, "intrinsics", where + ":camera")),
                      np.array(_require(cm, "rotation", where + ":camera")),
                      np.array(_require(cm, "translation", where + ":camera")),
                      tuple(_require(cm, "image_size", where + ":camera")))
    mm = _require(meta, "mics", where)
    mics = MicArrayConfig(np.array(_require(mm, "positions", where + ":mics")),
                          tuple(tuple(p) for p in _require(mm, "pairs", where + ":mics")),
                          float(mm.get("speed_of_sound", 343.0)))
    rm = meta.get("room", {})
    room = RoomModel(tuple(tuple(e) for e in rm.get("extent", RoomModel().extent)),
                     float(rm.get("table_height", RoomModel().table_height)))
    audio_path = d / "audio.wav"
    if not audio_path.is_file():
        raise InputError(f"{d}: no audio.wav")
    sr, audio = wavfile.read(audio_path)
    audio = np.asarray(audio, dtype=float)
    audio = audio[:, None] if audio.ndim == 1 else audio
    if audio.shape[1] != mics.n_mics:
        raise InputError(f"{audio_path}: {audio.shape[1]} channels but {mics.n_mics} microphones in scene.yaml")
    paths = sorted((d / "frames").glob("*.png"))
    if not paths:
        raise InputError(f"{d}: no frames/*.png")
    frames = []
    for i, p in enumerate(paths):
        with Image.open(p) as im:
            arr = np.asarray(im)
        scale = 65535.0 if arr.dtype == np.uint16 or arr.max() > 255 else 255.0
        if arr.ndim == 3:
            arr = arr[..., :3].mean(axis=2)
        frames.append(Frame(arr.astype(float) / scale, i))
    if frames[0].size != cam.image_size:
        raise InputError(f"frames are {frames[0].size} but the camera image size is {cam.image_size}")
    bbox = tuple(float(v) for v in _require(meta, "bbox", where))
    truth = read_truth(d / "truth.csv", (int(round(bbox[3])), int(round(bbox[2])))) if (d / "truth.csv").is_file() else None
    return Scene(audio.T.copy(), float(sr), frames, float(_require(meta, "fps", where)), bbox, cam, mics, room, truth)


# --- trajectories -----------------------------------------------------------------

def trajectory_rows(traj: Trajectory) -> list[dict]:
    return [{"frame": t, "x": float(s.estimate[0]), "y": float(s.estimate[1]), "peak": float(s.peak_value),
             "ess": float(s.ess)} for t, s in enumerate(traj.states)]


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "x", "y", "peak", "ess"])
        for r in trajectory_rows(traj):
            w.writerow([r["frame"], f"{r['x']:.6f}", f"{r['y']:.6f}", f"{r['peak']:.6f}", f"{r['ess']:.6f}"])


def write_trajectory_jsonl(path, traj: Trajectory) -> None:
    buf = _io.StringIO()
    for r, s, a in zip(trajectory_rows(traj), traj.states, traj.alphas):
        r.update({"peak_xy": [float(v) for v in s.peak], "resampled": bool(s.resampled),
                  "uninformative": bool(s.uninformative), "alpha": [round(float(v), 9) for v in a]})
        buf.write(json.dumps(r) + "\n")
    Path(path).write_text(buf.getvalue())


def read_trajectory_csv(path) -> np.ndarray:
    """``(T, 2)`` estimates from a trajectory CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
