"""Synthetic audio-visual scenes with exact ground truth.

One speaker moves along a polyline at constant speed, talks in on/off
segments and is filmed by a single pinhole camera while two circular arrays
on the table record it. Propagation is free field (optionally with one floor
reflection); delays are applied in the frequency domain so rendered
inter-microphone delays match the geometry to well under a sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError
from .geometry import CameraModel, MicArrayConfig, RoomModel
from .visual_cues import Frame

DEFAULT_IMAGE_SIZE = (288, 360)


def default_camera(image_size=DEFAULT_IMAGE_SIZE) -> CameraModel:
    """Corner camera looking across the table, 300 px focal length."""
    return CameraModel.look_at((0.2, 0.2, 2.0), (1.8, 4.1, 1.1), 300.0, image_size)


def default_mics() -> MicArrayConfig:
    """Two 8-mic circular arrays (10 cm radius) 0.8 m apart on the 0.8 m table; 120 pairs."""
    return MicArrayConfig.circular_arrays([(1.4, 4.1, 0.8), (2.2, 4.1, 0.8)], radius=0.1, count=8)


@dataclass
class SceneConfig:
    room: RoomModel = field(default_factory=RoomModel)
    cam: CameraModel = field(default_factory=default_camera)
    mics: MicArrayConfig = field(default_factory=default_mics)
    waypoints: np.ndarray = field(default_factory=lambda: np.array([[0.9, 2.6, 1.5], [2.7, 3.6, 1.4]]))
    speed: float = 0.5  # m/s; the path is walked back and forth
    speech: list[tuple[float, float]] | None = None  # on-segments (s); None = always talking
    snr_db: float = 10.0
    occlusion_region: tuple[int, int, int, int] | None = None  # (x0, y0, x1, y1) pixels, half-open
    occlusion_schedule: list[tuple[float, float]] | None = None  # None = whole clip
    duration: float = 8.0
    fps: float = 25.0
    sample_rate: float = 16000.0
    target_size: tuple[int, int] = (40, 32)  # (height, width) px
    n_distractors: int = 2
    frame_noise: float = 0.02
    reflection: float = 0.0  # floor reflection coefficient, 0 = anechoic
    glitches: list[tuple[float, float]] | None = None  # segments (s) where the camera delivers pure noise
    band: tuple[float, float] = (200.0, 6000.0)
    seed: int = 0

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 3)
        if self.duration <= 0 or self.fps <= 0 or self.sample_rate <= 0:
            raise ConfigurationError("duration, fps and sample rate must be positive")
        if self.cam.image_size[0] < self.target_size[0] or self.cam.image_size[1] < self.target_size[1]:
            raise ConfigurationError("target larger than the image")
        if not np.all(self.room.contains(self.waypoints)):
            raise ConfigurationError("trajectory leaves the room or dips below the table")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def image_size(self) -> tuple[int, int]:
        return self.cam.image_size

    def position(self, t) -> np.ndarray:
        """Source position(s) at time(s) ``t``: back-and-forth walk along the waypoints."""
        t = np.asarray(t, dtype=float)
        wp = self.waypoints
        if len(wp) == 1 or self.speed <= 0:
            return np.broadcast_to(wp[0], t.shape + (3,)).copy()
        seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        total = cum[-1]
        s = np.mod(t * self.speed, 2 * total)
        s = np.where(s > total, 2 * total - s, s)
        return np.stack([np.interp(s, cum, wp[:, a]) for a in range(3)], axis=-1)

    def speaking(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.speech is None:
            return np.ones(t.shape, dtype=bool)
        on = np.zeros(t.shape, dtype=bool)
        for a, b in self.speech:
            on |= (t >= a) & (t < b)
        return on

    def glitching(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        on = np.zeros(t.shape, dtype=bool)
        for a, b in self.glitches or ():
            on |= (t >= a) & (t < b)
        return on

    def occlusion_active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.occlusion_region is None:
            return np.zeros(t.shape, dtype=bool)
        if self.occlusion_schedule is None:
            return np.ones(t.shape, dtype=bool)
        on = np.zeros(t.shape, dtype=bool)
        for a, b in self.occlusion_schedule:
            on |= (t >= a) & (t < b)
        return on


@dataclass(frozen=True)
class SceneTruth:
    positions_3d: np.ndarray  # (T, 3)
    positions_2d: np.ndarray  # (T, 2) pixel (x, y)
    speaking: np.ndarray  # (T,)
    occluded: np.ndarray  # (T,)
    times: np.ndarray  # (T,) seconds
    bbox_size: tuple[int, int]  # (height, width)
    glitched: np.ndarray | None = None  # (T,) camera delivered noise only

    @property
    def occlusion_rate(self) -> float:
        return 100.0 * float(np.mean(self.occluded))


def middle_third_region(image_size) -> tuple[int, int, int, int]:
    """Full-height band over the middle third of the columns."""
    H, W = image_size
    return (W // 3, 0, W - W // 3, H)


def speech_gate(cfg: SceneConfig, ramp_s: float = 0.005) -> np.ndarray:
    """Sample-rate on/off envelope with short raised-cosine ramps inside each on-segment."""
    n = cfg.n_samples
    if cfg.speech is None:
        return np.ones(n)
    sr = cfg.sample_rate
    gate = np.zeros(n)
    ramp = max(1, int(round(ramp_s * sr)))
    for a, b in cfg.speech:
        i0, i1 = int(round(a * sr)), min(n, int(round(b * sr)))
        if i1 <= i0:
            continue
        seg = np.ones(i1 - i0)
        r = min(ramp, len(seg) // 2)
        if r > 0:
            up = 0.5 - 0.5 * np.cos(np.pi * (np.arange(r) + 0.5) / r)
            seg[:r] = up
            seg[-r:] = up[::-1]
        gate[i0:i1] = np.maximum(gate[i0:i1], seg)
    return gate


def source_signal(n: int, sample_rate: float, band, rng: np.random.Generator) -> np.ndarray:
    """Unit-power band-limited noise with a 1/f power tilt."""
    spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    lo, hi = band
    shape = np.where((f >= lo) & (f <= hi), 1.0 / np.sqrt(np.maximum(f, lo)), 0.0)
    x = np.fft.irfft(spec * shape, n=n)
    return x / np.std(x)


def _tukey_edges(n: int, taper: int) -> np.ndarray:
    w = np.ones(n)
    if taper > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(taper) + 0.5) / taper)
        w[:taper] = ramp
        w[-taper:] = ramp[::-1]
    return w


def propagate(src: np.ndarray, margin: int, positions_fn, mics: np.ndarray, c: float, sample_rate: float,
              n: int, reflection: float = 0.0, block: int = 512) -> np.ndarray:
    """Render ``src`` at each microphone with exact fractional delays.

    ``src`` holds ``n + 2*margin`` samples; output sample ``j`` corresponds to
    ``src[margin + j]``. The source position is evaluated at each block center
    and blocks are overlap-added with a periodic Hann window (hop ``block/2``),
    so a static source gives a pure delay. Amplitude falls off as 1/r.
    """
    hop = block // 2
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(block) / block)
    pad = margin
    fft_len = block + 2 * pad
    freqs = np.fft.rfftfreq(fft_len, 1.0 / sample_rate)
    taper = _tukey_edges(fft_len, max(1, pad // 4))
    out = np.zeros((len(mics), n + 2 * block))
    for start in range(-hop, n, hop):
        center_t = (start + block / 2) / sample_rate
        p = positions_fn(center_t)
        sources = [(p, 1.0)]
        if reflection > 0:
            sources.append((p * np.array([1.0, 1.0, -1.0]), reflection))
        lo = start + margin - pad
        seg = src[max(lo, 0):lo + fft_len]
        if lo < 0:
            seg = np.concatenate([np.zeros(-lo), seg])
        seg = np.pad(seg, (0, fft_len - len(seg)))
        S = np.fft.rfft(seg * taper)
        acc = np.zeros((len(mics), len(freqs)), dtype=complex)
        for pos, gain in sources:
            r = np.linalg.norm(mics - pos, axis=1)
            delay = r / c
            acc += (gain / r)[:, None] * np.exp(-2j * np.pi * np.outer(delay, freqs))
        blk = np.fft.irfft(acc * S, n=fft_len)[:, pad:pad + block]
        o0 = start + hop  # shift so index 0 of ``out`` is sample -hop
        out[:, o0:o0 + block] += blk * win
    return out[:, hop:hop + n]


def synth_audio(cfg: SceneConfig) -> np.ndarray:
    """Microphone signals ``(n_mics, n_samples)``.

    The speech gate is applied at the receivers (same instant on every mic) so
    silent segments are exactly zero when the SNR is infinite. White noise is
    added per mic at ``snr_db`` relative to the mean active signal power.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    n = cfg.n_samples
    c = cfg.mics.speed_of_sound
    mics = cfg.mics.mic_positions
    max_range = max(np.linalg.norm(np.array(cfg.room.extent)[:, 1] - np.array(cfg.room.extent)[:, 0]) * 2, 1.0)
    margin = int(np.ceil(max_range / c * cfg.sample_rate)) + 512
    src = source_signal(n + 2 * margin, cfg.sample_rate, cfg.band, rng)
    x = propagate(src, margin, cfg.position, mics, c, cfg.sample_rate, n, cfg.reflection)
    gate = speech_gate(cfg)
    x *= gate
    if np.isfinite(cfg.snr_db):
        active = gate > 0.5
        power = np.mean(x[:, active] ** 2) if active.any() else np.mean(
            propagate(src, margin, cfg.position, mics, c, cfg.sample_rate, n, cfg.reflection) ** 2)
        sigma = np.sqrt(power / 10 ** (cfg.snr_db / 10.0))
        x = x + sigma * rng.standard_normal(x.shape)
    return x


def background_texture(image_size, rng: np.random.Generator) -> np.ndarray:
    H, W = image_size
    coarse = gaussian_filter(rng.standard_normal((H, W)), 12.0)
    fine = gaussian_filter(rng.standard_normal((H, W)), 2.0)
    img = coarse / (coarse.std() + 1e-12) * 0.12 + fine / (fine.std() + 1e-12) * 0.05 + 0.5
    return np.clip(img, 0.0, 1.0)


def target_texture(size, rng: np.random.Generator) -> np.ndarray:
    """High-contrast blob pattern with a dark elliptical rim, so the target stands out."""
    h, w = size
    tex = gaussian_filter(rng.standard_normal((h, w)), 1.5)
    tex = 0.5 + 0.35 * tex / (np.abs(tex).max() + 1e-12)
    yy, xx = np.mgrid[0:h, 0:w]
    ell = ((yy - (h - 1) / 2) / (h / 2)) ** 2 + ((xx - (w - 1) / 2) / (w / 2)) ** 2
    tex[(ell > 0.75) & (ell <= 1.0)] = 0.1
    return np.clip(tex, 0.0, 1.0)


def paste(img: np.ndarray, patch: np.ndarray, center_xy) -> None:
    """Paste ``patch`` centered at the rounded pixel ``center_xy``, clipped to the image."""
    H, W = img.shape
    h, w = patch.shape
    cx, cy = int(round(center_xy[0])), int(round(center_xy[1]))
    x0, y0 = cx - (w - 1) // 2, cy - (h - 1) // 2
    xs, ys = max(0, x0), max(0, y0)
    xe, ye = min(W, x0 + w), min(H, y0 + h)
    if xe <= xs or ye <= ys:
        return
    img[ys:ye, xs:xe] = patch[ys - y0:ye - y0, xs - x0:xe - x0]


def scene_truth(cfg: SceneConfig) -> SceneTruth:
    times = np.arange(cfg.n_frames) / cfg.fps
    p3 = cfg.position(times)
    p2, _ = cfg.cam.project(p3)
    occluded = np.zeros(len(times), dtype=bool)
    if cfg.occlusion_region is not None:
        x0, y0, x1, y1 = cfg.occlusion_region
        inside = (p2[:, 0] >= x0) & (p2[:, 0] < x1) & (p2[:, 1] >= y0) & (p2[:, 1] < y1)
        occluded = inside & cfg.occlusion_active(times)
    return SceneTruth(p3, p2, cfg.speaking(times), occluded, times, tuple(cfg.target_size), cfg.glitching(times))


def synth_frames(cfg: SceneConfig) -> tuple[list[Frame], SceneTruth]:
    """Rendered grayscale frames and ground truth."""
    rng = np.random.default_rng([cfg.seed, 2])
    H, W = cfg.image_size
    truth = scene_truth(cfg)
    bg = background_texture((H, W), rng)
    target = target_texture(cfg.target_size, rng)
    distractors = []
    for _ in range(cfg.n_distractors):
        tex = target_texture(cfg.target_size, rng)
        pos = np.array([rng.uniform(20, W - 20), rng.uniform(20, H - 20)])
        distractors.append((tex, pos))
    for tex, pos in distractors:
        paste(bg, tex, pos)
    frames = []
    for f, t in enumerate(truth.times):
        if truth.glitched[f]:
            # per-frame streams, so adding a glitch leaves every other frame unchanged
            frames.append(Frame(np.random.default_rng([cfg.seed, 3, f]).random((H, W)), f))
            continue
        img = bg.copy()
        paste(img, target, truth.positions_2d[f])
        mask = None
        if cfg.occlusion_region is not None and cfg.occlusion_active(t):
            x0, y0, x1, y1 = cfg.occlusion_region
            mask = np.zeros((H, W), dtype=bool)
            mask[y0:y1, x0:x1] = True
            img[mask] = 0.0
        if cfg.frame_noise > 0:
            img = img + cfg.frame_noise * np.random.default_rng([cfg.seed, 4, f]).standard_normal(img.shape)
        frames.append(Frame(np.clip(img, 0.0, 1.0), f, mask))
    return frames, truth
