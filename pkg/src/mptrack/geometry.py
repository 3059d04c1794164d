"""Camera, microphone and room geometry.

World frame: origin at a room corner, z pointing up, meters. Camera frame
follows the usual computer-vision convention (x right, y down, z along the
optical axis), so a pixel is ``(u, v) = (column, row)``.

Depth always means camera-frame z, i.e. the distance along the optical axis,
not the Euclidean range to the optical center.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, InputError

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class CameraModel:
    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_size: tuple[int, int]  # (H, W)

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=float).reshape(3, 3)
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ConfigurationError("camera rotation is not orthonormal")
        if abs(np.linalg.det(K)) < 1e-12:
            raise ConfigurationError("camera intrinsics are not invertible")
        H, W = self.image_size
        if H < 2 or W < 2:
            raise ConfigurationError(f"image size {self.image_size} too small")
        # identity-intrinsics cameras are allowed for algebraic tests
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ConfigurationError("focal lengths must be positive")

    @classmethod
    def look_at(cls, position, target, focal, image_size, principal=None, up=(0.0, 0.0, 1.0)):
        """Build a camera at ``position`` whose optical axis passes through ``target``."""
        position = np.asarray(position, dtype=float)
        forward = np.asarray(target, dtype=float) - position
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        if np.linalg.norm(right) < 1e-9:
            raise ConfigurationError("optical axis is parallel to the up vector")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        H, W = image_size
        fx, fy = (focal, focal) if np.isscalar(focal) else focal
        cx, cy = principal if principal is not None else ((W - 1) / 2.0, (H - 1) / 2.0)
        K = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        return cls(K, R, -R @ position, (H, W))

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def project(self, points):
        """World points ``(..., 3)`` to pixels ``(..., 2)``; also returns camera-frame depth."""
        pc = self.to_camera(points)
        uvw = pc @ self.intrinsics.T
        return uvw[..., :2] / uvw[..., 2:3], pc[..., 2]

    def in_image(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        H, W = self.image_size
        return (uv[..., 0] >= 0) & (uv[..., 0] <= W - 1) & (uv[..., 1] >= 0) & (uv[..., 1] <= H - 1)


@dataclass(frozen=True)
class MicArrayConfig:
    mic_positions: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        mics = np.asarray(self.mic_positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "mic_positions", mics)
        pairs = tuple((int(i), int(k)) for i, k in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        n = len(mics)
        for i, k in pairs:
            if i == k or not (0 <= i < n and 0 <= k < n):
                raise ConfigurationError(f"invalid microphone pair ({i}, {k}) for {n} mics")
        if not pairs:
            raise ConfigurationError("empty microphone pair set")
        if self.speed_of_sound <= 0:
            raise ConfigurationError("speed of sound must be positive")

    @property
    def n_mics(self) -> int:
        return len(self.mic_positions)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def pair_array(self) -> np.ndarray:
        return np.asarray(self.pairs, dtype=int).reshape(-1, 2)

    @classmethod
    def circular_arrays(cls, centers, radius=0.1, count=8, speed_of_sound=SPEED_OF_SOUND, pairs="all"):
        """Horizontal circular arrays, mics numbered array by array.

        ``pairs="all"`` uses every unordered pair; ``"intra"`` keeps pairs within
        one array. For two 8-mic arrays "all" gives 2*C(8,2) + 8*8 = 120 pairs.
        """
        angles = 2 * np.pi * np.arange(count) / count
        ring = np.stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(count)], axis=1)
        centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        mics = np.concatenate([c + ring for c in centers])
        if pairs == "all":
            pair_list = list(combinations(range(len(mics)), 2))
        elif pairs == "intra":
            pair_list = [
                (a * count + i, a * count + k)
                for a in range(len(centers))
                for i, k in combinations(range(count), 2)
            ]
        else:
            pair_list = list(pairs)
        return cls(mics, tuple(pair_list), speed_of_sound)


@dataclass(frozen=True)
class RoomModel:
    extent: tuple[tuple[float, float], ...] = ((0.0, 3.6), (0.0, 8.2), (0.0, 2.4))
    table_height: float = 0.8

    def __post_init__(self):
        ext = tuple((float(lo), float(hi)) for lo, hi in self.extent)
        object.__setattr__(self, "extent", ext)
        if len(ext) != 3 or any(not hi > lo for lo, hi in ext):
            raise ConfigurationError(f"degenerate room extent {ext}")
        zlo, zhi = ext[2]
        if not (0.0 <= self.table_height < zhi - zlo):
            raise ConfigurationError("table height must lie in [0, room height)")

    def contains(self, points) -> np.ndarray:
        """True where a point is inside the room and not below the table top."""
        p = np.asarray(points, dtype=float)
        ok = np.ones(p.shape[:-1], dtype=bool)
        for axis, (lo, hi) in enumerate(self.extent):
            ok &= (p[..., axis] >= lo) & (p[..., axis] <= hi)
        ok &= p[..., 2] >= self.extent[2][0] + self.table_height
        return ok


@dataclass(frozen=True)
class SampleGrid:
    points_2d: np.ndarray  # (h, w, 2) pixel (u, v)
    points_3d: np.ndarray  # (d, h, w, 3) world
    valid_mask: np.ndarray  # (d, h, w)
    depths: np.ndarray  # (d,)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.valid_mask.shape

    def to_tensor(self) -> np.ndarray:
        """Flat ``(d, h, w, 6)`` export: world xyz, pixel uv, validity."""
        d, h, w = self.shape
        uv = np.broadcast_to(self.points_2d, (d, h, w, 2))
        return np.concatenate([self.points_3d, uv, self.valid_mask[..., None].astype(float)], axis=-1)


def back_project(p2d, depth, cam: CameraModel) -> np.ndarray:
    """Lift pixel(s) to world point(s) at the given camera-frame depth.

    Parameters
    ----------
    p2d : array_like, shape (..., 2)
        Pixel coordinates ``(u, v)``; must lie within the image.
    depth : float or array_like
        Camera-frame z in meters, broadcast against ``p2d[..., 0]``.
    cam : CameraModel

    Returns
    -------
    np.ndarray, shape (..., 3)
        World coordinates whose projection is ``p2d`` and whose camera-frame z
        equals ``depth``.
    """
    uv = np.asarray(p2d, dtype=float)
    depth = np.asarray(depth, dtype=float)
    if np.any(depth <= 0):
        raise InputError("depth must be positive")
    if not np.all(cam.in_image(uv)):
        raise InputError("pixel outside image bounds")
    try:
        K_inv = np.linalg.inv(cam.intrinsics)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("camera intrinsics are not invertible") from exc
    homog = np.concatenate([uv, np.ones(uv.shape[:-1] + (1,))], axis=-1)
    rays = homog @ K_inv.T
    rays = rays / rays[..., 2:3]
    pc = rays * depth[..., None]
    return (pc - cam.translation) @ cam.rotation


def default_depths(cam: CameraModel, room: RoomModel, d: int = 6, near: float | None = None, far: float | None = None):
    """``d`` evenly spaced depth planes spanning the room as seen by the camera.

    Without explicit bounds the range runs from 0.5 m (or the nearest room corner
    in front of the camera) to the farthest room corner, and the planes sit at
    the centers of ``d`` equal slabs.
    """
    corners = np.array(np.meshgrid(*room.extent, indexing="ij")).reshape(3, -1).T
    z = cam.to_camera(corners)[:, 2]
    if near is None:
        front = z[z > 0]
        near = max(0.5, float(front.min())) if front.size else 0.5
    if far is None:
        far = float(z.max())
    if not far > near > 0:
        raise ConfigurationError(f"bad depth range [{near}, {far}]")
    step = (far - near) / d
    return near + step * (np.arange(d) + 0.5)


def pixel_lattice(image_size, h: int, w: int) -> np.ndarray:
    """Uniform ``h x w`` lattice of pixel coordinates including the image borders."""
    H, W = image_size
    us = np.linspace(0.0, W - 1.0, w)
    vs = np.linspace(0.0, H - 1.0, h)
    uu, vv = np.meshgrid(us, vs)
    return np.stack([uu, vv], axis=-1)


def build_sample_grid(cam: CameraModel, room: RoomModel, h: int = 16, w: int = 20, depths=None) -> SampleGrid:
    """Back-project an ``h x w`` pixel lattice onto every depth plane and mask invalid points."""
    if h < 2 or w < 2:
        raise ConfigurationError("grid needs at least 2 samples per axis")
    depths = default_depths(cam, room) if depths is None else np.asarray(depths, dtype=float)
    if depths.ndim != 1 or depths.size == 0 or np.any(depths <= 0) or np.any(np.diff(depths) <= 0):
        raise ConfigurationError("depths must be positive and strictly increasing")
    p2d = pixel_lattice(cam.image_size, h, w)
    p3d = np.stack([back_project(p2d, D, cam) for D in depths])
    valid = room.contains(p3d)
    if not valid.any():
        raise ConfigurationError("no grid point lies inside the room at any depth")
    return SampleGrid(p2d, p3d, valid, depths)


def tdoa(p, pair, mics: MicArrayConfig):
    """Theoretical delay (s) of mic ``i`` relative to mic ``k`` for a source at ``p``.

    Positive when the sound reaches ``i`` after ``k``. Vectorized over leading
    axes of ``p``.
    """
    i, k = pair
    p = np.asarray(p, dtype=float)
    m = mics.mic_positions
    return (np.linalg.norm(p - m[i], axis=-1) - np.linalg.norm(p - m[k], axis=-1)) / mics.speed_of_sound


def pair_tdoas(points, mics: MicArrayConfig) -> np.ndarray:
    """Delays for every pair in the set: shape ``(n_pairs,) + points.shape[:-1]``."""
    p = np.asarray(points, dtype=float)
    dist = np.linalg.norm(p[None, ...] - mics.mic_positions.reshape((-1,) + (1,) * (p.ndim - 1) + (3,)), axis=-1)
    pa = mics.pair_array
    return (dist[pa[:, 0]] - dist[pa[:, 1]]) / mics.speed_of_sound
