"""Three-axis single-contact arm: calibration and contact trajectories.

Screen pixels map to the arm's XY workspace (mm) through an affine transform
fitted by least squares. Trajectories hover at ``z_hover`` and touch the
glass at ``z_contact``; :func:`trace_of` turns a trajectory back into the
touch trace the phone would register.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from armphone.device import Environment, TouchSample, TouchTrace, TransitionResult
from armphone.errors import CalibrationError, OutOfReachError, PackError
from armphone.geometry import Point

TAP_DWELL_MS = 80.0
MIN_SWIPE_SAMPLES = 8
SWIPE_SAMPLE_SPACING_PX = 50.0
PROFILE_VERSION = 1


@dataclass(frozen=True, eq=False)
class CalibrationMap:
    affine: np.ndarray  # 2x3, pixel (x, y, 1) -> workspace (X, Y) mm
    z_contact: float
    z_hover: float
    residual: float = 0.0
    bounds: Optional[tuple[float, float, float, float]] = None  # X_min, Y_min, X_max, Y_max

    def __post_init__(self):
        a = np.asarray(self.affine, dtype=float)
        if a.shape != (2, 3):
            raise CalibrationError(f"affine must be 2x3, got {a.shape}")
        object.__setattr__(self, "affine", a)
        if not self.z_hover > self.z_contact:
            raise CalibrationError("z_hover must be above z_contact")
        if self.residual < 0:
            raise CalibrationError("residual must be non-negative")

    @property
    def linear(self) -> np.ndarray:
        return self.affine[:, :2]

    @property
    def invertible(self) -> bool:
        return abs(np.linalg.det(self.linear)) > 1e-12

    def in_bounds(self, xy: Point) -> bool:
        if self.bounds is None:
            return True
        x0, y0, x1, y1 = self.bounds
        return x0 <= xy[0] <= x1 and y0 <= xy[1] <= y1

    def with_bounds(self, bounds) -> "CalibrationMap":
        return CalibrationMap(self.affine, self.z_contact, self.z_hover, self.residual, tuple(bounds))


def identity_map(z_contact: float = 0.0, z_hover: float = 10.0, bounds=None) -> CalibrationMap:
    return CalibrationMap(np.array([[1.0, 0, 0], [0, 1.0, 0]]), z_contact, z_hover, 0.0, bounds)


def fit_calibration(
    correspondences: Sequence[tuple[Point, Point]],
    z_contact: float,
    z_hover: float,
    bounds=None,
) -> CalibrationMap:
    """Least-squares affine fit of pixel -> workspace from >= 3 non-collinear pairs."""
    if len(correspondences) < 3:
        raise CalibrationError(f"need at least 3 correspondences, got {len(correspondences)}")
    px = np.array([c[0] for c in correspondences], dtype=float)
    ws = np.array([c[1] for c in correspondences], dtype=float)
    design = np.column_stack([px, np.ones(len(px))])
    if np.linalg.matrix_rank(design) < 3:
        raise CalibrationError("correspondences are collinear; affine fit is rank deficient")
    coef, *_ = np.linalg.lstsq(design, ws, rcond=None)
    affine = coef.T
    err = design @ coef - ws
    residual = float(np.max(np.linalg.norm(err, axis=1)))
    return CalibrationMap(affine, z_contact, z_hover, residual, tuple(bounds) if bounds else None)


def pixel_to_workspace(cmap: CalibrationMap, p: Point) -> tuple[float, float]:
    xy = cmap.affine @ np.array([p[0], p[1], 1.0])
    out = (float(xy[0]), float(xy[1]))
    if not cmap.in_bounds(out):
        raise OutOfReachError(f"pixel {tuple(p)} maps to {out}, outside workspace {cmap.bounds}")
    return out


def workspace_to_pixel(cmap: CalibrationMap, xy: Point) -> tuple[float, float]:
    if not cmap.invertible:
        raise CalibrationError("calibration map is not invertible")
    sol = np.linalg.solve(cmap.linear, np.asarray(xy, dtype=float) - cmap.affine[:, 2])
    return (float(sol[0]), float(sol[1]))


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    dwell_ms: float = 0.0


@dataclass(frozen=True)
class ContactTrajectory:
    waypoints: tuple[Waypoint, ...]
    kind: str  # "tap" | "swipe"
    pixel_start: Point = field(default=(0, 0))
    pixel_end: Point = field(default=(0, 0))


def check_structure(traj: ContactTrajectory, cmap: CalibrationMap) -> None:
    """Assert hover -> contiguous contact phase -> hover by scanning Z."""
    zs = [w.z for w in traj.waypoints]
    if len(zs) < 4:
        raise AssertionError(f"trajectory has {len(zs)} waypoints, need >= 4")
    if zs[0] != cmap.z_hover or zs[-1] != cmap.z_hover:
        raise AssertionError("trajectory must start and end at hover height")
    contact = [math.isclose(z, cmap.z_contact) for z in zs]
    first = contact.index(True) if True in contact else -1
    if first < 0:
        raise AssertionError("trajectory has no contact phase")
    last = len(contact) - 1 - contact[::-1].index(True)
    if not all(contact[first:last + 1]):
        raise AssertionError("contact phase is not contiguous")


def plan_tap(cmap: CalibrationMap, p: Point, dwell_ms: float = TAP_DWELL_MS) -> ContactTrajectory:
    x, y = pixel_to_workspace(cmap, p)
    wps = (
        Waypoint(x, y, cmap.z_hover),
        Waypoint(x, y, cmap.z_contact, dwell_ms),
        Waypoint(x, y, cmap.z_contact),
        Waypoint(x, y, cmap.z_hover),
    )
    return ContactTrajectory(wps, "tap", tuple(p), tuple(p))


def plan_swipe(cmap: CalibrationMap, start: Point, end: Point) -> ContactTrajectory:
    if tuple(start) == tuple(end):
        raise ValueError("degenerate swipe (start == end); plan a tap instead")
    a = pixel_to_workspace(cmap, start)
    b = pixel_to_workspace(cmap, end)
    length_px = math.dist(start, end)
    n_mid = max(MIN_SWIPE_SAMPLES, int(length_px // SWIPE_SAMPLE_SPACING_PX))
    wps = [Waypoint(a[0], a[1], cmap.z_hover), Waypoint(a[0], a[1], cmap.z_contact)]
    for i in range(1, n_mid + 1):
        t = i / (n_mid + 1)
        wps.append(Waypoint(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), cmap.z_contact))
    wps += [Waypoint(b[0], b[1], cmap.z_contact), Waypoint(b[0], b[1], cmap.z_hover)]
    return ContactTrajectory(tuple(wps), "swipe", tuple(start), tuple(end))


def trace_of(traj: ContactTrajectory, cmap: CalibrationMap) -> TouchTrace:
    """Screen contacts produced by executing ``traj``; contact means Z at contact height."""
    if not cmap.invertible:
        raise CalibrationError("calibration map is not invertible")
    samples = []
    t = 0.0
    prev = None
    for wp in traj.waypoints:
        px = workspace_to_pixel(cmap, (wp.x, wp.y))
        if prev is not None:
            # 1 px/ms of travel, at least 1 ms between samples
            t += prev[1].dwell_ms + max(1.0, math.dist(prev[0], px))
        samples.append(TouchSample(px[0], px[1], math.isclose(wp.z, cmap.z_contact), t))
        prev = (px, wp)
    return TouchTrace(tuple(samples))


class SimArm:
    """Arm executor that drives a simulated phone; single owner like the env."""

    def __init__(self, cmap: CalibrationMap, env: Environment):
        self.cmap = cmap
        self.env = env

    def execute(self, traj: ContactTrajectory) -> TransitionResult:
        return self.env.dispatch_touch(trace_of(traj, self.cmap))


# -- device profile -----------------------------------------------------------


@dataclass
class DeviceProfile:
    device_id: str
    screen: tuple[int, int]
    workspace: tuple[float, float, float, float]
    z_contact: float
    z_hover: float
    correspondences: list = field(default_factory=list)
    affine: Optional[list] = None
    residual: Optional[float] = None
    source: Optional[Path] = None

    def calibration(self) -> CalibrationMap:
        if self.affine is not None:
            return CalibrationMap(np.array(self.affine), self.z_contact, self.z_hover,
                                  self.residual or 0.0, self.workspace)
        return fit_calibration(self.correspondences, self.z_contact, self.z_hover, self.workspace)

    def to_json(self) -> dict:
        doc = {
            "profile_version": PROFILE_VERSION,
            "device_id": self.device_id,
            "screen": {"width": self.screen[0], "height": self.screen[1]},
            "workspace": dict(zip(("x_min", "y_min", "x_max", "y_max"), self.workspace)),
            "z_contact": self.z_contact,
            "z_hover": self.z_hover,
            "correspondences": [
                {"pixel": list(p), "workspace": list(w)} for p, w in self.correspondences
            ],
        }
        if self.affine is not None:
            doc["calibration"] = {"affine": self.affine, "residual": self.residual}
        return doc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict, source: Optional[Path] = None) -> "DeviceProfile":
        try:
            if doc.get("profile_version") != PROFILE_VERSION:
                raise PackError(f"unsupported profile_version {doc.get('profile_version')!r}",
                                "$.profile_version")
            ws = doc["workspace"]
            cal = doc.get("calibration") or {}
            return cls(
                device_id=doc["device_id"],
                screen=(int(doc["screen"]["width"]), int(doc["screen"]["height"])),
                workspace=(ws["x_min"], ws["y_min"], ws["x_max"], ws["y_max"]),
                z_contact=float(doc["z_contact"]),
                z_hover=float(doc["z_hover"]),
                correspondences=[
                    (tuple(c["pixel"]), tuple(c["workspace"])) for c in doc.get("correspondences", [])
                ],
                affine=cal.get("affine"),
                residual=cal.get("residual"),
                source=source,
            )
        except KeyError as exc:
            raise PackError(f"missing field {exc.args[0]!r}", "$") from None

    @classmethod
    def load(cls, path) -> "DeviceProfile":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")), source=path)


def calibrate_profile(points_doc: dict) -> DeviceProfile:
    """Fit the affine for a points document (a profile without ``calibration``)."""
    profile = DeviceProfile.from_json(points_doc)
    cmap = fit_calibration(profile.correspondences, profile.z_contact, profile.z_hover,
                           profile.workspace)
    profile.affine = cmap.affine.tolist()
    profile.residual = cmap.residual
    return profile
