"""
Scene scripts: what the generator renders.

A script is a JSON document:

    {
      "frames": 6, "resolution": [160, 90], "seed": 0,
      "fov": 60, "near": 0.5, "far": 100,
      "classes": [{"id": 2, "name": "car", "dynamic": true, "max_speed": 3.0}, ...],   (optional)
      "camera": [{"frame": 0, "eye": [x, y, z], "target": [x, y, z]}, ...],
      "objects": [
        {"name": "car", "primitive": "vehicle", "class": "car", "scale": 1.0,
         "size": [sx, sy, sz], "subdivisions": 1, "wheel_class": "truck",
         "keyframes": [{"frame": 0, "position": [x, y, z], "yaw": 0}],
         "bend": [{"frame": 0, "degrees": 0}],          (strip only)
         "absent": [3, 4, 5],                           (frames the object is not submitted)
         "lod_frame": 3}                                (swap to a coarser mesh from this frame)
      ],
      "clutter": {"count": 5, "class": "building", "region": [xmin, xmax, zmin, zmax]}
    }

Motions are piecewise linear between keyframes and held constant outside them.
`preset:NAME` names one of the built-in scripts instead of a file.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np

from src.errors import InvalidScript
from src.settings import settings
from src.trace_model.types import SemanticClass
from src.utils import look_at, perspective, rigid_inverse, rotation, scaling, translation

PRIMITIVES = ("box", "icosphere", "strip", "vehicle")

DEFAULT_CLASSES = (
    SemanticClass(0, "building", False, 0.5),
    SemanticClass(1, "pole", False, 0.5),
    SemanticClass(2, "car", True, 3.0),
    SemanticClass(3, "truck", True, 3.0),
    SemanticClass(4, "bus", True, 3.0),
    SemanticClass(5, "person", True, 1.0),
    SemanticClass(6, "vegetation", False, 0.5),
)


@dataclass(frozen=True)
class Keyframe:
    frame: int
    position: tuple[float, float, float]
    yaw: float = 0.0


@dataclass(frozen=True)
class CameraKeyframe:
    frame: int
    eye: tuple[float, float, float]
    target: tuple[float, float, float]


def _interpolate(keys, frame, value):
    keys = sorted(keys, key=lambda k: k.frame)
    if frame <= keys[0].frame:
        return np.asarray(value(keys[0]), dtype=np.float64)
    if frame >= keys[-1].frame:
        return np.asarray(value(keys[-1]), dtype=np.float64)
    for lo, hi in zip(keys, keys[1:]):
        if lo.frame <= frame <= hi.frame:
            t = (frame - lo.frame) / (hi.frame - lo.frame)
            a = np.asarray(value(lo), dtype=np.float64)
            b = np.asarray(value(hi), dtype=np.float64)
            return a + t * (b - a)


@dataclass(frozen=True)
class BendKeyframe:
    frame: int
    degrees: float


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    primitive: str
    class_id: int
    keyframes: tuple[Keyframe, ...]
    scale: float = 1.0
    size: tuple[float, float, float] = (1.0, 1.0, 1.0)
    subdivisions: int = 1
    wheel_class: int = 3
    bend: tuple[BendKeyframe, ...] = ()
    absent: frozenset = frozenset()
    lod_frame: int | None = None

    def position(self, frame):
        return _interpolate(self.keyframes, frame, lambda k: k.position)

    def yaw(self, frame):
        return float(_interpolate(self.keyframes, frame, lambda k: k.yaw))

    def world(self, frame):
        """Scripted W (float64): translate · rotate about y · uniform scale."""
        return translation(self.position(frame)) @ rotation("y", self.yaw(frame)) @ scaling(self.scale)

    def bend_degrees(self, frame):
        if not self.bend:
            return 0.0
        return float(_interpolate(self.bend, frame, lambda k: k.degrees))

    def bones(self, frame):
        """Bone matrices of a strip: the base stays put, the top bends about z."""
        return np.stack([np.eye(4), rotation("z", self.bend_degrees(frame))])

    def present(self, frame):
        return frame not in self.absent

    def detail(self, frame):
        """Mesh subdivision level in use at a frame (coarser after the LOD switch)."""
        if self.lod_frame is not None and frame >= self.lod_frame:
            return self.subdivisions - 1
        return self.subdivisions


@dataclass(frozen=True)
class SceneScript:
    frames: int
    resolution: tuple[int, int]
    camera: tuple[CameraKeyframe, ...]
    objects: tuple[ObjectSpec, ...]
    seed: int = 0
    fov: float = 60.0
    near: float = 0.5
    far: float = 100.0
    class_table: tuple[SemanticClass, ...] = DEFAULT_CLASSES
    clutter: int = 0
    clutter_class: int = 0
    clutter_region: tuple[float, float, float, float] = (-15.0, 15.0, -40.0, -25.0)
    name: str = field(default="script", compare=False)

    def camera_pose(self, frame):
        """Scripted camera-to-world transform (float64)."""
        eye = _interpolate(self.camera, frame, lambda k: k.eye)
        target = _interpolate(self.camera, frame, lambda k: k.target)
        return look_at(eye, target)

    def view(self, frame):
        return rigid_inverse(self.camera_pose(frame))

    def projection(self):
        width, height = self.resolution
        return perspective(self.fov, width / height, self.near, self.far)

    def all_objects(self):
        """Scripted objects followed by the seeded static clutter."""
        if not self.clutter:
            return list(self.objects)
        rng = np.random.default_rng(self.seed)
        xmin, xmax, zmin, zmax = self.clutter_region
        clutter = []
        for k in range(self.clutter):
            size = (float(rng.uniform(2.0, 4.0)), float(rng.uniform(2.0, 6.0)), float(rng.uniform(2.0, 4.0)))
            position = (float(rng.uniform(xmin, xmax)), size[1] / 2.0, float(rng.uniform(zmin, zmax)))
            clutter.append(ObjectSpec(
                name=f"clutter_{k}", primitive="box", class_id=self.clutter_class, size=size,
                keyframes=(Keyframe(0, position, float(rng.uniform(0.0, 90.0))),),
            ))
        return list(self.objects) + clutter


def validate_script(script):
    """
    Checks a script for the problems the generator cannot render around.

    Raises:
        InvalidScript: The first problem found.
    """
    if script.frames < 1:
        raise InvalidScript(f"frame count must be positive, got {script.frames}")
    width, height = script.resolution
    if width < 1 or height < 1:
        raise InvalidScript(f"resolution {width}x{height} is empty")
    if not 0 < script.near < script.far:
        raise InvalidScript(f"need 0 < near < far, got near={script.near} far={script.far}")
    if not script.camera:
        raise InvalidScript("script has no camera keyframes")
    classes = {c.class_id for c in script.class_table}
    times = [k.frame for k in script.camera]
    for obj in script.objects:
        if obj.primitive not in PRIMITIVES:
            raise InvalidScript(f"object {obj.name!r}: unknown primitive {obj.primitive!r}")
        if obj.class_id not in classes or (obj.primitive == "vehicle" and obj.wheel_class not in classes):
            raise InvalidScript(f"object {obj.name!r}: unknown class")
        if not obj.keyframes:
            raise InvalidScript(f"object {obj.name!r} has no keyframes")
        if obj.scale <= 0:
            raise InvalidScript(f"object {obj.name!r}: scale must be positive")
        if obj.subdivisions < 1 or (obj.lod_frame is not None and obj.subdivisions < 2):
            raise InvalidScript(f"object {obj.name!r}: LOD swaps need at least 2 subdivisions")
        times += [k.frame for k in obj.keyframes] + [k.frame for k in obj.bend]
    if any(not 0 <= t < script.frames for t in times):
        raise InvalidScript(f"keyframe times must lie within [0, {script.frames})")
    return script


# JSON schema
def _class_id(value, class_table):
    if isinstance(value, int):
        return value
    for cls in class_table:
        if cls.name == value:
            return cls.class_id
    raise InvalidScript(f"unknown class {value!r}")


def _triple(value, what):
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise InvalidScript(f"{what} must be three numbers, got {value!r}") from exc
    return x, y, z


def script_from_dict(data, name="script"):
    """
    Builds a SceneScript from its JSON form.

    Raises:
        InvalidScript: Missing keys or malformed values.
    """
    try:
        class_table = DEFAULT_CLASSES
        if "classes" in data:
            class_table = tuple(SemanticClass(int(c["id"]), str(c["name"]), bool(c["dynamic"]),
                                              float(c["max_speed"])) for c in data["classes"])
        objects = []
        for raw in data.get("objects", []):
            objects.append(ObjectSpec(
                name=str(raw.get("name", f"object_{len(objects)}")),
                primitive=str(raw["primitive"]),
                class_id=_class_id(raw["class"], class_table),
                keyframes=tuple(Keyframe(int(k["frame"]), _triple(k["position"], "position"), float(k.get("yaw", 0.0)))
                                for k in raw["keyframes"]),
                scale=float(raw.get("scale", 1.0)),
                size=_triple(raw.get("size", (1.0, 1.0, 1.0)), "size"),
                subdivisions=int(raw.get("subdivisions", 1)),
                wheel_class=_class_id(raw.get("wheel_class", 3), class_table),
                bend=tuple(BendKeyframe(int(k["frame"]), float(k["degrees"])) for k in raw.get("bend", [])),
                absent=frozenset(int(f) for f in raw.get("absent", [])),
                lod_frame=None if raw.get("lod_frame") is None else int(raw["lod_frame"]),
            ))
        clutter = data.get("clutter", {})
        script = SceneScript(
            frames=int(data["frames"]),
            resolution=tuple(int(v) for v in data["resolution"]),
            camera=tuple(CameraKeyframe(int(k["frame"]), _triple(k["eye"], "eye"), _triple(k["target"], "target"))
                         for k in data["camera"]),
            objects=tuple(objects),
            seed=int(data.get("seed", settings.DEFAULT_SEED)),
            fov=float(data.get("fov", 60.0)),
            near=float(data.get("near", 0.5)),
            far=float(data.get("far", 100.0)),
            class_table=class_table,
            clutter=int(clutter.get("count", 0)),
            clutter_class=_class_id(clutter.get("class", 0), class_table),
            clutter_region=tuple(float(v) for v in clutter.get("region", (-15.0, 15.0, -40.0, -25.0))),
            name=name,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScript(f"malformed scene script {name!r}: {exc!r}") from exc
    return validate_script(script)


# Presets
def _static(name, primitive, class_id, position, size=(1.0, 1.0, 1.0), **kwargs):
    return ObjectSpec(name=name, primitive=primitive, class_id=class_id, size=size,
                      keyframes=(Keyframe(0, position),), **kwargs)


def _mover(name, primitive, class_id, start, end, first, last, **kwargs):
    return ObjectSpec(name=name, primitive=primitive, class_id=class_id,
                      keyframes=(Keyframe(first, start), Keyframe(last, end)), **kwargs)


def static_pan():
    """Static street, camera sliding sideways by 0.1 per frame."""
    return SceneScript(
        name="static-pan", frames=6, resolution=(160, 90),
        camera=(CameraKeyframe(0, (-0.25, 1.5, 0.0), (-0.25, 1.5, -1.0)),
                CameraKeyframe(5, (0.25, 1.5, 0.0), (0.25, 1.5, -1.0))),
        objects=(
            _static("wall", "box", 0, (0.0, 1.5, -12.0), size=(40.0, 12.0, 1.0)),
            _static("pole", "box", 1, (1.0, 1.5, -6.0), size=(0.3, 4.0, 0.3)),
            _static("tree", "icosphere", 6, (-2.0, 0.8, -8.0), size=(1.5, 1.5, 1.5)),
        ),
    )


def city_block(seed=7):
    """Moving camera, two vehicles (one leaving the view), two pedestrians (one skinned) and seeded clutter."""
    return SceneScript(
        name="city-block", frames=24, resolution=(160, 90), seed=seed,
        camera=(CameraKeyframe(0, (0.0, 1.6, 2.0), (0.0, 1.5, -1.0)),
                CameraKeyframe(7, (0.0, 1.6, 0.6), (0.0, 1.5, -2.4)),
                CameraKeyframe(23, (1.2, 1.6, -1.4), (1.8, 1.5, -4.3))),
        objects=(
            _static("facade", "box", 0, (0.0, 2.5, -20.0), size=(24.0, 5.0, 1.0), subdivisions=2),
            _static("pole", "box", 1, (2.5, 1.5, -6.0), size=(0.3, 3.0, 0.3)),
            _static("hedge", "icosphere", 6, (-4.0, 0.6, -7.5), size=(1.2, 1.2, 1.2)),
            ObjectSpec(name="car", primitive="vehicle", class_id=2,
                       keyframes=(Keyframe(0, (-4.0, 0.0, -9.0)), Keyframe(7, (3.0, 0.0, -9.0)),
                                  Keyframe(23, (7.0, 0.0, -12.0), 30.0))),
            _mover("bus", "vehicle", 4, (4.0, 0.0, -14.0), (20.0, 0.0, -14.0), 0, 7, scale=1.4,
                   wheel_class=4),
            ObjectSpec(name="pedestrian", primitive="icosphere", class_id=5, size=(0.6, 0.6, 0.6),
                       keyframes=(Keyframe(0, (-1.5, 0.8, -5.0)), Keyframe(7, (-0.8, 0.8, -5.0)),
                                  Keyframe(23, (0.4, 0.8, -6.6)))),
            ObjectSpec(name="walker", primitive="strip", class_id=5, size=(0.8, 1.6, 0.0),
                       keyframes=(Keyframe(0, (-2.5, 0.0, -8.0)),),
                       bend=(BendKeyframe(0, 0.0), BendKeyframe(7, 20.0), BendKeyframe(23, -12.0))),
        ),
        clutter=5,
    )


def skinned_strip():
    """A single two-bone strip bending in front of a wall, static camera."""
    return SceneScript(
        name="skinned-strip", frames=5, resolution=(120, 90),
        camera=(CameraKeyframe(0, (0.0, 1.0, 3.0), (0.0, 1.0, 0.0)),),
        objects=(
            _static("wall", "box", 0, (0.0, 1.0, -3.0), size=(20.0, 10.0, 1.0)),
            ObjectSpec(name="strip", primitive="strip", class_id=5, size=(1.2, 2.0, 0.0),
                       keyframes=(Keyframe(0, (0.0, 0.0, 0.0)),),
                       bend=(BendKeyframe(0, 0.0), BendKeyframe(4, 24.0))),
        ),
    )


def occlusion(gap=3):
    """A car driving at constant speed that is not submitted for `gap` frames."""
    frames = 4 + gap + 3
    return SceneScript(
        name="occlusion" if gap <= 10 else "occlusion-long", frames=frames, resolution=(160, 90),
        camera=(CameraKeyframe(0, (0.0, 1.5, 2.0), (0.0, 1.0, -10.0)),),
        objects=(
            _static("wall", "box", 0, (0.0, 3.0, -20.0), size=(60.0, 8.0, 1.0)),
            _mover("car", "vehicle", 2, (-4.0, 0.0, -10.0), (-4.0 + 0.5 * (frames - 1), 0.0, -10.0),
                   0, frames - 1, absent=frozenset(range(4, 4 + gap))),
        ),
    )


def lod_swap():
    """A static building whose mesh is swapped for a coarser one mid-sequence, camera panning."""
    return SceneScript(
        name="lod-swap", frames=6, resolution=(160, 90),
        camera=(CameraKeyframe(0, (-0.25, 1.5, 0.0), (-0.25, 1.5, -1.0)),
                CameraKeyframe(5, (0.25, 1.5, 0.0), (0.25, 1.5, -1.0))),
        objects=(
            _static("backdrop", "box", 0, (0.0, 3.0, -20.0), size=(40.0, 8.0, 1.0)),
            _static("tower", "box", 0, (-1.0, 2.0, -10.0), size=(3.0, 4.0, 3.0), subdivisions=3, lod_frame=3),
            _mover("car", "vehicle", 2, (1.0, 0.0, -8.0), (3.5, 0.0, -8.0), 0, 5),
        ),
    )


PRESETS = {
    "static-pan": static_pan,
    "city-block": city_block,
    "skinned-strip": skinned_strip,
    "occlusion": lambda: occlusion(3),
    "occlusion-long": lambda: occlusion(12),
    "lod-swap": lod_swap,
}


def load_scene_script(source, seed=None):
    """
    Loads a scene script from a JSON file or a `preset:NAME` reference.

    Args:
        source (str): File path or `preset:NAME`.
        seed (int): Overrides the script's seed when given.

    Returns:
        SceneScript: Validated script.

    Raises:
        InvalidScript: Unknown preset, missing file or malformed script.
    """
    if source.startswith("preset:"):
        name = source.split(":", 1)[1]
        if name not in PRESETS:
            raise InvalidScript(f"unknown preset {name!r} (known: {', '.join(sorted(PRESETS))})")
        script = PRESETS[name]()
    else:
        try:
            with open(source, encoding="utf-8") as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidScript(f"cannot read scene script {source}: {exc}") from exc
        script = script_from_dict(data, name=source)
    if seed is not None:
        script = replace(script, seed=seed)
    return validate_script(script)
