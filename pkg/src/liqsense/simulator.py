"""Deterministic virtual touch controller.

Reproduces the measurement-relevant behavior of a mutual-capacitance
controller: an adaptive baseline filter that re-adapts to steady
signals (and is disabled while a finger-like conductive film is
present), per-cell Gaussian read noise, spatially varying sensitivity,
saturation at the device's empirical limit, and sign-inverted device
units (capacitance up = reading down).

The liquid footprint model is NOT physics: it is a small set of
calibration knobs chosen to land on the qualitative behavior of a real
screen.  Contact radius grows like volume^(1/3) and shrinks with
surface tension, so equal volumes of alcohol spread wider than water;
centroid magnitude follows the effective-capacitance ordering of
liquids and saturates with volume (95% of the plateau at 500 uL).
Containers produce a positive rim ring, a negative interior, and four
fringing lobes outside the rim.  All placed fields superpose linearly.

Everything is reproducible: one seeded generator drives all noise, so
identical (config, operation script, seed) gives identical frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .heatmap import DeviceProfile, Frame, Session
from .physics import EPSILON_0

# Tuning knobs for the invented footprint model (device units / cells).
CONTACT_RADIUS_COEFF = 0.26  # cells per uL^(1/3) at water's surface tension
VOLUME_RESPONSE_KNEE_UL = 500.0 / 19.0  # volume response = V/(V+knee); 0.95 at 500 uL
DROP_CENTROID_TARGET = 200.0  # |device units| for 500 uL of tap water
FILM_STUCK_TARGET = 400.0  # device units of the residual priming film
HALO_FRACTION = 0.1  # fringing halo one cell beyond the footprint
TAPER = 0.35  # radial magnitude falloff within the footprint
BULK_SIGMA_COUPLING = 0.01  # thick drops shunt weakly; scales the sigma term
RIM_UNIT = 420.0  # rim response of tap water in a plastic cup
INTERIOR_UNIT = 60.0  # interior (dielectric) response at eps_r = 80
CONTAINER_BASE_FACTORS = {"plastic-cup": 1.0, "beaker": 0.8, "vial": 0.65}


@dataclass(frozen=True)
class VirtualLiquid:
    """Liquid as the simulator sees it: electrical + spreading properties."""

    sigma: float
    eps_r: float
    surface_tension_mN_m: float
    name: str = ""

    def __post_init__(self):
        if self.surface_tension_mN_m <= 0:
            raise ValueError("surface tension must be > 0")
        if self.sigma < 0 or self.eps_r < 1:
            raise ValueError("need sigma >= 0 and eps_r >= 1")


TAP_WATER = VirtualLiquid(sigma=0.05, eps_r=80.1, surface_tension_mN_m=72.0, name="tap-water")
DI_WATER = VirtualLiquid(sigma=5.5e-6, eps_r=80.1, surface_tension_mN_m=72.0, name="di-water")
IPA = VirtualLiquid(sigma=6.0e-6, eps_r=19.0, surface_tension_mN_m=23.0, name="ipa")

BUILTIN_LIQUIDS = {liq.name: liq for liq in (TAP_WATER, DI_WATER, IPA)}


@dataclass(frozen=True, eq=False)
class PlacedSample:
    """A liquid placed on the screen (identity-hashed handle)."""

    liquid: VirtualLiquid
    center: tuple[float, float]  # (row, col) cell coordinates
    volume_ul: float
    kind: str  # drop | film | container
    container_radius_cells: float | None = None
    film_thickness_um: float | None = None
    base_kind: str | None = None

    def __post_init__(self):
        if self.volume_ul <= 0:
            raise ValueError("volume must be > 0")
        if self.kind not in ("drop", "film", "container"):
            raise ValueError(f"unknown sample kind {self.kind!r}")


def default_noise_std_map(profile: DeviceProfile, mean_std: float = 8.0) -> np.ndarray:
    """Center-heavy noise profile with the given screen-average std.

    Shaped like the measured pattern: noisiest mid-screen, quieter at
    the edges, spanning roughly [0.75, 1.25] x mean.
    """
    rr, cc = np.meshgrid(np.arange(profile.rows), np.arange(profile.cols), indexing="ij")
    bump = np.exp(
        -(
            ((rr - (profile.rows - 1) / 2) / (profile.rows / 2.8)) ** 2
            + ((cc - (profile.cols - 1) / 2) / (profile.cols / 2.8)) ** 2
        )
    )
    # affine-normalize to mean 0.5 with span inside (0, 1)
    centered = bump - bump.mean()
    span = max(centered.max(), -centered.min())
    bump = 0.5 + 0.49 * centered / span
    return mean_std * (0.75 + 0.5 * bump)


def default_sensitivity_map(profile: DeviceProfile) -> np.ndarray:
    """Two sensitive clusters left and right of center, low sides/middle."""
    rr, cc = np.meshgrid(np.arange(profile.rows), np.arange(profile.cols), indexing="ij")
    r_mid = (profile.rows - 1) / 2
    lobes = np.zeros((profile.rows, profile.cols))
    for c_frac in (0.28, 0.72):
        c0 = c_frac * (profile.cols - 1)
        lobes += np.exp(
            -(((rr - r_mid) / (profile.rows / 3)) ** 2 + ((cc - c0) / (profile.cols / 7)) ** 2)
        )
    lobes /= lobes.max()
    return 0.6 + 0.4 * lobes


@dataclass(frozen=True)
class SimConfig:
    profile: DeviceProfile = field(default_factory=DeviceProfile)
    seed: int = 0
    noise_std_map: np.ndarray | None = None  # None -> default map
    sensitivity_map: np.ndarray | None = None  # None -> default map
    filter_tau_s: float = 5.0
    filter_enabled: bool = True
    saturation: float = 800.0

    def __post_init__(self):
        if not 1.0 <= self.filter_tau_s <= 20.0:
            raise ValueError("filter_tau_s must be within [1, 20] s")
        if self.saturation <= 0:
            raise ValueError("saturation must be > 0")
        shape = self.profile.shape
        for name, arr in (("noise_std_map", self.noise_std_map),
                          ("sensitivity_map", self.sensitivity_map)):
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != profile shape {shape}")
            object.__setattr__(self, name, arr)
        if self.noise_std_map is not None and np.any(self.noise_std_map < 0):
            raise ValueError("noise stds must be >= 0")
        if self.sensitivity_map is not None and (
            np.any(self.sensitivity_map <= 0) or np.any(self.sensitivity_map > 1)
        ):
            raise ValueError("sensitivity values must be in (0, 1]")

    def resolved_noise(self) -> np.ndarray:
        return (
            default_noise_std_map(self.profile)
            if self.noise_std_map is None
            else self.noise_std_map
        )

    def resolved_sensitivity(self) -> np.ndarray:
        return (
            default_sensitivity_map(self.profile)
            if self.sensitivity_map is None
            else self.sensitivity_map
        )


def volume_response(volume_ul: float) -> float:
    """Saturating volume factor in (0, 1); 0.95 at 500 uL."""
    return volume_ul / (volume_ul + VOLUME_RESPONSE_KNEE_UL)


def contact_radius_cells(volume_ul: float, surface_tension_mN_m: float) -> float:
    return (
        CONTACT_RADIUS_COEFF
        * volume_ul ** (1.0 / 3.0)
        * np.sqrt(72.0 / surface_tension_mN_m)
    )


def _drop_response(liquid: VirtualLiquid, omega: float) -> float:
    """Relative centroid response of a bulk drop.

    The sigma term is attenuated: a thick drop confines the field, so
    permittivity dominates unless conductivity is very high.
    """
    return liquid.eps_r + BULK_SIGMA_COUPLING * liquid.sigma / (omega * EPSILON_0)


def drop_centroid_magnitude(liquid: VirtualLiquid, volume_ul: float, omega: float) -> float:
    scale = DROP_CENTROID_TARGET / (volume_response(500.0) * _drop_response(TAP_WATER, omega))
    return scale * _drop_response(liquid, omega) * volume_response(volume_ul)


def _distance_grid(profile: DeviceProfile, center) -> np.ndarray:
    rr, cc = np.meshgrid(np.arange(profile.rows), np.arange(profile.cols), indexing="ij")
    return np.sqrt((rr - center[0]) ** 2 + (cc - center[1]) ** 2)


def drop_field(profile: DeviceProfile, liquid: VirtualLiquid, center, volume_ul: float):
    """Negative device-unit footprint of a sitting drop."""
    magnitude = drop_centroid_magnitude(liquid, volume_ul, profile.omega_rad_s)
    radius = contact_radius_cells(volume_ul, liquid.surface_tension_mN_m)
    dist = _distance_grid(profile, center)
    footprint = dist <= radius
    if not footprint.any():
        # tiny drop: it still wets the nearest cell
        nearest = np.unravel_index(np.argmin(dist), dist.shape)
        footprint[nearest] = True
    field_grid = np.zeros(profile.shape)
    with np.errstate(invalid="ignore"):
        taper = 1.0 - TAPER * np.where(footprint, dist / max(radius, 1e-9), 0.0) ** 2
    field_grid[footprint] = -magnitude * taper[footprint]
    halo = (dist <= radius + 1.0) & ~footprint
    field_grid[halo] = -HALO_FRACTION * magnitude
    return field_grid, footprint


def film_field(profile: DeviceProfile, footprint: np.ndarray, volume_ul: float) -> np.ndarray:
    """Positive stuck region left by drawing up a priming drop."""
    stuck = FILM_STUCK_TARGET / volume_response(500.0) * volume_response(volume_ul)
    field_grid = np.zeros(profile.shape)
    field_grid[footprint] = stuck
    return field_grid


def _rim_response(liquid: VirtualLiquid, omega: float) -> float:
    """Log-compressed conductive coupling of the rim contact line."""
    x = liquid.sigma / (omega * EPSILON_0) + 0.15 * liquid.eps_r
    x_ref = TAP_WATER.sigma / (omega * EPSILON_0) + 0.15 * TAP_WATER.eps_r
    return float(np.log1p(x) / np.log1p(x_ref))


def container_field(
    profile: DeviceProfile,
    liquid: VirtualLiquid,
    center,
    radius_cells: float,
    base_kind: str,
) -> np.ndarray:
    if base_kind not in CONTAINER_BASE_FACTORS:
        raise ValueError(
            f"unknown base kind {base_kind!r}; options: {sorted(CONTAINER_BASE_FACTORS)}"
        )
    if radius_cells <= 1.0:
        raise ValueError("container radius must exceed 1 cell")
    r0, c0 = center
    if (
        r0 - radius_cells - 0.55 < 0
        or r0 + radius_cells + 0.55 > profile.rows - 1
        or c0 - radius_cells - 0.55 < 0
        or c0 + radius_cells + 0.55 > profile.cols - 1
    ):
        raise ValueError("container rim extends outside the grid")
    base = CONTAINER_BASE_FACTORS[base_kind]
    dist = _distance_grid(profile, center)
    field_grid = np.zeros(profile.shape)
    interior_mag = base * INTERIOR_UNIT * liquid.eps_r / 80.0
    field_grid[dist < radius_cells - 0.55] = -interior_mag
    rim = np.abs(dist - radius_cells) <= 0.55
    field_grid[rim] = base * RIM_UNIT * _rim_response(liquid, profile.omega_rad_s)
    # fringing lobes at the four diagonal corners just outside the rim
    lobe_r = (radius_cells + 1.3) / np.sqrt(2.0)
    for sr in (-1.0, 1.0):
        for sc in (-1.0, 1.0):
            lobe_dist = _distance_grid(profile, (r0 + sr * lobe_r, c0 + sc * lobe_r))
            lobe = (lobe_dist <= 0.9) & (field_grid == 0)
            field_grid[lobe] = -0.15 * interior_mag
    return field_grid


class VirtualController:
    """Stateful touch controller simulation.

    Per emitted frame: observed = clamp(sensitivity * field + noise),
    delta = clamp(observed - baseline), then (filter on) the baseline
    relaxes toward observed with time constant filter_tau_s.  The
    filter is forced off while any film sample sits on the screen and
    restored when the last film is removed.
    """

    def __init__(self, config: SimConfig, seed_override=None):
        self.config = config
        self.profile = config.profile
        self._noise_std = config.resolved_noise()
        self._sensitivity = config.resolved_sensitivity()
        self._rng = np.random.default_rng(
            config.seed if seed_override is None else seed_override
        )
        self.baseline = np.zeros(self.profile.shape)
        self._contributions: dict[PlacedSample, np.ndarray] = {}
        self._footprints: dict[PlacedSample, np.ndarray] = {}
        self.filter_active = config.filter_enabled
        self.time_s = 0.0
        self._session_t0 = None
        self._reference = None
        self._recorded = None

    @property
    def true_field(self) -> np.ndarray:
        if not self._contributions:
            return np.zeros(self.profile.shape)
        return np.sum(list(self._contributions.values()), axis=0)

    @property
    def samples(self) -> list[PlacedSample]:
        return list(self._contributions)

    def _check_center(self, center):
        r, c = center
        if not (0 <= r <= self.profile.rows - 1 and 0 <= c <= self.profile.cols - 1):
            raise ValueError(f"center {center} outside the {self.profile.shape} grid")

    def _refresh_filter(self):
        has_film = any(s.kind == "film" for s in self._contributions)
        self.filter_active = self.config.filter_enabled and not has_film

    def deposit_drop(self, liquid: VirtualLiquid, center, volume_ul: float) -> PlacedSample:
        self._check_center(center)
        sample = PlacedSample(
            liquid=liquid, center=tuple(center), volume_ul=float(volume_ul), kind="drop"
        )
        field_grid, footprint = drop_field(self.profile, liquid, center, volume_ul)
        self._contributions[sample] = field_grid
        self._footprints[sample] = footprint
        return sample

    def draw_up(self, sample: PlacedSample, film_thickness_um: float = 2.0) -> PlacedSample:
        """Remove a drop, leaving a conductive film that reads as a touch."""
        if sample not in self._contributions:
            raise ValueError("sample is not on the screen")
        if sample.kind != "drop":
            raise ValueError(f"can only draw up drops, not {sample.kind!r}")
        footprint = self._footprints.pop(sample)
        del self._contributions[sample]
        film = PlacedSample(
            liquid=sample.liquid,
            center=sample.center,
            volume_ul=sample.volume_ul,
            kind="film",
            film_thickness_um=film_thickness_um,
        )
        self._contributions[film] = film_field(self.profile, footprint, sample.volume_ul)
        self._footprints[film] = footprint
        self._refresh_filter()
        return film

    def place_container(
        self,
        liquid: VirtualLiquid,
        center,
        radius_cells: float,
        base_kind: str = "plastic-cup",
        volume_ul: float = 23000.0,
    ) -> PlacedSample:
        self._check_center(center)
        sample = PlacedSample(
            liquid=liquid,
            center=tuple(center),
            volume_ul=float(volume_ul),
            kind="container",
            container_radius_cells=float(radius_cells),
            base_kind=base_kind,
        )
        self._contributions[sample] = container_field(
            self.profile, liquid, center, radius_cells, base_kind
        )
        return sample

    def remove_sample(self, sample: PlacedSample) -> None:
        if sample not in self._contributions:
            raise ValueError("sample is not on the screen")
        del self._contributions[sample]
        self._footprints.pop(sample, None)
        self._refresh_filter()

    def prime(self, center, liquid: VirtualLiquid = TAP_WATER, volume_ul: float = 500.0,
              settle_frames: int = 2) -> PlacedSample:
        """Deposit and draw up a priming drop, disabling the adaptive filter."""
        drop = self.deposit_drop(liquid, center, volume_ul)
        if settle_frames:
            self.step(settle_frames)
        return self.draw_up(drop)

    def step(self, n_frames: int) -> list[Frame]:
        """Advance the controller, emitting one delta frame per period."""
        if n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        dt = self.profile.frame_period_s
        sat = self.config.saturation
        gain = 1.0 - np.exp(-dt / self.config.filter_tau_s)
        frames = []
        field_grid = self.true_field
        for _ in range(n_frames):
            self.time_s += dt
            noise = self._rng.normal(0.0, 1.0, self.profile.shape) * self._noise_std
            observed = np.clip(self._sensitivity * field_grid + noise, -sat, sat)
            delta = np.clip(observed - self.baseline, -sat, sat)
            if self.filter_active:
                self.baseline = self.baseline + gain * (observed - self.baseline)
            t0 = self._session_t0 if self._session_t0 is not None else 0.0
            frame = Frame(grid=delta, timestamp_s=self.time_s - t0)
            frames.append(frame)
            if self._recorded is not None:
                self._recorded.append(frame)
        return frames

    def start_session(self) -> None:
        """Snapshot the reference (current baseline) and start recording."""
        self._session_t0 = self.time_s
        self._reference = Frame(grid=self.baseline.copy(), timestamp_s=0.0)
        self._recorded = []

    def end_session(self, metadata: dict | None = None) -> Session:
        if self._recorded is None:
            raise ValueError("no session in progress")
        if not self._recorded:
            raise ValueError("session has no frames; step() before ending it")
        session = Session(
            profile=self.profile,
            reference=self._reference,
            deltas=tuple(self._recorded),
            metadata=dict(metadata or {}),
        )
        self._session_t0 = None
        self._reference = None
        self._recorded = None
        return session


@dataclass(frozen=True)
class ClassSpec:
    """One liquid class for dataset generation."""

    name: str
    liquid: VirtualLiquid
    volume_ul: float = 500.0
    kind: str = "drop"  # drop | container
    container_radius_cells: float = 6.0
    base_kind: str = "plastic-cup"

    def __post_init__(self):
        if self.kind not in ("drop", "container"):
            raise ValueError(f"unknown class kind {self.kind!r}")
        if self.volume_ul <= 0:
            raise ValueError("volume must be > 0")


def generate_dataset(
    config: SimConfig,
    class_specs,
    drops_per_class: int,
    frames_per_drop: int,
    pre_frames: int = 3,
    prime_first: bool = True,
    deposit_center=None,
) -> list[Session]:
    """Labeled sessions: prime, record, deposit, hold steady.

    The priming procedure runs before the reference snapshot, so its
    stuck film is static within each session and the recorded stream
    contains exactly one deposit event (at frame index ``pre_frames``,
    also written to the metadata for test bookkeeping).  Placement
    jitters deterministically around ``deposit_center``, which defaults
    to the left sensitivity lobe (the screen spot a calibrated operator
    would pick).  Seeds derive from config.seed per session; repeated
    calls are byte-identical.
    """
    class_specs = list(class_specs)
    if len(class_specs) < 2:
        raise ValueError("need at least 2 classes")
    if drops_per_class < 1 or frames_per_drop < 1:
        raise ValueError("drops_per_class and frames_per_drop must be >= 1")
    root = np.random.SeedSequence(config.seed)
    session_seeds = root.spawn(len(class_specs) * drops_per_class)
    placement_rng = np.random.default_rng(root.spawn(1)[0])
    rows, cols = config.profile.shape
    if deposit_center is None:
        deposit_center = (rows / 2.0, 0.28 * (cols - 1))

    sessions = []
    idx = 0
    for spec in class_specs:
        for _ in range(drops_per_class):
            controller = VirtualController(config, seed_override=session_seeds[idx])
            idx += 1
            prime_center = (rows * 0.25, cols * 0.85)
            if prime_first:
                controller.prime(prime_center)
                controller.step(2)
            jitter = placement_rng.uniform(-2.0, 2.0, size=2)
            center = (deposit_center[0] + jitter[0], deposit_center[1] + jitter[1])
            controller.start_session()
            controller.step(pre_frames)
            if spec.kind == "drop":
                controller.deposit_drop(spec.liquid, center, spec.volume_ul)
            else:
                controller.place_container(
                    spec.liquid,
                    center,
                    spec.container_radius_cells,
                    spec.base_kind,
                    volume_ul=spec.volume_ul,
                )
            controller.step(frames_per_drop)
            sessions.append(
                controller.end_session(
                    metadata={
                        "class": spec.name,
                        "liquid": spec.liquid.name,
                        "volume_ul": spec.volume_ul,
                        "kind": spec.kind,
                        "position": [center[0], center[1]],
                        "deposit_frame_index": pre_frames,
                    }
                )
            )
    return sessions


def _liquid_from_spec(value) -> VirtualLiquid:
    if isinstance(value, str):
        if value not in BUILTIN_LIQUIDS:
            raise SchemaError(f"unknown liquid {value!r}; built-ins: {sorted(BUILTIN_LIQUIDS)}")
        return BUILTIN_LIQUIDS[value]
    if isinstance(value, dict):
        try:
            return VirtualLiquid(
                sigma=float(value["sigma"]),
                eps_r=float(value["eps_r"]),
                surface_tension_mN_m=float(value["surface_tension_mN_m"]),
                name=str(value.get("name", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad liquid spec: {exc}") from exc
    raise SchemaError("liquid must be a name or an object")


def run_scenario(script: dict) -> Session:
    """Execute a JSON scenario script and return the recorded session.

    Script: {"seed": int, "filter_tau_s": s, "metadata": {...},
    "operations": [...]} with operations deposit / draw_up /
    place_container / wait.  Recording starts at the first operation;
    draw_up targets the most recent drop unless "sample" gives an index
    into the placement order.
    """
    if not isinstance(script, dict) or "operations" not in script:
        raise SchemaError("scenario must be an object with an 'operations' list")
    ops = script["operations"]
    if not isinstance(ops, list) or not ops:
        raise SchemaError("'operations' must be a nonempty list")
    profile = DeviceProfile(**script.get("profile", {}))
    try:
        config = SimConfig(
            profile=profile,
            seed=int(script.get("seed", 0)),
            filter_tau_s=float(script.get("filter_tau_s", 5.0)),
            filter_enabled=bool(script.get("filter_enabled", True)),
            saturation=float(script.get("saturation", 800.0)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario config: {exc}") from exc

    controller = VirtualController(config)
    controller.start_session()
    placed: list[PlacedSample] = []
    for i, op in enumerate(ops):
        if not isinstance(op, dict) or "op" not in op:
            raise SchemaError(f"operation {i} must be an object with an 'op' field")
        kind = op["op"]
        try:
            if kind == "wait":
                controller.step(int(op.get("frames", 1)))
            elif kind == "deposit":
                placed.append(
                    controller.deposit_drop(
                        _liquid_from_spec(op["liquid"]),
                        tuple(op["center"]),
                        float(op.get("volume_ul", 500.0)),
                    )
                )
            elif kind == "draw_up":
                candidates = [s for s in placed if s.kind == "drop"]
                if "sample" in op:
                    target = placed[int(op["sample"])]
                elif candidates:
                    target = candidates[-1]
                else:
                    raise SchemaError(f"operation {i}: no drop to draw up")
                placed[placed.index(target)] = controller.draw_up(target)
            elif kind == "place_container":
                placed.append(
                    controller.place_container(
                        _liquid_from_spec(op["liquid"]),
                        tuple(op["center"]),
                        float(op.get("radius_cells", 6.0)),
                        op.get("base_kind", "plastic-cup"),
                    )
                )
            else:
                raise SchemaError(f"operation {i}: unknown op {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"operation {i} ({kind}): {exc}") from exc
    return controller.end_session(metadata=script.get("metadata", {}))
