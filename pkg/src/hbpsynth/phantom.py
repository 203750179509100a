"""Procedural four-phase liver phantoms with exact masks and covariates.

Each patient is an elliptical liver containing 1-3 spherical lesions over a
faint textured background.  Region intensities follow tissue-specific
enhancement trajectories: lesions peak early and wash out, parenchyma keeps
enhancing into the late phase.  A per-patient uptake amplitude scales all
post-baseline enhancement jointly, so the early phases carry real information
about the late-phase appearance; serum albumin (clinical entry 3) additionally
modulates late parenchymal uptake.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .arrayio import DataFormatError, read_arrays, write_arrays

PHASES = ("t1", "ap", "vp", "hbp")
CLINICAL_DIM = 22
CLINICAL_NAMES = ("age", "sex", "bilirubin", "albumin") + tuple(
    f"lab{i:02d}" for i in range(CLINICAL_DIM - 4))


class PhantomError(RuntimeError):
    """Raised when patient geometry cannot be realized."""


@dataclass(frozen=True)
class KineticsProfile:
    """Per-region intensity targets for (t1, ap, vp, hbp) plus noise knobs.

    ``jitter_std`` perturbs each region/phase mean per patient, ``uptake_std``
    scales the whole post-baseline enhancement per patient, ``albumin_gain``
    couples clinical albumin to late parenchymal uptake.
    """

    liver: tuple[float, float, float, float] = (0.35, 0.55, 0.70, 0.75)
    tumor: tuple[float, float, float, float] = (0.30, 0.80, 0.60, 0.40)
    noise_std: float = 0.02
    jitter_std: float = 0.03
    uptake_std: float = 0.10
    albumin_gain: float = 0.08

    def validate(self) -> None:
        if min(self.liver) < 0 or max(self.liver) > 1 or min(self.tumor) < 0 or max(self.tumor) > 1:
            raise ValueError("intensity targets must lie in [0, 1]")
        if int(np.argmax(self.tumor)) != 1:
            raise ValueError(f"tumor intensity must peak in the arterial phase, got {self.tumor}")
        if int(np.argmax(self.liver)) not in (2, 3):
            raise ValueError(f"liver intensity must peak in the venous or late phase, got {self.liver}")
        if self.tumor[3] >= self.liver[3]:
            raise ValueError("lesions must stay hypointense to parenchyma on the late phase")
        if self.liver[3] <= self.liver[0]:
            raise ValueError("parenchyma must enhance from baseline to the late phase")
        if min(self.noise_std, self.jitter_std, self.uptake_std) < 0:
            raise ValueError("noise parameters must be nonnegative")


@dataclass(frozen=True)
class GeometryConfig:
    depth: int = 16
    height: int = 64
    width: int = 64
    max_tumors: int = 3
    tumor_radius: tuple[float, float] = (2.0, 4.5)
    max_retries: int = 200


@dataclass
class PhaseVolume:
    """One patient: co-registered [D,H,W] phase stack, masks, covariates."""

    t1: np.ndarray
    ap: np.ndarray
    vp: np.ndarray
    hbp: np.ndarray
    liver_mask: np.ndarray
    tumor_mask: np.ndarray
    clinical: np.ndarray
    patient_id: str
    ap_available: bool = True
    vp_available: bool = True

    def validate(self) -> None:
        shape = self.t1.shape
        for name in ("ap", "vp", "hbp", "liver_mask", "tumor_mask"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != t1 shape {shape}")
        for name in PHASES:
            vol = getattr(self, name)
            if vol.min() < 0.0 or vol.max() > 1.0:
                raise ValueError(f"{name} intensities outside [0, 1]")
        if (self.tumor_mask & ~self.liver_mask).any():
            raise ValueError("tumor mask leaks outside the liver mask")
        if self.clinical.shape != (CLINICAL_DIM,):
            raise ValueError(f"clinical vector must have {CLINICAL_DIM} entries, "
                             f"got {self.clinical.shape}")

    def phase(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def regions(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(background, parenchyma, tumor) masks partitioning the volume."""
        parenchyma = self.liver_mask & ~self.tumor_mask
        background = ~self.liver_mask
        return background, parenchyma, self.tumor_mask


def _ellipsoid_mask(shape, center, semiaxes) -> np.ndarray:
    zz, yy, xx = np.ogrid[:shape[0], :shape[1], :shape[2]]
    return (((zz - center[0]) / semiaxes[0]) ** 2
            + ((yy - center[1]) / semiaxes[1]) ** 2
            + ((xx - center[2]) / semiaxes[2]) ** 2) <= 1.0


def _sphere_mask(shape, center, radius, z_scale) -> np.ndarray:
    # z voxels are anisotropic at desk scale: one slice spans z_scale in-plane units
    zz, yy, xx = np.ogrid[:shape[0], :shape[1], :shape[2]]
    return ((z_scale * (zz - center[0])) ** 2
            + (yy - center[1]) ** 2 + (xx - center[2]) ** 2) <= radius ** 2


def generate_patient(seed: int, geometry: GeometryConfig | None = None,
                     kinetics: KineticsProfile | None = None) -> PhaseVolume:
    """Deterministic patient construction from a single seed."""
    geometry = geometry or GeometryConfig()
    kinetics = kinetics or KineticsProfile()
    kinetics.validate()
    rng = np.random.default_rng(seed)
    shape = (geometry.depth, geometry.height, geometry.width)
    d, h, w = shape

    center = np.array([
        d / 2 + rng.uniform(-0.05, 0.05) * d,
        h / 2 + rng.uniform(-0.05, 0.05) * h,
        w / 2 + rng.uniform(-0.05, 0.05) * w,
    ])
    semiaxes = np.array([
        d * rng.uniform(0.30, 0.40),
        h * rng.uniform(0.28, 0.38),
        w * rng.uniform(0.30, 0.42),
    ])
    liver = _ellipsoid_mask(shape, center, semiaxes)

    z_scale = h / d  # slice thickness relative to in-plane voxel size
    n_tumors = int(rng.integers(1, geometry.max_tumors + 1))
    tumor = np.zeros(shape, dtype=bool)
    placed = 0
    for _ in range(geometry.max_retries):
        if placed == n_tumors:
            break
        radius = rng.uniform(*geometry.tumor_radius)
        cand_center = center + (rng.uniform(-0.6, 0.6, 3)) * semiaxes
        cand = _sphere_mask(shape, cand_center, radius, z_scale)
        if not cand.any():
            continue
        if (cand & ~liver).any() or (cand & tumor).any():
            continue
        tumor |= cand
        placed += 1
    if placed < n_tumors:
        raise PhantomError(
            f"seed {seed}: placed only {placed}/{n_tumors} lesions after "
            f"{geometry.max_retries} retries")

    # faint smooth background texture shared by all phases
    texture = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=(1.0, 4.0, 4.0))
    span = max(texture.max() - texture.min(), 1e-9)
    background = 0.04 + 0.08 * (texture - texture.min()) / span

    clinical = np.empty(CLINICAL_DIM)
    clinical[0] = rng.uniform(0.2, 0.9)          # age, normalized
    clinical[1] = float(rng.integers(0, 2))      # sex
    clinical[2] = rng.uniform(0.0, 1.0)          # total bilirubin, normalized
    clinical[3] = rng.uniform(0.0, 1.0)          # albumin, normalized
    clinical[4:] = rng.normal(0.0, 1.0, CLINICAL_DIM - 4)

    uptake = max(0.2, 1.0 + rng.normal(0.0, kinetics.uptake_std)) if kinetics.uptake_std > 0 else 1.0
    jitter = (rng.normal(0.0, kinetics.jitter_std, (2, 4))
              if kinetics.jitter_std > 0 else np.zeros((2, 4)))

    liver_t1, tumor_t1 = kinetics.liver[0], kinetics.tumor[0]
    parenchyma = liver & ~tumor
    volumes = {}
    for p, name in enumerate(PHASES):
        # centered on the target so the zero-noise case reproduces it exactly
        liver_level = kinetics.liver[p] + (uptake - 1.0) * (kinetics.liver[p] - liver_t1) + jitter[0, p]
        tumor_level = kinetics.tumor[p] + (uptake - 1.0) * (kinetics.tumor[p] - tumor_t1) + jitter[1, p]
        if name == "hbp":
            liver_level += kinetics.albumin_gain * (clinical[3] - 0.5)
        vol = background.copy()
        vol[parenchyma] = liver_level
        vol[tumor] = tumor_level
        if kinetics.noise_std > 0:
            vol = vol + rng.normal(0.0, kinetics.noise_std, shape)
        volumes[name] = np.clip(vol, 0.0, 1.0)

    patient = PhaseVolume(
        t1=volumes["t1"], ap=volumes["ap"], vp=volumes["vp"], hbp=volumes["hbp"],
        liver_mask=liver, tumor_mask=tumor, clinical=clinical,
        patient_id=f"case-{seed:08d}",
    )
    patient.validate()
    return patient


def drop_phases(volume: PhaseVolume, p_drop_ap: float, p_drop_vp: float,
                seed: int) -> PhaseVolume:
    """Independently zero out the dynamic phases with the given probabilities.

    The baseline and target phases are never dropped.  A dropped phase is both
    flagged unavailable and replaced by a zero volume.
    """
    if not (0.0 <= p_drop_ap <= 1.0 and 0.0 <= p_drop_vp <= 1.0):
        raise ValueError(f"drop probabilities must lie in [0, 1], got {p_drop_ap}, {p_drop_vp}")
    rng = np.random.default_rng(seed)
    drop_ap = rng.random() < p_drop_ap
    drop_vp = rng.random() < p_drop_vp
    return replace(
        volume,
        ap=np.zeros_like(volume.ap) if drop_ap else volume.ap,
        vp=np.zeros_like(volume.vp) if drop_vp else volume.vp,
        ap_available=volume.ap_available and not drop_ap,
        vp_available=volume.vp_available and not drop_vp,
    )


# ---------------------------------------------------------------------------
# dataset persistence
# ---------------------------------------------------------------------------

SPLITS = ("train", "val", "test")


@dataclass
class DatasetIndex:
    root: Path
    seed: int
    ratios: tuple[float, float, float]
    patients: list[dict] = field(default_factory=list)

    def ids(self, split: str | None = None) -> list[str]:
        if split is None:
            return [p["id"] for p in self.patients]
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [p["id"] for p in self.patients if p["split"] == split]

    def load(self, patient_id: str) -> PhaseVolume:
        for rec in self.patients:
            if rec["id"] == patient_id:
                return read_patient(self.root / rec["file"])
        raise KeyError(f"patient {patient_id!r} not in index")

    def load_split(self, split: str) -> list[PhaseVolume]:
        return [self.load(pid) for pid in self.ids(split)]


def write_patient(path, volume: PhaseVolume) -> None:
    write_arrays(path, {
        "t1": volume.t1, "ap": volume.ap, "vp": volume.vp, "hbp": volume.hbp,
        "liver_mask": volume.liver_mask.astype(np.uint8),
        "tumor_mask": volume.tumor_mask.astype(np.uint8),
        "clinical": volume.clinical,
        "flags": np.array([float(volume.ap_available), float(volume.vp_available)]),
        "patient_id": np.frombuffer(volume.patient_id.encode("utf-8"), dtype=np.uint8),
    })


def read_patient(path) -> PhaseVolume:
    arrays = read_arrays(path)
    required = {"t1", "ap", "vp", "hbp", "liver_mask", "tumor_mask", "clinical",
                "flags", "patient_id"}
    missing = required - set(arrays)
    if missing:
        raise DataFormatError(f"{path}: missing entries {sorted(missing)}")
    return PhaseVolume(
        t1=arrays["t1"], ap=arrays["ap"], vp=arrays["vp"], hbp=arrays["hbp"],
        liver_mask=arrays["liver_mask"].astype(bool),
        tumor_mask=arrays["tumor_mask"].astype(bool),
        clinical=arrays["clinical"],
        patient_id=bytes(arrays["patient_id"]).decode("utf-8"),
        ap_available=bool(arrays["flags"][0]),
        vp_available=bool(arrays["flags"][1]),
    )


def write_dataset(volumes: list[PhaseVolume], out_dir,
                  ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
                  seed: int = 0) -> DatasetIndex:
    """Persist patients and a split manifest; the split shuffle is seeded."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = np.random.default_rng(seed).permutation(len(volumes))
    n_train = int(len(volumes) * ratios[0])
    n_val = int(len(volumes) * ratios[1])
    split_of = {}
    for rank, vol_idx in enumerate(order):
        split_of[vol_idx] = "train" if rank < n_train else (
            "val" if rank < n_train + n_val else "test")

    index = DatasetIndex(root=out_dir, seed=seed, ratios=tuple(ratios))
    for i, vol in enumerate(volumes):
        fname = f"{vol.patient_id}.bin"
        write_patient(out_dir / fname, vol)
        index.patients.append({"id": vol.patient_id, "file": fname, "split": split_of[i]})
    manifest = {
        "seed": seed,
        "ratios": list(ratios),
        "counts": {s: len(index.ids(s)) for s in SPLITS},
        "patients": index.patients,
    }
    (out_dir / "index.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return index


def read_dataset(root) -> DatasetIndex:
    root = Path(root)
    manifest_path = root / "index.json"
    if not manifest_path.exists():
        raise DataFormatError(f"{root}: no index.json manifest found")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    for key in ("seed", "ratios", "patients"):
        if key not in manifest:
            raise DataFormatError(f"{manifest_path}: missing key {key!r}")
    for rec in manifest["patients"]:
        if not {"id", "file", "split"} <= set(rec):
            raise DataFormatError(f"{manifest_path}: malformed patient record {rec}")
        if rec["split"] not in SPLITS:
            raise DataFormatError(f"{manifest_path}: record {rec['id']!r} has "
                                  f"unknown split {rec['split']!r}")
    return DatasetIndex(root=root, seed=manifest["seed"],
                        ratios=tuple(manifest["ratios"]), patients=manifest["patients"])


def generate_dataset(n_patients: int, seed: int, out_dir,
                     geometry: GeometryConfig | None = None,
                     kinetics: KineticsProfile | None = None,
                     ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)) -> DatasetIndex:
    volumes = [generate_patient(seed * 1_000_003 + i, geometry, kinetics)
               for i in range(n_patients)]
    return write_dataset(volumes, out_dir, ratios=ratios, seed=seed)
