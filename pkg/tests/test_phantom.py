"""Phantom generation: determinism, kinetics orderings, dataset round-trips."""

import numpy as np
import pytest

from hbpsynth.arrayio import DataFormatError
from hbpsynth.phantom import (
    GeometryConfig,
    KineticsProfile,
    PhaseVolume,
    drop_phases,
    generate_patient,
    read_dataset,
    write_dataset,
)

SMALL = GeometryConfig(depth=8, height=32, width=32, tumor_radius=(1.5, 3.0))
QUIET = KineticsProfile(noise_std=0.0, jitter_std=0.0, uptake_std=0.0)


def test_same_seed_is_bit_identical():
    a = generate_patient(42, SMALL)
    b = generate_patient(42, SMALL)
    for name in ("t1", "ap", "vp", "hbp", "clinical"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    np.testing.assert_array_equal(a.liver_mask, b.liver_mask)
    np.testing.assert_array_equal(a.tumor_mask, b.tumor_mask)
    assert a.patient_id == b.patient_id


def test_different_seeds_differ():
    a = generate_patient(1, SMALL)
    b = generate_patient(2, SMALL)
    assert not np.array_equal(a.hbp, b.hbp)


def test_tumor_peaks_in_arterial_phase():
    for seed in range(25):
        v = generate_patient(seed, SMALL)
        means = [v.phase(p)[v.tumor_mask].mean() for p in ("t1", "ap", "vp", "hbp")]
        assert int(np.argmax(means)) == 1, f"seed {seed}: tumor means {means}"


def test_zero_noise_region_means_hit_targets_exactly():
    profile = KineticsProfile(noise_std=0.0, jitter_std=0.0, uptake_std=0.0, albumin_gain=0.0)
    v = generate_patient(7, SMALL, profile)
    background, parenchyma, tumor = v.regions()
    for p, name in enumerate(("t1", "ap", "vp", "hbp")):
        vol = v.phase(name)
        assert (vol[parenchyma] == profile.liver[p]).all()
        assert (vol[tumor] == profile.tumor[p]).all()
        assert vol[parenchyma].mean() == pytest.approx(profile.liver[p], abs=1e-12)
        assert vol[tumor].mean() == pytest.approx(profile.tumor[p], abs=1e-12)


def test_enhancement_orderings_hold_at_default_noise():
    violations = 0
    n = 100
    for seed in range(n):
        v = generate_patient(seed, SMALL)
        _, parenchyma, tumor = v.regions()
        ok = (v.ap[tumor].mean() > v.t1[tumor].mean()
              and v.hbp[parenchyma].mean() > v.t1[parenchyma].mean()
              and v.hbp[tumor].mean() < v.hbp[parenchyma].mean())
        violations += not ok
    assert violations <= 1, f"{violations}/{n} patients violate enhancement orderings"


def test_enhancement_orderings_exact_at_zero_noise():
    for seed in range(20):
        v = generate_patient(seed, SMALL, QUIET)
        _, parenchyma, tumor = v.regions()
        assert v.ap[tumor].mean() > v.t1[tumor].mean()
        assert v.hbp[parenchyma].mean() > v.t1[parenchyma].mean()
        assert v.hbp[tumor].mean() < v.hbp[parenchyma].mean()


def test_masks_partition_volume():
    v = generate_patient(3, SMALL)
    background, parenchyma, tumor = v.regions()
    total = background.astype(int) + parenchyma.astype(int) + tumor.astype(int)
    assert (total == 1).all()
    assert tumor.any() and parenchyma.any() and background.any()


def test_invalid_kinetics_rejected():
    with pytest.raises(ValueError, match="arterial"):
        KineticsProfile(tumor=(0.3, 0.4, 0.8, 0.4)).validate()
    with pytest.raises(ValueError, match="hypointense"):
        KineticsProfile(tumor=(0.3, 0.9, 0.85, 0.8)).validate()
    with pytest.raises(ValueError, match="enhance"):
        KineticsProfile(liver=(0.75, 0.8, 0.9, 0.6)).validate()


def test_clinical_vector_shape_and_albumin_effect():
    v = generate_patient(11, SMALL)
    assert v.clinical.shape == (22,)
    assert v.clinical[1] in (0.0, 1.0)
    # albumin modulates parenchymal late-phase level at zero noise
    quiet = KineticsProfile(noise_std=0.0, jitter_std=0.0, uptake_std=0.0, albumin_gain=0.2)
    lows, highs = [], []
    for seed in range(30):
        v = generate_patient(seed, SMALL, quiet)
        _, parenchyma, _ = v.regions()
        (lows if v.clinical[3] < 0.5 else highs).append(v.hbp[parenchyma].mean())
    assert np.mean(highs) > np.mean(lows)


# --- drop_phases ---------------------------------------------------------------

def test_drop_nothing_at_probability_zero():
    v = generate_patient(5, SMALL)
    out = drop_phases(v, 0.0, 0.0, seed=0)
    np.testing.assert_array_equal(out.ap, v.ap)
    np.testing.assert_array_equal(out.vp, v.vp)
    assert out.ap_available and out.vp_available


def test_drop_everything_at_probability_one():
    v = generate_patient(5, SMALL)
    out = drop_phases(v, 1.0, 1.0, seed=0)
    assert not out.ap_available and not out.vp_available
    assert (out.ap == 0).all() and (out.vp == 0).all()
    np.testing.assert_array_equal(out.t1, v.t1)
    np.testing.assert_array_equal(out.hbp, v.hbp)


def test_drop_rate_monte_carlo():
    v = generate_patient(5, GeometryConfig(depth=4, height=16, width=16, tumor_radius=(1.0, 2.0)))
    drops = sum(not drop_phases(v, 0.3, 0.3, seed=s).ap_available for s in range(10_000))
    assert 0.28 <= drops / 10_000 <= 0.32


def test_drop_probability_validation():
    v = generate_patient(5, SMALL)
    with pytest.raises(ValueError):
        drop_phases(v, 1.5, 0.0, seed=0)


# --- dataset persistence ---------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_volumes():
    return [generate_patient(100 + i, SMALL) for i in range(10)]


def test_split_counts_are_7_2_1(tmp_path, tiny_volumes):
    index = write_dataset(tiny_volumes, tmp_path / "ds", seed=1)
    assert len(index.ids("train")) == 7
    assert len(index.ids("val")) == 2
    assert len(index.ids("test")) == 1


def test_round_trip_is_lossless(tmp_path, tiny_volumes):
    index = write_dataset(tiny_volumes[:3], tmp_path / "ds", seed=2)
    reread = read_dataset(tmp_path / "ds")
    for vol in tiny_volumes[:3]:
        loaded = reread.load(vol.patient_id)
        for name in ("t1", "ap", "vp", "hbp", "clinical"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(vol, name))
        np.testing.assert_array_equal(loaded.liver_mask, vol.liver_mask)
        np.testing.assert_array_equal(loaded.tumor_mask, vol.tumor_mask)
        assert loaded.ap_available == vol.ap_available
        assert loaded.patient_id == vol.patient_id


def test_no_patient_in_two_splits(tmp_path, tiny_volumes):
    index = write_dataset(tiny_volumes, tmp_path / "ds", seed=3)
    train, val, test = (set(index.ids(s)) for s in ("train", "val", "test"))
    assert not (train & val) and not (train & test) and not (val & test)
    assert len(train | val | test) == len(tiny_volumes)


def test_split_is_deterministic(tmp_path, tiny_volumes):
    a = write_dataset(tiny_volumes, tmp_path / "a", seed=4)
    b = write_dataset(tiny_volumes, tmp_path / "b", seed=4)
    assert [p["split"] for p in a.patients] == [p["split"] for p in b.patients]


def test_malformed_manifest_is_named(tmp_path):
    root = tmp_path / "ds"
    root.mkdir()
    (root / "index.json").write_text("{not json")
    with pytest.raises(DataFormatError, match="index.json"):
        read_dataset(root)


def test_missing_manifest_key(tmp_path, tiny_volumes):
    index = write_dataset(tiny_volumes[:2], tmp_path / "ds", seed=5)
    manifest = (tmp_path / "ds" / "index.json")
    raw = manifest.read_text().replace('"ratios"', '"rations"')
    manifest.write_text(raw)
    with pytest.raises(DataFormatError, match="ratios"):
        read_dataset(tmp_path / "ds")


def test_validate_catches_leaky_tumor():
    v = generate_patient(6, SMALL)
    bad_tumor = v.tumor_mask.copy()
    bad_tumor[0, 0, 0] = True  # outside the liver
    with pytest.raises(ValueError, match="leak"):
        PhaseVolume(t1=v.t1, ap=v.ap, vp=v.vp, hbp=v.hbp, liver_mask=v.liver_mask,
                    tumor_mask=bad_tumor, clinical=v.clinical,
                    patient_id="x").validate()
