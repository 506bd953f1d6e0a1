import functools
import hashlib
import math

import numpy as np
import pytest

from vocorate.errors import FormatError, ValidationError
from vocorate.features import attention_variance, patch_entropy
from vocorate.losses import LossConfig, target_complexity
from vocorate.synthetic import (
    SceneSpec,
    build_dataset,
    datasets_equal,
    generate_scene,
    load_dataset,
    save_dataset,
    tier_dials,
)

SEP_SEEDS = 100


@functools.lru_cache(maxsize=None)
def mean_stats(dial, n, seeds, tau_e=1.0):
    hs, vs, cs = [], [], []
    for s in range(seeds):
        spec = SceneSpec(complexity_dial=dial, n_patches=n, dim=16, seed=9000 + s)
        patches, attention = generate_scene(spec)
        hs.append(patch_entropy(patches, tau_e))
        vs.append(attention_variance(attention))
        cs.append(target_complexity(patches, attention, LossConfig(), tau_e))
    return float(np.mean(hs)), float(np.mean(vs)), float(np.mean(cs))


class TestGenerateScene:
    def test_full_dial_hits_max_entropy(self):
        hs = [patch_entropy(generate_scene(SceneSpec(1.0, 16, 8, seed=s))[0])
              for s in range(100)]
        assert abs(float(np.mean(hs)) - math.log(16)) < 0.05

    def test_zero_dial_collapses_entropy(self):
        hs = [patch_entropy(generate_scene(SceneSpec(0.0, 16, 8, seed=s))[0])
              for s in range(100)]
        assert float(np.mean(hs)) < 0.15 * math.log(16)

    def test_same_spec_is_bit_identical(self):
        spec = SceneSpec(0.6, 12, 5, seed=123)
        p1, a1 = generate_scene(spec)
        p2, a2 = generate_scene(spec)
        np.testing.assert_array_equal(p1.patches, p2.patches)
        np.testing.assert_array_equal(a1.weights, a2.weights)

    def test_zero_dial_attention_is_uniform(self):
        _, attention = generate_scene(SceneSpec(0.0, 8, 4, seed=1))
        np.testing.assert_allclose(attention.weights, 1.0 / 8, atol=1e-15)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValidationError):
            SceneSpec(1.5, 8, 4, seed=0)
        with pytest.raises(ValidationError):
            SceneSpec(0.5, 1, 4, seed=0)
        with pytest.raises(ValidationError):
            SceneSpec(0.5, 8, 0, seed=0)


class TestMonotonicity:
    def test_entropy_variance_and_target_increase_with_dial(self):
        stats = [mean_stats(dial, 64, SEP_SEEDS) for dial in (0.0, 0.5, 1.0)]
        hs = [s[0] for s in stats]
        vs = [s[1] for s in stats]
        assert hs[0] < hs[1] < hs[2]
        assert vs[0] < vs[1] < vs[2]

    def test_adjacent_tier_targets_separate(self):
        # the complexity loss needs distinguishable targets per tier
        cs = [mean_stats(dial, 64, SEP_SEEDS)[2] for dial in (0.0, 0.5, 1.0)]
        assert cs[1] - cs[0] >= 0.15
        assert cs[2] - cs[1] >= 0.15


class TestTierAssignment:
    def test_nine_scenes_three_per_tier(self):
        dials = tier_dials(9)
        assert dials.count(0.0) == 3 and dials.count(0.5) == 3 and dials.count(1.0) == 3

    def test_single_scene_defaults_to_midpoint(self):
        assert tier_dials(1) == [0.5]

    def test_zero_count_rejected(self):
        with pytest.raises(ValidationError):
            tier_dials(0)

    def test_build_dataset_is_stratified_and_deterministic(self):
        a = build_dataset(30, seed=5, n_patches=8, dim=4)
        b = build_dataset(30, seed=5, n_patches=8, dim=4)
        assert datasets_equal(a, b)
        dials = a.dials()
        assert (dials == 0.0).sum() == 10
        assert (dials == 0.5).sum() == 10
        assert (dials == 1.0).sum() == 10


class TestSerialization:
    def _dataset(self):
        return build_dataset(6, seed=2, n_patches=8, dim=4, split="val")

    def test_roundtrip_preserves_everything(self, tmp_path):
        dataset = self._dataset()
        path = tmp_path / "scenes.avds"
        save_dataset(dataset, path)
        assert datasets_equal(load_dataset(path), dataset)

    def test_regenerated_dataset_serializes_identically(self, tmp_path):
        p1, p2 = tmp_path / "a.avds", tmp_path / "b.avds"
        save_dataset(build_dataset(12, seed=9, n_patches=8, dim=4), p1)
        save_dataset(build_dataset(12, seed=9, n_patches=8, dim=4), p2)
        d1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        d2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert d1 == d2

    def test_truncated_file_reports_offset(self, tmp_path):
        path = tmp_path / "scenes.avds"
        save_dataset(self._dataset(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:100])
        with pytest.raises(FormatError, match="truncated"):
            load_dataset(path)

    def test_version_bump_rejected(self, tmp_path):
        path = tmp_path / "scenes.avds"
        save_dataset(self._dataset(), path)
        blob = bytearray(path.read_bytes())
        blob[5] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            load_dataset(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "scenes.avds"
        path.write_bytes(b"WRONG" + bytes(200))
        with pytest.raises(FormatError, match="magic"):
            load_dataset(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "scenes.avds"
        save_dataset(self._dataset(), path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError, match="trailing"):
            load_dataset(path)
