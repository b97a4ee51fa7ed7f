"""Tests for the synthetic least-squares generator."""

import numpy as np
import pytest

from l0_mpcc.errors import InvalidParameterError
from l0_mpcc.instances import NoiseSpec, Stream, box_muller, generate_lsr_instance, stream


class TestStreams:
    """Seeded generators and Box-Muller normals."""

    def test_streams_are_independent_of_each_other(self):
        a = stream(4, Stream.DICTIONARY).random(5)
        b = stream(4, Stream.SIGNAL).random(5)
        assert not np.array_equal(a, b)

    def test_stream_is_reproducible(self):
        np.testing.assert_array_equal(stream(9, Stream.NOISE).random(8), stream(9, Stream.NOISE).random(8))

    def test_negative_seed(self):
        with pytest.raises(InvalidParameterError):
            stream(-1, Stream.NOISE)

    def test_box_muller_odd_size(self):
        assert box_muller(stream(0, Stream.NOISE), 7).shape == (7,)

    def test_box_muller_moments(self):
        z = box_muller(stream(1, Stream.NOISE), 200_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01


class TestNoiseSpec:
    """Parsing of ratio10 and snr:<v>."""

    def test_ratio10(self):
        spec = NoiseSpec.parse("ratio10")
        assert spec.snr == 10.0
        assert spec.variance(np.array([3.0, 4.0])) == pytest.approx(2.5)

    def test_snr(self):
        spec = NoiseSpec.parse("snr:4")
        assert spec.snr == 4.0
        assert spec.label == "snr:4"

    @pytest.mark.parametrize("text", ["snr:-1", "snr:abc", "ratio5", ""])
    def test_rejects(self, text):
        with pytest.raises(InvalidParameterError):
            NoiseSpec.parse(text)


class TestGenerate:
    """generate_lsr_instance."""

    def test_shapes(self):
        inst = generate_lsr_instance(30, 8, 3, seed=2)
        assert inst.C.shape == (30, 8)
        assert inst.obs.shape == (30,)
        assert inst.x_true.shape == (8,)

    def test_same_seed_same_instance(self):
        a = generate_lsr_instance(20, 6, 2, seed=5)
        b = generate_lsr_instance(20, 6, 2, seed=5)
        np.testing.assert_array_equal(a.C, b.C)
        np.testing.assert_array_equal(a.obs, b.obs)
        np.testing.assert_array_equal(a.x_true, b.x_true)

    def test_different_seeds_differ(self):
        a = generate_lsr_instance(20, 6, 2, seed=5)
        b = generate_lsr_instance(20, 6, 2, seed=6)
        assert not np.array_equal(a.C, b.C)

    def test_full_cardinality_keeps_everything(self):
        inst = generate_lsr_instance(10, 12, 12, seed=0)
        assert np.count_nonzero(inst.x_true) == 12

    def test_threshold_rule(self):
        inst = generate_lsr_instance(10, 40, 8, K=60.0, seed=3)
        nz = inst.x_true[inst.x_true != 0]
        assert np.all(np.abs(nz) < 8 * 60.0 / 40)

    def test_noise_variance(self):
        inst = generate_lsr_instance(10, 5, 5, noise_spec="snr:2", seed=1)
        assert inst.sigma2 == pytest.approx(float(inst.x_true @ inst.x_true) / 2.0)
        assert inst.noise == "snr:2"

    def test_to_problem(self):
        inst = generate_lsr_instance(15, 4, 2, seed=0)
        p = inst.to_problem(gamma=0.5)
        np.testing.assert_allclose(p.M, inst.C.T @ inst.C)
        np.testing.assert_allclose(p.lin, -2 * inst.C.T @ inst.obs)
        assert p.offset == pytest.approx(float(inst.obs @ inst.obs))

    def test_truth_record(self):
        truth = generate_lsr_instance(15, 4, 2, seed=7).truth()
        assert truth["seed"] == 7 and truth["K"] == 60.0 and len(truth["x_true"]) == 4

    @pytest.mark.parametrize("args", [(0, 3, 1), (5, 3, 0), (5, 3, 4)])
    def test_rejects_bad_sizes(self, args):
        with pytest.raises(InvalidParameterError):
            generate_lsr_instance(*args)
