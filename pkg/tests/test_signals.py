import numpy as np
import pytest

import beacon_amc as ba
from beacon_amc.errors import FileChecksumError, FileFormatError, FileTruncatedError
from beacon_amc.signals import (
    FRAME_LEN,
    constellation,
    split_counts,
    transform_frame,
)


class TestSchemeRegistry:
    def test_exactly_ten_fixed_indices(self):
        assert len(ba.ModulationScheme) == 10
        order = [s.label for s in ba.ModulationScheme]
        assert order == ["QAM16", "QAM64", "8PSK", "WBFM", "BPSK", "CPFSK", "AM-DSB", "GFSK", "PAM4", "QPSK"]
        assert [int(s) for s in ba.ModulationScheme] == list(range(10))


class TestModulate:
    @pytest.mark.parametrize("scheme", list(ba.ModulationScheme))
    def test_unit_power(self, scheme):
        s = ba.modulate(scheme, np.random.default_rng(1), 10_000, 8)
        assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.01

    def test_bpsk_symbol_instants(self):
        s = ba.modulate(ba.ModulationScheme.BPSK, np.random.default_rng(7), 128, 8)
        instants = s[::8]
        # purely real modulation; symbol values are +-1 up to shaping transients
        assert np.abs(instants.imag).max() < 1e-12
        scale = np.mean(np.abs(instants.real))
        normalized = instants.real / scale
        assert np.all(np.abs(np.abs(normalized) - 1.0) < 0.35)
        assert set(np.sign(normalized)) <= {-1.0, 1.0}

    def test_pam4_constellation_levels(self):
        points = constellation(ba.ModulationScheme.PAM4)
        assert np.abs(points.imag).max() == 0.0
        levels = np.sort(points.real)
        assert len(levels) == 4
        np.testing.assert_allclose(levels, -levels[::-1])
        s = ba.modulate(ba.ModulationScheme.PAM4, np.random.default_rng(3), 256, 8)
        assert np.abs(s.imag).max() < 1e-12

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            ba.modulate(17, np.random.default_rng(0), 128, 8)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            ba.modulate(ba.ModulationScheme.BPSK, np.random.default_rng(0), 4, 8)

    def test_deterministic_given_rng(self):
        a = ba.modulate(ba.ModulationScheme.QAM64, np.random.default_rng(5), 128, 8)
        b = ba.modulate(ba.ModulationScheme.QAM64, np.random.default_rng(5), 128, 8)
        np.testing.assert_array_equal(a, b)


class TestApplyChannel:
    def test_empirical_snr_zero_db(self):
        clean = ba.modulate(ba.ModulationScheme.QPSK, np.random.default_rng(2), FRAME_LEN, 8)
        rng = np.random.default_rng(11)
        noise_power = []
        for _ in range(1000):
            iq = ba.apply_channel(clean, 0.0, None, rng)
            rx = iq[0].astype(np.float64) + 1j * iq[1].astype(np.float64)
            noise_power.append(np.mean(np.abs(rx - clean) ** 2))
        snr_est = 10.0 * np.log10(1.0 / np.mean(noise_power))
        assert abs(snr_est) < 0.5

    def test_pure_phase_offset_preserves_power(self):
        clean = ba.modulate(ba.ModulationScheme.PSK8, np.random.default_rng(4), FRAME_LEN, 8)
        imp = ba.Impairments(phase_offset=True, freq_offset=False)
        iq = ba.apply_channel(clean, np.inf, imp, np.random.default_rng(1))
        power_out = np.mean(iq[0].astype(np.float64) ** 2 + iq[1].astype(np.float64) ** 2)
        np.testing.assert_allclose(power_out, np.mean(np.abs(clean) ** 2), rtol=1e-6)

    def test_high_snr_noise_power_concentrates(self):
        clean = ba.modulate(ba.ModulationScheme.QAM16, np.random.default_rng(6), FRAME_LEN, 8)
        rng = np.random.default_rng(22)
        for _ in range(20):
            iq = ba.apply_channel(clean, 20.0, None, rng)
            rx = iq[0].astype(np.float64) + 1j * iq[1].astype(np.float64)
            noise_power = np.mean(np.abs(rx - clean) ** 2)
            assert 0.008 < noise_power < 0.012

    def test_nonfinite_input_rejected(self):
        bad = np.full(FRAME_LEN, np.nan, dtype=complex)
        with pytest.raises(ValueError):
            ba.apply_channel(bad, 0.0, None, np.random.default_rng(0))


class TestAugment:
    def _frame(self, seed=0):
        clean = ba.modulate(ba.ModulationScheme.GFSK, np.random.default_rng(seed), FRAME_LEN, 8)
        iq = ba.apply_channel(clean, 10.0, None, np.random.default_rng(seed + 1))
        return ba.LabeledFrame(iq, ba.ModulationScheme.GFSK, 10)

    def test_identity_transform(self):
        frame = self._frame()
        out = transform_frame(frame.iq, 1.0, 0.0, 0)
        np.testing.assert_array_equal(out, frame.iq)

    def test_pi_rotation_negates(self):
        frame = self._frame(3)
        out = transform_frame(frame.iq, 1.0, np.pi, 0)
        np.testing.assert_allclose(out, -frame.iq, atol=1e-6)

    def test_label_and_snr_preserved(self):
        frame = self._frame(5)
        rng = np.random.default_rng(9)
        for _ in range(20):
            aug = ba.augment(frame, rng)
            assert aug.label == frame.label
            assert aug.snr_db == frame.snr_db

    def test_batch_matches_scalar_path(self):
        frame = self._frame(8)
        batch = frame.iq[None]
        out = ba.augment_batch(batch, np.random.default_rng(13))
        # replicate augment_batch's draw sequence: scale(n), rotation(n), shift(n)
        rng = np.random.default_rng(13)
        scale = rng.uniform(0.8, 1.2, 1)[0]
        rotation = rng.uniform(0.0, 2.0 * np.pi, 1)[0]
        shift = int(rng.integers(0, FRAME_LEN, 1)[0])
        expected = transform_frame(frame.iq, scale, rotation, shift)
        np.testing.assert_allclose(out[0], expected, atol=1e-6)


class TestGenerateDataset:
    def test_frame_count_arithmetic(self, tiny_dataset):
        assert len(tiny_dataset) == 10 * 4 * 10

    def test_determinism_bit_identical(self):
        cfg = ba.GenConfig(frames_per_scheme_per_snr=3, snr_grid=(0, 10), rng_seed=77)
        a = ba.generate_dataset(cfg)
        b = ba.generate_dataset(cfg)
        np.testing.assert_array_equal(a.iq, b.iq)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.split, b.split)

    def test_stratified_split_counts(self, tiny_dataset):
        assert split_counts(20) == (16, 2, 2)
        assert split_counts(10) == (8, 1, 1)
        for scheme in range(10):
            for snr in tiny_dataset.snr_grid:
                cell = (tiny_dataset.labels == scheme) & (tiny_dataset.snr_db == snr)
                assert cell.sum() == 10
                for split_id, want in zip((0, 1, 2), (8, 1, 1)):
                    assert np.sum(cell & (tiny_dataset.split == split_id)) == want

    def test_zero_frames_rejected(self):
        with pytest.raises(ValueError):
            ba.GenConfig(frames_per_scheme_per_snr=0)

    def test_snr_grid_validation(self):
        with pytest.raises(ValueError):
            ba.GenConfig(frames_per_scheme_per_snr=5, snr_grid=(10, 0))
        with pytest.raises(ValueError):
            ba.GenConfig(frames_per_scheme_per_snr=5, snr_grid=(3,))
        with pytest.raises(ValueError):
            ba.GenConfig(frames_per_scheme_per_snr=5, snr_grid=())

    def test_canonical_ordering(self, tiny_dataset):
        # scheme-major, snr-minor: labels nondecreasing, snr cycles per scheme
        labels = tiny_dataset.labels
        assert np.all(np.diff(labels.astype(int)) >= 0)
        first_scheme = tiny_dataset.snr_db[labels == 0]
        expected = np.repeat(tiny_dataset.snr_grid, 10)
        np.testing.assert_array_equal(first_scheme, expected)

    def test_timing_jitter_path(self):
        imp = ba.Impairments(timing_jitter=True, jitter_max=4)
        cfg = ba.GenConfig(frames_per_scheme_per_snr=2, snr_grid=(10,), rng_seed=5, impairments=imp)
        ds = ba.generate_dataset(cfg)
        assert ds.iq.shape == (20, 2, FRAME_LEN)
        assert np.all(np.isfinite(ds.iq))


class TestDatasetFile:
    def test_roundtrip_bit_exact(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.bin"
        ba.save_dataset(tiny_dataset, path)
        loaded = ba.load_dataset(path)
        np.testing.assert_array_equal(loaded.iq, tiny_dataset.iq)
        np.testing.assert_array_equal(loaded.labels, tiny_dataset.labels)
        np.testing.assert_array_equal(loaded.snr_db, tiny_dataset.snr_db)
        np.testing.assert_array_equal(loaded.split, tiny_dataset.split)
        assert loaded.snr_grid == tiny_dataset.snr_grid
        assert loaded.frames_per_cell == tiny_dataset.frames_per_cell

    def test_truncated_file(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.bin"
        ba.save_dataset(tiny_dataset, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FileTruncatedError):
            ba.load_dataset(path)

    def test_wrong_magic(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.bin"
        ba.save_dataset(tiny_dataset, path)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(raw))
        with pytest.raises(FileFormatError):
            ba.load_dataset(path)

    def test_corrupted_body_checksum(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.bin"
        ba.save_dataset(tiny_dataset, path)
        raw = bytearray(path.read_bytes())
        raw[200] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FileChecksumError):
            ba.load_dataset(path)
