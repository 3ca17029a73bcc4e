"""Synthetic I/Q modulation dataset generation.

Produces labeled 2x128 baseband frames for ten modulation schemes over an
SNR grid, with stratified train/validation/test splits, training-time
augmentation, and a checksummed binary on-disk format.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import FileChecksumError, FileFormatError, FileTruncatedError

FRAME_LEN = 128
NUM_CLASSES = 10
SNR_GRID_FULL = tuple(range(-20, 22, 2))

SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST = 0, 1, 2
SPLIT_NAMES = ("train", "val", "test")
SPLIT_FRACTIONS = (0.81, 0.09, 0.10)

# Seed-stream ids: every RNG in the pipeline is derived from a base seed via
# np.random.SeedSequence(seed, spawn_key=(stream_id, ...)) so that parallel
# generation and repeated runs agree bit for bit.
STREAM_CELL = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_AUGMENT = 3
STREAM_DROPOUT = 4
STREAM_HOLDOUT = 5

RRC_ROLLOFF = 0.35
RRC_SPAN = 4

_DATASET_MAGIC = b"BEACONDS"
_DATASET_VERSION = 1

_FRAME_DTYPE = np.dtype(
    [
        ("iq", "<f4", (2 * FRAME_LEN,)),
        ("label", "u1"),
        ("snr_db", "<i2"),
        ("split", "u1"),
    ]
)


class ModulationScheme(enum.IntEnum):
    """The ten schemes in their fixed class order; indices never change."""

    QAM16 = 0
    QAM64 = 1
    PSK8 = 2
    WBFM = 3
    BPSK = 4
    CPFSK = 5
    AM_DSB = 6
    GFSK = 7
    PAM4 = 8
    QPSK = 9

    @property
    def label(self) -> str:
        return _SCHEME_LABELS[self]


_SCHEME_LABELS = {
    ModulationScheme.QAM16: "QAM16",
    ModulationScheme.QAM64: "QAM64",
    ModulationScheme.PSK8: "8PSK",
    ModulationScheme.WBFM: "WBFM",
    ModulationScheme.BPSK: "BPSK",
    ModulationScheme.CPFSK: "CPFSK",
    ModulationScheme.AM_DSB: "AM-DSB",
    ModulationScheme.GFSK: "GFSK",
    ModulationScheme.PAM4: "PAM4",
    ModulationScheme.QPSK: "QPSK",
}

_LINEAR_SCHEMES = frozenset(
    {
        ModulationScheme.QAM16,
        ModulationScheme.QAM64,
        ModulationScheme.PSK8,
        ModulationScheme.BPSK,
        ModulationScheme.PAM4,
        ModulationScheme.QPSK,
    }
)


@dataclass
class Impairments:
    """Channel impairment switches and magnitude ranges."""

    phase_offset: bool = True
    freq_offset: bool = True
    timing_jitter: bool = False
    cfo_max: float = 1e-3  # cycles/sample
    jitter_max: int = 4  # samples


@dataclass
class GenConfig:
    """Parameters of one dataset generation run."""

    frames_per_scheme_per_snr: int
    snr_grid: tuple = SNR_GRID_FULL
    samples_per_symbol: int = 8
    rng_seed: int = 0
    impairments: Impairments = field(default_factory=Impairments)

    def __post_init__(self):
        if self.frames_per_scheme_per_snr <= 0:
            raise ValueError("frames_per_scheme_per_snr must be positive")
        if self.samples_per_symbol <= 0:
            raise ValueError("samples_per_symbol must be positive")
        grid = tuple(int(s) for s in self.snr_grid)
        if not grid:
            raise ValueError("snr_grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid must be strictly increasing")
        unknown = [s for s in grid if s not in SNR_GRID_FULL]
        if unknown:
            raise ValueError(f"snr values {unknown} outside the supported grid {SNR_GRID_FULL}")
        self.snr_grid = grid


@dataclass
class LabeledFrame:
    """One 2x128 real I/Q frame with its modulation label and SNR tag."""

    iq: np.ndarray
    label: ModulationScheme
    snr_db: int

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=np.float32)
        if self.iq.shape != (2, FRAME_LEN):
            raise ValueError(f"iq must be 2x{FRAME_LEN}, got {self.iq.shape}")
        if not np.all(np.isfinite(self.iq)):
            raise ValueError("iq entries must be finite")
        self.label = ModulationScheme(self.label)
        self.snr_db = int(self.snr_db)
        if self.snr_db not in SNR_GRID_FULL:
            raise ValueError(f"snr_db {self.snr_db} outside the supported grid")


@dataclass
class Dataset:
    """Frames in canonical (scheme-major, snr-minor) order plus split tags."""

    iq: np.ndarray  # (n, 2, 128) float32
    labels: np.ndarray  # (n,) uint8
    snr_db: np.ndarray  # (n,) int16
    split: np.ndarray  # (n,) uint8
    snr_grid: tuple
    frames_per_cell: int

    def __len__(self) -> int:
        return self.iq.shape[0]

    def indices(self, split) -> np.ndarray:
        return np.flatnonzero(self.split == _split_id(split))

    def arrays_for(self, split):
        idx = self.indices(split)
        return self.iq[idx], self.labels[idx].astype(np.int64), self.snr_db[idx].astype(np.int64)

    def frame(self, i: int) -> LabeledFrame:
        return LabeledFrame(self.iq[i], ModulationScheme(int(self.labels[i])), int(self.snr_db[i]))


def _split_id(split) -> int:
    if isinstance(split, str):
        return SPLIT_NAMES.index(split)
    return int(split)


def split_counts(n: int):
    """Nearest-integer per-stratum counts for the 81/9/10 split."""
    n_train = round(SPLIT_FRACTIONS[0] * n)
    n_val = round(SPLIT_FRACTIONS[1] * n)
    return n_train, n_val, n - n_train - n_val


# ---------------------------------------------------------------------------
# modulators


def constellation(scheme: ModulationScheme) -> np.ndarray:
    """Unit-average-energy constellation points of a linear digital scheme."""
    scheme = ModulationScheme(scheme)
    if scheme == ModulationScheme.BPSK:
        return np.array([1.0, -1.0], dtype=complex)
    if scheme == ModulationScheme.QPSK:
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    if scheme == ModulationScheme.PSK8:
        return np.exp(1j * (np.pi / 4 * np.arange(8)))
    if scheme == ModulationScheme.PAM4:
        return np.array([-3.0, -1.0, 1.0, 3.0], dtype=complex) / np.sqrt(5.0)
    if scheme == ModulationScheme.QAM16:
        lv = np.array([-3.0, -1.0, 1.0, 3.0])
        return ((lv[:, None] + 1j * lv[None, :]) / np.sqrt(10.0)).ravel()
    if scheme == ModulationScheme.QAM64:
        lv = np.array([-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0])
        return ((lv[:, None] + 1j * lv[None, :]) / np.sqrt(42.0)).ravel()
    raise ValueError(f"{scheme.label} has no constellation")


def rrc_taps(sps: int, rolloff: float = RRC_ROLLOFF, span: int = RRC_SPAN) -> np.ndarray:
    """Root-raised-cosine taps, normalized to a unit center tap."""
    n_taps = span * sps + 1
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / sps
    h = np.empty(n_taps)
    for i, ti in enumerate(t):
        if ti == 0.0:
            h[i] = 1.0 + rolloff * (4.0 / np.pi - 1.0)
        elif abs(abs(ti) - 1.0 / (4.0 * rolloff)) < 1e-12:
            h[i] = (rolloff / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff))
            )
        else:
            num = np.sin(np.pi * ti * (1 - rolloff)) + 4 * rolloff * ti * np.cos(
                np.pi * ti * (1 + rolloff)
            )
            den = np.pi * ti * (1 - (4 * rolloff * ti) ** 2)
            h[i] = num / den
    return h / h[(n_taps - 1) // 2]


def _linear_mod(rng, points, n_samples, sps):
    n_sym = -(-n_samples // sps)
    idx = rng.integers(0, len(points), n_sym)
    x = np.zeros(n_sym * sps, dtype=complex)
    x[::sps] = points[idx]
    return np.convolve(x, rrc_taps(sps), mode="same")[:n_samples]


def _cpfsk(rng, n_samples, sps, mod_index=0.5):
    n_sym = -(-n_samples // sps)
    bits = rng.integers(0, 2, n_sym) * 2.0 - 1.0
    freq = np.repeat(bits, sps)[:n_samples] * (mod_index / (2.0 * sps))
    return np.exp(2j * np.pi * np.cumsum(freq))


def _gaussian_taps(sps, bt, span=3):
    t = (np.arange(span * sps + 1) - span * sps / 2) / sps
    sigma = np.sqrt(np.log(2.0)) / (2.0 * np.pi * bt)
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    return g / g.sum()


def _gfsk(rng, n_samples, sps, mod_index=1.0, bt=0.3):
    n_sym = -(-n_samples // sps)
    bits = rng.integers(0, 2, n_sym) * 2.0 - 1.0
    nrz = np.repeat(bits, sps)
    smooth = np.convolve(nrz, _gaussian_taps(sps, bt), mode="same")[:n_samples]
    freq = smooth * (mod_index / (2.0 * sps))
    return np.exp(2j * np.pi * np.cumsum(freq))


def _analog_message(rng, n, n_tones=8, f_max=0.1):
    freqs = rng.uniform(0.005, f_max, n_tones)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_tones)
    t = np.arange(n)
    m = np.sin(2.0 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).sum(axis=0)
    return m / np.max(np.abs(m))


def _wbfm(rng, n_samples, peak_deviation=0.15):
    m = _analog_message(rng, n_samples)
    return np.exp(2j * np.pi * peak_deviation * np.cumsum(m))


def _am_dsb(rng, n_samples):
    return _analog_message(rng, n_samples).astype(complex)


def modulate(scheme, rng, n_samples: int, samples_per_symbol: int) -> np.ndarray:
    """Generate a unit-average-power complex baseband sequence for one scheme."""
    scheme = ModulationScheme(scheme)
    if n_samples < samples_per_symbol:
        raise ValueError("n_samples must be at least samples_per_symbol")
    if scheme in _LINEAR_SCHEMES:
        s = _linear_mod(rng, constellation(scheme), n_samples, samples_per_symbol)
    elif scheme == ModulationScheme.CPFSK:
        s = _cpfsk(rng, n_samples, samples_per_symbol)
    elif scheme == ModulationScheme.GFSK:
        s = _gfsk(rng, n_samples, samples_per_symbol)
    elif scheme == ModulationScheme.WBFM:
        s = _wbfm(rng, n_samples)
    else:
        s = _am_dsb(rng, n_samples)
    return s / np.sqrt(np.mean(np.abs(s) ** 2))


# ---------------------------------------------------------------------------
# channel and augmentation


def apply_channel(clean: np.ndarray, snr_db: float, impairments, rng) -> np.ndarray:
    """Rotate by the drawn impairments, add AWGN at snr_db, return 2x128 I/Q.

    Draw order is fixed (phase, CFO, noise) so a seeded rng reproduces the
    frame exactly. snr_db = +inf disables the noise term.
    """
    clean = np.asarray(clean, dtype=complex)
    if clean.shape != (FRAME_LEN,):
        raise ValueError(f"clean sequence must have length {FRAME_LEN}")
    if not np.all(np.isfinite(clean)):
        raise ValueError("clean sequence must be finite")
    sig = clean
    if impairments is not None:
        rot = 0.0
        if impairments.phase_offset:
            rot = rng.uniform(0.0, 2.0 * np.pi)
        cfo = 0.0
        if impairments.freq_offset:
            cfo = rng.uniform(-impairments.cfo_max, impairments.cfo_max)
        if rot != 0.0 or cfo != 0.0:
            n = np.arange(FRAME_LEN)
            sig = sig * np.exp(1j * (rot + 2.0 * np.pi * cfo * n))
    if not np.isinf(snr_db):
        noise_var = 10.0 ** (-snr_db / 10.0)
        noise = np.sqrt(noise_var / 2.0) * (
            rng.standard_normal(FRAME_LEN) + 1j * rng.standard_normal(FRAME_LEN)
        )
        sig = sig + noise
    return np.stack([sig.real, sig.imag]).astype(np.float32)


def transform_frame(iq: np.ndarray, scale: float, rotation: float, shift: int) -> np.ndarray:
    """Apply a fixed amplitude scale, phase rotation, and circular shift."""
    c = iq[0].astype(np.float64) + 1j * iq[1].astype(np.float64)
    c = (scale * np.exp(1j * rotation)) * c
    c = np.roll(c, int(shift))
    return np.stack([c.real, c.imag]).astype(np.float32)


def augment(frame: LabeledFrame, rng) -> LabeledFrame:
    """Random scale/rotation/shift; the label and SNR tag are untouched."""
    scale = rng.uniform(0.8, 1.2)
    rotation = rng.uniform(0.0, 2.0 * np.pi)
    shift = int(rng.integers(0, FRAME_LEN))
    return LabeledFrame(transform_frame(frame.iq, scale, rotation, shift), frame.label, frame.snr_db)


def augment_batch(iq: np.ndarray, rng) -> np.ndarray:
    """Vectorized augment over a (n, 2, 128) batch."""
    n = iq.shape[0]
    scale = rng.uniform(0.8, 1.2, n)
    rotation = rng.uniform(0.0, 2.0 * np.pi, n)
    shift = rng.integers(0, FRAME_LEN, n)
    c = iq[:, 0].astype(np.float64) + 1j * iq[:, 1].astype(np.float64)
    c = c * (scale * np.exp(1j * rotation))[:, None]
    cols = (np.arange(FRAME_LEN)[None, :] - shift[:, None]) % FRAME_LEN
    c = np.take_along_axis(c, cols, axis=1)
    return np.stack([c.real, c.imag], axis=1).astype(np.float32)


# ---------------------------------------------------------------------------
# dataset assembly


def _cell_rng(seed: int, scheme_idx: int, snr_idx: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAM_CELL, scheme_idx, snr_idx)))


def generate_dataset(config: GenConfig) -> Dataset:
    """Generate the full stratified dataset; fully determined by the config."""
    n_cell = config.frames_per_scheme_per_snr
    imp = config.impairments
    jitter = imp.timing_jitter and imp.jitter_max > 0
    gen_len = FRAME_LEN + (imp.jitter_max if jitter else 0)
    n_tr, n_va, n_te = split_counts(n_cell)
    cell_split = np.array([SPLIT_TRAIN] * n_tr + [SPLIT_VAL] * n_va + [SPLIT_TEST] * n_te, dtype=np.uint8)

    iq_all, labels, snrs, splits = [], [], [], []
    for scheme in ModulationScheme:
        for snr_idx, snr in enumerate(config.snr_grid):
            rng = _cell_rng(config.rng_seed, int(scheme), snr_idx)
            for _ in range(n_cell):
                clean = modulate(scheme, rng, gen_len, config.samples_per_symbol)
                if jitter:
                    off = int(rng.integers(0, imp.jitter_max + 1))
                    clean = clean[off : off + FRAME_LEN]
                    clean = clean / np.sqrt(np.mean(np.abs(clean) ** 2))
                iq_all.append(apply_channel(clean, snr, imp, rng))
            labels.append(np.full(n_cell, int(scheme), dtype=np.uint8))
            snrs.append(np.full(n_cell, snr, dtype=np.int16))
            splits.append(cell_split)
    return Dataset(
        iq=np.stack(iq_all),
        labels=np.concatenate(labels),
        snr_db=np.concatenate(snrs),
        split=np.concatenate(splits),
        snr_grid=config.snr_grid,
        frames_per_cell=n_cell,
    )


# ---------------------------------------------------------------------------
# binary format


def save_dataset(dataset: Dataset, path) -> None:
    """Write the little-endian dataset file (header, frames, CRC32 trailer)."""
    n = len(dataset)
    rec = np.zeros(n, dtype=_FRAME_DTYPE)
    rec["iq"] = dataset.iq.reshape(n, -1)
    rec["label"] = dataset.labels
    rec["snr_db"] = dataset.snr_db
    rec["split"] = dataset.split
    body = rec.tobytes()
    header = _DATASET_MAGIC + struct.pack(
        "<HHHIH",
        _DATASET_VERSION,
        NUM_CLASSES,
        len(dataset.snr_grid),
        dataset.frames_per_cell,
        FRAME_LEN,
    )
    header += struct.pack(f"<{len(dataset.snr_grid)}h", *dataset.snr_grid)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_dataset(path) -> Dataset:
    """Read a dataset file, verifying magic, size, and checksum."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_DATASET_MAGIC) + 12:
        raise FileTruncatedError("dataset file shorter than its fixed header")
    if raw[: len(_DATASET_MAGIC)] != _DATASET_MAGIC:
        raise FileFormatError("bad magic bytes; not a dataset file")
    off = len(_DATASET_MAGIC)
    version, n_schemes, n_snrs, frames_per_cell, frame_len = struct.unpack_from("<HHHIH", raw, off)
    off += struct.calcsize("<HHHIH")
    if version != _DATASET_VERSION:
        raise FileFormatError(f"unsupported dataset version {version}")
    if n_schemes != NUM_CLASSES or frame_len != FRAME_LEN:
        raise FileFormatError("header counts do not match the supported layout")
    if len(raw) < off + 2 * n_snrs:
        raise FileTruncatedError("dataset file ends inside the SNR grid")
    snr_grid = struct.unpack_from(f"<{n_snrs}h", raw, off)
    off += 2 * n_snrs
    n = n_schemes * n_snrs * frames_per_cell
    body_size = n * _FRAME_DTYPE.itemsize
    if len(raw) < off + body_size + 4:
        raise FileTruncatedError("dataset file ends inside the frame payload")
    body = raw[off : off + body_size]
    (crc_stored,) = struct.unpack_from("<I", raw, off + body_size)
    if zlib.crc32(body) != crc_stored:
        raise FileChecksumError("dataset body CRC32 mismatch")
    rec = np.frombuffer(body, dtype=_FRAME_DTYPE)
    return Dataset(
        iq=rec["iq"].reshape(n, 2, FRAME_LEN).copy(),
        labels=rec["label"].copy(),
        snr_db=rec["snr_db"].copy(),
        split=rec["split"].copy(),
        snr_grid=tuple(int(s) for s in snr_grid),
        frames_per_cell=frames_per_cell,
    )
