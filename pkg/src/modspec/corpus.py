"""Audio ingestion, corpus manifests, and binary persistence.

Wire formats (all little-endian):

Feature file (one per utterance)
    magic "FDLP" | u16 version=1 | u16 band_count | u32 frame_count
    | f32 frame_rate_hz | i64 masked_start (-1 if none) | i64 masked_end
    | frames row-major f32

Checkpoint file
    magic "MODP" | u16 version=1 | u32 field_count | field_count x u32 config
    (input_dim, model_dim, layer_count, head_count, ffn_dim, max_frames, seed)
    | u32 tensor_count | directory entries (u16 name_len, name utf-8, u8 ndim,
    ndim x u32 dims, u64 data offset) | tensor data f32

Manifest: JSON lines, one object per utterance: {"id", "path", "duration_s"};
paths are relative to the corpus root (the manifest file's directory when
loaded from disk).
"""

from __future__ import annotations

import json
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import AudioBuffer, FdlpSpectrogram
from .errors import ConfigurationError, FormatError

FEATURE_MAGIC = b"FDLP"
FEATURE_VERSION = 1
CHECKPOINT_MAGIC = b"MODP"
CHECKPOINT_VERSION = 1
CONFIG_FIELD_ORDER = ("input_dim", "model_dim", "layer_count", "head_count",
                      "ffn_dim", "max_frames", "seed")


# --------------------------------------------------------------------------- WAV

def read_wav(path: str | Path, require_rate: int | None = 16000) -> AudioBuffer:
    """Decode a PCM16 mono WAV into normalized float samples (scale 1/32768)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n = wav.getnframes()
            raw = wav.readframes(n)
    except wave.Error as exc:
        raise FormatError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV header") from exc
    if channels != 1:
        raise FormatError(f"{path}: expected mono audio, file has {channels} channels")
    if width != 2:
        raise FormatError(f"{path}: expected 16-bit PCM, sample width is {width} bytes")
    if require_rate is not None and rate != require_rate:
        raise ConfigurationError(f"{path}: expected {require_rate} Hz, file is {rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples=samples, sample_rate_hz=rate)


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    """Write an AudioBuffer as PCM16 mono; values are clipped to [-1, 1)."""
    scaled = np.clip(audio.samples, -1.0, 32767.0 / 32768.0)
    pcm = np.round(scaled * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(audio.sample_rate_hz)
        wav.writeframes(pcm.tobytes())


def wav_duration_s(path: str | Path) -> float:
    """Duration from the WAV header, without decoding the audio payload."""
    try:
        with wave.open(str(path), "rb") as wav:
            return wav.getnframes() / wav.getframerate()
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: unreadable WAV header ({exc})") from exc


# --------------------------------------------------------------------------- manifests

@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    audio_path: str              # relative to the corpus root
    duration_s: float


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    corpus_root: Path

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.audio_path)
        return p if p.is_absolute() else self.corpus_root / p


def scan_corpus(root: str | Path, pattern: str = "*.wav") -> CorpusManifest:
    """Recursively discover WAV files under root; ids come from relative paths."""
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"{root}: not a readable directory")
    entries = []
    for path in sorted(root.rglob(pattern)):
        rel = path.relative_to(root).as_posix()
        utt_id = rel[:-len(path.suffix)] if path.suffix else rel
        entries.append(ManifestEntry(utterance_id=utt_id, audio_path=rel,
                                     duration_s=wav_duration_s(path)))
    entries.sort(key=lambda e: e.utterance_id)
    ids = [e.utterance_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("duplicate utterance ids in corpus scan")
    return CorpusManifest(entries=entries, corpus_root=root)


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps({"id": e.utterance_id, "path": e.audio_path,
                                 "duration_s": e.duration_s}) + "\n")


def load_manifest(path: str | Path, corpus_root: str | Path | None = None) -> CorpusManifest:
    """Read a JSON-lines manifest; relative paths resolve against its directory."""
    path = Path(path)
    root = Path(corpus_root) if corpus_root is not None else path.parent
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append(ManifestEntry(utterance_id=obj["id"],
                                             audio_path=obj["path"],
                                             duration_s=float(obj["duration_s"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad manifest line ({exc})") from exc
    return CorpusManifest(entries=entries, corpus_root=root)


# --------------------------------------------------------------------------- features

_FEATURE_HEADER = struct.Struct("<4sHHIfqq")


def write_features(path: str | Path, spectrogram: FdlpSpectrogram) -> None:
    frames = np.ascontiguousarray(spectrogram.frames, dtype="<f4")
    if spectrogram.masked_frame_range is not None:
        masked_start, masked_end = spectrogram.masked_frame_range
    else:
        masked_start = masked_end = -1
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION,
                                  frames.shape[1], frames.shape[0],
                                  spectrogram.frame_rate_hz,
                                  masked_start, masked_end)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frames.tobytes())


def read_features(path: str | Path) -> FdlpSpectrogram:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _FEATURE_HEADER.size:
        raise FormatError(f"{path}: truncated feature header")
    magic, version, bands, frame_count, rate, m_start, m_end = \
        _FEATURE_HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported feature version {version}")
    expected = _FEATURE_HEADER.size + 4 * bands * frame_count
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    frames = np.frombuffer(blob, dtype="<f4", offset=_FEATURE_HEADER.size)
    frames = frames.reshape(frame_count, bands).astype(np.float64)
    masked = None if m_start < 0 else (int(m_start), int(m_end))
    return FdlpSpectrogram(frames=frames, frame_rate_hz=float(rate),
                           masked_frame_range=masked)


# --------------------------------------------------------------------------- checkpoints

def write_checkpoint(path: str | Path, config_fields: dict[str, int],
                     tensors: dict[str, np.ndarray]) -> None:
    """Serialize named f32 tensors plus the integer config block."""
    missing = [k for k in CONFIG_FIELD_ORDER if k not in config_fields]
    if missing:
        raise ConfigurationError(f"checkpoint config missing fields {missing}")
    head = bytearray()
    head += CHECKPOINT_MAGIC
    head += struct.pack("<HI", CHECKPOINT_VERSION, len(CONFIG_FIELD_ORDER))
    for key in CONFIG_FIELD_ORDER:
        head += struct.pack("<I", int(config_fields[key]) & 0xFFFFFFFF)
    names = sorted(tensors)
    head += struct.pack("<I", len(names))
    payload = bytearray()
    directory = bytearray()
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        directory += struct.pack("<H", len(encoded)) + encoded
        directory += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            directory += struct.pack("<I", dim)
        directory += struct.pack("<Q", len(payload))
        payload += arr.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(head) + bytes(directory) + bytes(payload))


def read_checkpoint(path: str | Path) -> tuple[dict[str, int], dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()

    view = memoryview(blob)
    pos = 0

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise FormatError(f"{path}: truncated checkpoint")
        out = struct.unpack_from(fmt, view, pos)
        pos += size
        return out

    magic, = take("<4s")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    version, field_count = take("<HI")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if field_count != len(CONFIG_FIELD_ORDER):
        raise FormatError(f"{path}: config block has {field_count} fields, "
                          f"expected {len(CONFIG_FIELD_ORDER)}")
    values = take(f"<{field_count}I")
    config_fields = dict(zip(CONFIG_FIELD_ORDER, (int(v) for v in values)))
    tensor_count, = take("<I")
    entries = []
    for _ in range(tensor_count):
        name_len, = take("<H")
        if pos + name_len > len(blob):
            raise FormatError(f"{path}: truncated checkpoint")
        name = bytes(view[pos:pos + name_len]).decode("utf-8")
        pos += name_len
        ndim, = take("<B")
        shape = take(f"<{ndim}I") if ndim else ()
        offset, = take("<Q")
        entries.append((name, tuple(int(d) for d in shape), int(offset)))
    data_start = pos
    tensors = {}
    for name, shape, offset in entries:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = data_start + offset
        end = start + 4 * count
        if end > len(blob):
            raise FormatError(f"{path}: tensor '{name}' data is truncated")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        tensors[name] = arr.reshape(shape).copy()
    return config_fields, tensors
