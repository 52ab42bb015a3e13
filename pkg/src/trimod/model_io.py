"""Single-file model container: magic, UTF-8 header, raw float32 payload.

Layout:

    TRIMOD1\\n
    version 1\\n
    config <n>\\n          then n lines  `<key> <value>`
    words <n>\\n           then n lines, one word each
    chars <n>\\n           then one line of n space-separated codepoints
    segchars <n>\\n        then one line of n space-separated codepoints
    tensors <n>\\n         then n lines  `<name> <rank> <dim...>`
    payload\\n
    <little-endian float32 values, manifest order>

Config keys are sorted and prefixed `model.` / `train.`; tensor manifest
order is lexicographic by name. Identical bundles therefore serialize to
identical bytes. Values narrow to 32 bits on disk; loading widens back to
the 64-bit working precision.
"""

from __future__ import annotations

import logging
import typing
from dataclasses import dataclass, fields

import numpy as np

from .model import ModelConfig, TriModTagger
from .training import TrainConfig

logger = logging.getLogger(__name__)

MAGIC = b"TRIMOD1\n"
FORMAT_VERSION = 1


class ModelIOError(ValueError):
    pass


@dataclass
class ModelBundle:
    """Everything needed to reconstruct a tagger, plus the training snapshot."""

    model_config: ModelConfig
    train_config: TrainConfig
    words: list
    chars: list
    seg_chars: list
    tensors: dict  # name -> float64 ndarray
    version: int = FORMAT_VERSION


def _encode_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(raw: str, typ):
    if typ is bool:
        return raw == "true"
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is tuple:
        return tuple(v for v in raw.split(",") if v)
    return raw


def _config_lines(bundle: ModelBundle) -> list[str]:
    pairs = {}
    for prefix, cfg in (("model", bundle.model_config), ("train", bundle.train_config)):
        for f in fields(cfg):
            pairs[f"{prefix}.{f.name}"] = _encode_value(getattr(cfg, f.name))
    return [f"{key} {pairs[key]}" for key in sorted(pairs)]


def _parse_config(pairs: dict) -> tuple[ModelConfig, TrainConfig]:
    hints = {
        "model": typing.get_type_hints(ModelConfig),
        "train": typing.get_type_hints(TrainConfig),
    }
    kwargs = {"model": {}, "train": {}}
    for key, raw in pairs.items():
        prefix, _, name = key.partition(".")
        if prefix in hints and name in hints[prefix]:
            kwargs[prefix][name] = _coerce(raw, hints[prefix][name])
        else:
            logger.warning("ignoring unknown config key %r in model file", key)
    return ModelConfig(**kwargs["model"]), TrainConfig(**kwargs["train"])


def save(bundle: ModelBundle, path):
    names = sorted(bundle.tensors)
    header = [f"version {bundle.version}"]
    config_lines = _config_lines(bundle)
    header.append(f"config {len(config_lines)}")
    header.extend(config_lines)
    header.append(f"words {len(bundle.words)}")
    header.extend(bundle.words)
    header.append(f"chars {len(bundle.chars)}")
    header.append(" ".join(str(ord(c)) for c in bundle.chars))
    header.append(f"segchars {len(bundle.seg_chars)}")
    header.append(" ".join(str(ord(c)) for c in bundle.seg_chars))
    header.append(f"tensors {len(names)}")
    for name in names:
        arr = bundle.tensors[name]
        header.append(f"{name} {arr.ndim} " + " ".join(str(d) for d in arr.shape))
    header.append("payload")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(("\n".join(header) + "\n").encode("utf-8"))
        for name in names:
            fh.write(np.ascontiguousarray(bundle.tensors[name], dtype="<f4").tobytes())


def _read_line(fh) -> str:
    line = fh.readline()
    if not line:
        raise ModelIOError("unexpected end of header")
    return line.decode("utf-8").rstrip("\n")


def _read_counted(fh, section: str) -> int:
    line = _read_line(fh)
    tag, _, count = line.partition(" ")
    if tag != section:
        raise ModelIOError(f"expected section {section!r}, found {line!r}")
    return int(count)


def load(path) -> ModelBundle:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ModelIOError(
                f"unsupported model file version: expected magic {MAGIC!r}, got {magic!r}"
            )
        version = _read_counted(fh, "version")
        if version != FORMAT_VERSION:
            raise ModelIOError(f"unsupported model format version {version}")

        pairs = {}
        for _ in range(_read_counted(fh, "config")):
            key, _, value = _read_line(fh).partition(" ")
            pairs[key] = value
        model_config, train_config = _parse_config(pairs)

        words = [_read_line(fh) for _ in range(_read_counted(fh, "words"))]

        def read_chars(section):
            count = _read_counted(fh, section)
            line = _read_line(fh)
            codes = [int(c) for c in line.split()] if line else []
            if len(codes) != count:
                raise ModelIOError(f"{section}: declared {count} entries, found {len(codes)}")
            return [chr(c) for c in codes]

        chars = read_chars("chars")
        seg_chars = read_chars("segchars")

        manifest = []
        for _ in range(_read_counted(fh, "tensors")):
            parts = _read_line(fh).split(" ")
            name, rank = parts[0], int(parts[1])
            dims = tuple(int(d) for d in parts[2 : 2 + rank])
            if len(dims) != rank:
                raise ModelIOError(f"tensor {name!r}: manifest rank/dims mismatch")
            manifest.append((name, dims))
        if _read_line(fh) != "payload":
            raise ModelIOError("missing payload marker")

        payload = fh.read()
        expected = sum(int(np.prod(dims)) for _, dims in manifest) * 4
        if len(payload) < expected:
            raise ModelIOError(
                f"unexpected end of payload: need {expected} bytes, found {len(payload)}"
            )
        if len(payload) > expected:
            raise ModelIOError(
                f"payload/manifest mismatch: {len(payload)} bytes for {expected} declared"
            )
        tensors = {}
        offset = 0
        for name, dims in manifest:
            count = int(np.prod(dims))
            arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            tensors[name] = arr.astype(np.float64).reshape(dims)
            offset += count * 4
    return ModelBundle(model_config, train_config, words, chars, seg_chars, tensors, version)


def tagger_to_bundle(tagger: TriModTagger, train_config: TrainConfig | None = None) -> ModelBundle:
    return ModelBundle(
        model_config=tagger.config,
        train_config=train_config or TrainConfig(),
        words=tagger.word_table.words,
        chars=tagger.char_table.chars,
        seg_chars=tagger.segmenter.chars.chars,
        tensors={p.name: p.data.copy() for p in tagger.all_params()},
    )


def tagger_from_bundle(bundle: ModelBundle) -> TriModTagger:
    tagger = TriModTagger(
        bundle.model_config, bundle.words, bundle.chars, seg_alphabet=bundle.seg_chars
    )
    for p in tagger.all_params():
        if p.name not in bundle.tensors:
            raise ModelIOError(f"model file is missing tensor {p.name!r}")
        saved = bundle.tensors[p.name]
        if saved.shape != p.data.shape:
            raise ModelIOError(
                f"tensor {p.name!r} has shape {saved.shape}, expected {p.data.shape}"
            )
        p.data[:] = saved
    known = {p.name for p in tagger.all_params()}
    for name in bundle.tensors:
        if name not in known:
            logger.warning("ignoring unknown tensor %r in model file", name)
    return tagger
