"""
Versioned binary model files: a magic header line followed by a numpy archive.
"""
import io
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .corpus import Vocabulary

PathLike = Union[str, Path]


class ModelFormatError(ValueError):
    """Raised when a model file does not carry the expected header."""


def write_model_file(path: PathLike, magic: str, arrays: Dict[str, np.ndarray]) -> None:
    """
    Write arrays behind a magic header.

    Args:
        path: Target file
        magic (str): Format tag such as ``LPKN1``
        arrays: Named arrays to store
    """
    with open(path, "wb") as handle:
        handle.write(magic.encode("ascii") + b"\n")
        np.savez_compressed(handle, **arrays)


def read_model_file(path: PathLike, magic: str) -> Dict[str, np.ndarray]:
    """
    Read a file written by write_model_file.

    Raises:
        ModelFormatError: If the header does not match ``magic``
    """
    with open(path, "rb") as handle:
        header = handle.readline().rstrip(b"\n")
        if header != magic.encode("ascii"):
            raise ModelFormatError(f"{path} is not a {magic} model file (header {header[:16]!r})")
        payload = io.BytesIO(handle.read())
    with np.load(payload, allow_pickle=False) as archive:
        return {name: archive[name] for name in archive.files}


def vocabulary_arrays(vocab: Vocabulary) -> Dict[str, np.ndarray]:
    return {
        "vocab_words": np.array(vocab.words, dtype=str),
        "vocab_counts": np.array(vocab.counts, dtype=np.int64),
    }


def vocabulary_from_arrays(arrays: Dict[str, np.ndarray]) -> Vocabulary:
    return Vocabulary(
        tuple(str(word) for word in arrays["vocab_words"]),
        tuple(int(count) for count in arrays["vocab_counts"]),
    )
