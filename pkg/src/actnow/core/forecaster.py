# Abstract base for forecasters driven by the online engine
from __future__ import annotations

import json
import logging
import os
import struct
from abc import ABC
from abc import abstractmethod

import numpy as np

from actnow.errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"ACTNOWCK"
HEADER_LEN = struct.Struct("<Q")


class StreamForecaster(ABC):
    # Forecasting

    @abstractmethod
    def predict(self, X: np.ndarray) -> np.ndarray:
        """
        Gradient-free forecast.
        Args:
            X (np.ndarray): input window [L_in x N]

        Returns:
            np.ndarray: forecast [L_out x N]
        """

    # Replicas

    @abstractmethod
    def clone_params(self) -> StreamForecaster:
        """
        Deep copy of every parameter and optimizer state.
        Returns:
            StreamForecaster: independent replica
        """

    @abstractmethod
    def adopt_params(self, other: StreamForecaster) -> None:
        """
        Replace live parameters and optimizer states with those of `other`.
        Args:
            other (StreamForecaster): replica of identical architecture
        """

    # Checkpoint handling

    @abstractmethod
    def state_arrays(self) -> dict[str, np.ndarray]:
        """Every array needed to resume, in a stable order."""

    @abstractmethod
    def checkpoint_meta(self) -> dict:
        """JSON-serializable architecture and optimizer settings."""

    @classmethod
    @abstractmethod
    def from_checkpoint(cls, meta: dict, arrays: dict[str, np.ndarray]) -> StreamForecaster:
        """Rebuild an instance from `checkpoint_meta` output and its arrays."""

    def save_checkpoint(self, path: str) -> None:
        """
        Write a checkpoint: magic, header length, JSON manifest, little-endian float64 payload.
        Args:
            path (str): destination file; its directory is created when missing
        """
        directory = os.path.dirname(path)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
            logger.info("Created checkpoint directory %s", directory)

        arrays = self.state_arrays()
        header = {
            "version": 1,
            "kind": type(self).__name__,
            "meta": self.checkpoint_meta(),
            "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays.items()],
        }
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(HEADER_LEN.pack(len(encoded)))
            f.write(encoded)
            for a in arrays.values():
                f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        logger.info("Checkpoint written to %s (%d arrays)", path, len(arrays))

    @classmethod
    def load_checkpoint(cls, path: str) -> StreamForecaster:
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not an actnow checkpoint")
        offset = len(CHECKPOINT_MAGIC)
        if len(blob) < offset + HEADER_LEN.size:
            raise CheckpointError(f"{path} is truncated before its manifest")
        (header_len,) = HEADER_LEN.unpack_from(blob, offset)
        offset += HEADER_LEN.size
        try:
            header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
        except ValueError as error:
            raise CheckpointError(f"Corrupt manifest in {path}: {error}") from error
        offset += header_len
        if header.get("kind") != cls.__name__:
            raise CheckpointError(f"{path} holds a {header.get('kind')}, not a {cls.__name__}")

        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            end = offset + 8 * count
            if end > len(blob):
                raise CheckpointError(f"{path} is truncated at array {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).astype(np.float64)
            offset = end
        if offset != len(blob):
            raise CheckpointError(f"{path} has {len(blob) - offset} trailing bytes")
        return cls.from_checkpoint(header["meta"], arrays)
