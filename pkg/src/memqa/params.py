"""Named trainable tensors and the binary checkpoint container."""

import struct

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, DataError

CHECKPOINT_MAGIC = b"MEMQACKP"
CHECKPOINT_VERSION = 1

# reserved name prefixes for non-parameter state stored in checkpoints
BN_PREFIX = "__bn__."
ADAM_PREFIX = "__adam__."


class ParamStore:
    """Map from dotted parameter names to tracked tensors.

    Iteration is always sorted by name, so initialization and update
    order are deterministic for a fixed seed.
    """

    def __init__(self, seed=0, dtype=np.float32):
        self.rng_seed = int(seed)
        self.rng = np.random.default_rng(self.rng_seed)
        self.dtype = dtype
        self._params = {}

    def create(self, name, shape, init="uniform", scale=None):
        """Create a tracked tensor.

        init: "uniform" (symmetric, bound `scale`), "zeros", "ones", or
        an ndarray of matching shape.
        """
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        if isinstance(init, np.ndarray):
            if tuple(init.shape) != tuple(shape):
                raise ConfigError(f"{name}: initializer shape {init.shape} != {tuple(shape)}")
            data = init.astype(self.dtype, copy=True)
        elif init == "zeros":
            data = np.zeros(shape, dtype=self.dtype)
        elif init == "ones":
            data = np.ones(shape, dtype=self.dtype)
        elif init == "uniform":
            bound = scale if scale is not None else 0.08
            data = self.rng.uniform(-bound, bound, size=shape).astype(self.dtype)
        else:
            raise ConfigError(f"unknown initializer {init!r}")
        t = Tensor(data, requires_grad=True, dtype=self.dtype)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        return [(n, self._params[n]) for n in self.names()]

    def zero_grads(self):
        for _, p in self.items():
            p.grad[...] = 0.0

    def load_values(self, arrays):
        """Overwrite parameter data from a {name: ndarray} mapping."""
        for name, p in self.items():
            if name not in arrays:
                raise DataError(f"checkpoint missing parameter {name!r}")
            arr = arrays[name]
            if tuple(arr.shape) != p.data.shape:
                raise DataError(f"{name}: checkpoint shape {arr.shape} != {p.data.shape}")
            p.data[...] = arr.astype(p.data.dtype)


def recurrent_init_bound(hidden):
    """Symmetric init bound for recurrent cell weights."""
    return 1.0 / float(np.sqrt(hidden))


def save_checkpoint(path, arrays, header):
    """Write a versioned binary container.

    header: dict with integer fields d, n_words, n_ent_types,
    n_relations.  arrays: {name: ndarray}; values are stored as
    little-endian float32, sorted by name.
    """
    names = sorted(arrays)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIIII", CHECKPOINT_VERSION,
                             int(header.get("d", 0)),
                             int(header.get("n_words", 0)),
                             int(header.get("n_ent_types", 0)),
                             int(header.get("n_relations", 0))))
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a container written by save_checkpoint -> (header, arrays)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version, d, n_words, n_ent_types, n_relations = struct.unpack("<IIIII", fh.read(20))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(4 * n), dtype="<f4").reshape(shape)
            arrays[name] = data.copy()
    header = {"d": d, "n_words": n_words, "n_ent_types": n_ent_types,
              "n_relations": n_relations}
    return header, arrays
