"""Named-tensor container for every learned weight in a model."""
from __future__ import annotations

import re
from collections.abc import Mapping

import numpy as np

from .errors import MissingWeightsError, ModelFormatError


class NetParams(Mapping):
    """Immutable mapping ``name -> float32 ndarray``.

    Architecture metadata (latent size, feature size, layer widths, SR
    factor) is derived from tensor shapes rather than stored separately, so a
    loaded file is self-describing.
    """

    def __init__(self, tensors=None):
        self._tensors = {}
        for name, value in dict(tensors or {}).items():
            arr = np.array(value, dtype=np.float32, copy=True)
            arr.setflags(write=False)
            self._tensors[str(name)] = arr

    def __getitem__(self, name):
        try:
            return self._tensors[name]
        except KeyError:
            raise MissingWeightsError(f"missing tensor {name!r}") from None

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def __repr__(self):
        return f"NetParams({len(self)} tensors, {self.n_scalars} scalars)"

    @property
    def n_scalars(self):
        return int(sum(t.size for t in self._tensors.values()))

    def with_prefix(self, prefix):
        return {k: v for k, v in self._tensors.items() if k.startswith(prefix)}

    def updated(self, mapping):
        new = dict(self._tensors)
        new.update(mapping)
        return NetParams(new)

    def equal(self, other) -> bool:
        """Bitwise equality of names, shapes and payloads."""
        if set(self) != set(other):
            return False
        return all(
            self[k].shape == other[k].shape and self[k].tobytes() == other[k].tobytes() for k in self
        )

    def count_indexed(self, pattern):
        """Number of distinct integers matched by ``pattern`` (one ``(\\d+)`` group)."""
        rx = re.compile(pattern)
        found = {int(m.group(1)) for k in self for m in [rx.fullmatch(k)] if m}
        if found and found != set(range(len(found))):
            raise ModelFormatError(f"non-contiguous indices for {pattern}")
        return len(found)

    def expect_shape(self, name, shape):
        arr = self[name]
        if tuple(arr.shape) != tuple(shape):
            raise ModelFormatError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
        return arr

    @property
    def metadata(self):
        meta = {}
        if "film_map.layers.0.weight" in self:
            meta["d_z"] = int(self["film_map.layers.0.weight"].shape[1])
        elif "style.layers.0.weight" in self:
            meta["d_z"] = int(self["style.layers.0.weight"].shape[1])
        if "siren.feature.0.weight" in self:
            meta["d_f"] = int(self["siren.feature.0.weight"].shape[0])
        n_trunk = self.count_indexed(r"siren\.layers\.(\d+)\.weight")
        if n_trunk:
            meta["trunk_widths"] = [int(self[f"siren.layers.{i}.weight"].shape[0]) for i in range(n_trunk)]
        for net in ("sr_fg", "sr_bg"):
            n_up = self.count_indexed(net + r"\.up\.(\d+)\.conv\.weight")
            if n_up:
                meta[f"{net}_factor"] = 2 ** n_up
        return meta


def require(params, name):
    if params is None:
        raise MissingWeightsError(f"missing tensor {name!r} (no parameters supplied)")
    return params[name]
