"""Spectral-domain filtering: band gains, masks, and cross-shape transfer."""

from __future__ import annotations

import json

import numpy as np

from .errors import (
    ChannelMismatchError,
    FilterShapeMismatchError,
    MapOutOfRangeError,
    ParseError,
)
from .spectral import reconstruct


class FilterSpec:
    """Piecewise-constant gain over time plus an optional spatial mask.

    ``bands`` is a list of ``(t_low, t_high, gain)`` intervals; outside all
    intervals the gain defaults to 1, so a an empty band list is the
    all-pass filter.  ``mask`` is a per-element weight in [0, 1] blending
    the filtered signal with the untouched one.
    """

    def __init__(self, bands=(), mask=None):
        parsed = []
        for band in bands:
            try:
                a, b, g = (float(band[k]) for k in ("a", "b", "gain")) \
                    if isinstance(band, dict) else map(float, band)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed band entry {band!r}") from exc
            if not a <= b:
                raise ParseError(f"band has a > b: ({a}, {b})")
            if g < 0:
                raise ParseError("band gain must be nonnegative")
            parsed.append((a, b, g))
        parsed.sort()
        for (a1, b1, _), (a2, _, _) in zip(parsed, parsed[1:]):
            if a2 < b1:
                raise ParseError(f"bands overlap near t={a2}")
        self.bands = parsed
        self.mask = None
        if mask is not None:
            mask = np.asarray(mask, dtype=np.float64).ravel()
            if mask.size and (mask.min() < 0.0 or mask.max() > 1.0):
                raise ParseError("mask values must lie in [0, 1]")
            self.mask = mask

    def gain_at(self, times):
        times = np.asarray(times, dtype=np.float64)
        gains = np.ones_like(times)
        for a, b, g in self.bands:
            gains[(times >= a) & (times <= b)] = g
        return gains

    def is_all_pass(self):
        return self.mask is None and all(g == 1.0 for _, _, g in self.bands)

    # -- JSON round-trip ----------------------------------------------------

    def to_json(self):
        doc = {"bands": [{"a": a, "b": b, "gain": g} for a, b, g in self.bands]}
        if self.mask is not None:
            doc["mask"] = self.mask.tolist()
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text, mask_loader=None):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad filter JSON: {exc}") from exc
        return cls.from_json_dict(doc, mask_loader)

    @classmethod
    def from_json_dict(cls, doc, mask_loader=None):
        if not isinstance(doc, dict) or not isinstance(doc.get("bands", []), list):
            raise ParseError("filter JSON must be an object with a 'bands' list")
        mask = doc.get("mask")
        if mask is None and doc.get("maskPath"):
            if mask_loader is None:
                raise ParseError("filter references maskPath but no loader given")
            mask = mask_loader(doc["maskPath"])
        try:
            return cls(doc.get("bands", []), mask)
        except ParseError:
            raise
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed filter spec: {exc}") from exc


class CorrespondenceMap:
    """Target-to-source element map: ``preimage[i]`` is the source element
    whose details land on target element ``i``."""

    def __init__(self, preimage):
        self.preimage = np.asarray(preimage, dtype=np.int64).ravel()

    def __len__(self):
        return len(self.preimage)

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    @classmethod
    def from_file(cls, path):
        try:
            data = np.loadtxt(path, dtype=np.int64, ndmin=1)
        except (OSError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls(data)

    def to_file(self, path):
        np.savetxt(path, self.preimage[:, None], fmt="%d")


def apply_filter(dec, spec):
    """Filtered reconstruction, optionally blended through the spatial mask.

    Without a mask this is the plain gain-weighted synthesis.  With a mask
    ``rho`` the result is ``rho * filtered + (1 - rho) * original`` where the
    original is the all-pass reconstruction.
    """
    gains = spec.gain_at(dec.times)
    filtered = reconstruct(dec, gains)
    if spec.mask is None:
        return filtered
    rho = spec.mask
    if rho.shape[0] != dec.n_elements:
        raise FilterShapeMismatchError(
            f"mask has {rho.shape[0]} entries, decomposition has {dec.n_elements}"
        )
    original = reconstruct(dec, None)
    return rho[:, None] * filtered + (1.0 - rho)[:, None] * original


def detail_transfer(source, target, band, mapping):
    """Add a band of source components to the target signal through a map.

    ``band = (a, b)`` selects source components by time value; the selected
    weighted components are pulled back through ``mapping`` (one source
    element per target element) and added to the target's all-pass
    reconstruction.  The source mean is never transferred.
    """
    if source.channels != target.channels:
        raise ChannelMismatchError(
            f"source has {source.channels} channels, target {target.channels}"
        )
    pre = mapping.preimage
    if len(pre) != target.n_elements:
        raise MapOutOfRangeError(
            f"map covers {len(pre)} target elements, decomposition has {target.n_elements}"
        )
    if len(pre) and (pre.min() < 0 or pre.max() >= source.n_elements):
        raise MapOutOfRangeError("map references source elements out of range")

    a, b = float(band[0]), float(band[1])
    out = reconstruct(target, None)
    if a > b:
        return out
    select = (source.times >= a) & (source.times <= b)
    if not select.any():
        return out
    weights = source.weights()[select]
    comps = source.components[select][:, pre, :]
    return out + np.tensordot(weights, comps, axes=(0, 0))
