import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from einops import einsum

from slagrigid import cfg
from slagrigid.numkernel import SymMatrix

FIELD_KEYS = {"n", "origin", "spacing", "shape", "values"}


class FieldFormatError(ValueError):
    pass


class StencilMarginError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GraphField:
    """Samples of a potential F on a uniform grid; values are indexed [i_1, ..., i_n]."""

    n: int
    origin: np.ndarray
    spacing: float
    shape: Tuple[int, ...]
    values: np.ndarray
    source: str = "<memory>"

    def __post_init__(self):
        where = self.source
        if not 1 <= self.n <= cfg.max_field_dim:
            raise FieldFormatError(f"{where}: n must be in 1..{cfg.max_field_dim}, got {self.n}")
        origin = np.array(self.origin, dtype=float).reshape(-1)
        if len(origin) != self.n or not np.all(np.isfinite(origin)):
            raise FieldFormatError(f"{where}: origin must hold {self.n} finite numbers")
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise FieldFormatError(f"{where}: spacing must be positive, got {self.spacing}")
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != self.n or any(s < 1 for s in shape) or shape != tuple(self.shape):
            raise FieldFormatError(f"{where}: shape must hold {self.n} positive integers, got {list(self.shape)}")
        values = np.array(self.values, dtype=float)
        if values.size != math.prod(shape):
            raise FieldFormatError(
                f"{where}: shape {list(shape)} needs {math.prod(shape)} values, got {values.size}"
            )
        values = values.reshape(shape)
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            raise FieldFormatError(f"{where}: non-finite value at node {tuple(int(i) for i in bad[0])}")
        values.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    def coordinates(self, p: Sequence[int]) -> np.ndarray:
        return self.origin + self.spacing * np.asarray(p, dtype=float)

    def center_index(self) -> Tuple[int, ...]:
        return tuple(s // 2 for s in self.shape)

    def margin_of(self, p: Sequence[int]) -> int:
        """Distance in nodes from p to the nearest boundary."""
        p = tuple(int(i) for i in p)
        if len(p) != self.n:
            raise StencilMarginError(f"index {p} does not address a {self.n}-dimensional grid")
        if any(not 0 <= i < s for i, s in zip(p, self.shape)):
            raise StencilMarginError(f"index {p} lies outside the grid {list(self.shape)}")
        return min(min(i, s - 1 - i) for i, s in zip(p, self.shape))

    def patch(self, p: Sequence[int], radius: int) -> np.ndarray:
        """The (2 radius + 1)^n block of samples centered at p."""
        margin = self.margin_of(p)
        if margin < radius:
            raise StencilMarginError(
                f"index {tuple(p)} is {margin} nodes from the boundary, the stencil needs {radius}"
            )
        return self.values[tuple(slice(i - radius, i + radius + 1) for i in p)]

    def interior_indices(self, margin: int, stride: int = 1) -> Iterator[Tuple[int, ...]]:
        """Nodes at least `margin` from the boundary whose offset from the center is a multiple of stride."""
        if stride < 1:
            raise ValueError(f"stride must be positive, got {stride}")
        center = self.center_index()
        axes = []
        for c, s in zip(center, self.shape):
            first = margin + (c - margin) % stride
            axes.append(range(first, s - margin, stride))
        return (tuple(int(i) for i in p) for p in itertools.product(*axes))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "origin": self.origin.tolist(),
            "spacing": self.spacing,
            "shape": list(self.shape),
            "values": self.values.reshape(-1).tolist(),
        }


def centered_grid(n: int, spacing: float, half_width: float) -> Tuple[np.ndarray, Tuple[int, ...], Tuple[np.ndarray, ...]]:
    """Origin, shape and coordinate arrays of a grid centered at 0 reaching +-half_width."""
    if not (spacing > 0 and half_width > 0):
        raise FieldFormatError(f"spacing and half-width must be positive, got {spacing} and {half_width}")
    m = int(round(half_width / spacing))
    if m < 1:
        raise FieldFormatError(f"half-width {half_width} is narrower than one spacing {spacing}")
    axis = spacing * np.arange(-m, m + 1)
    shape = (2 * m + 1,) * n
    coords = np.meshgrid(*([axis] * n), indexing="ij")
    return np.full(n, -m * spacing), shape, tuple(coords)


def _parse_int(text: str, descriptor: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FieldFormatError(f"{descriptor}: expected an integer dimension, got {text!r}") from None


def _parse_floats(text: str, descriptor: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise FieldFormatError(f"{descriptor}: expected comma-separated numbers, got {text!r}") from None


def quadratic_field(a: SymMatrix, spacing: float = cfg.quadratic_spacing, half_width: float = cfg.quadratic_half_width, source: str = "quadratic") -> GraphField:
    """F(x) = x^T A x / 2."""
    dense = a.to_dense()
    origin, shape, coords = centered_grid(a.n, spacing, half_width)
    x = np.stack(coords, axis=-1)
    values = 0.5 * einsum(x, dense, x, "... i, i j, ... j -> ...")
    return GraphField(a.n, origin, spacing, shape, values, source)


def paraboloid_field(n: int, c: float, spacing: float = cfg.paraboloid_spacing, half_width: float = cfg.paraboloid_half_width, source: str = "paraboloid") -> GraphField:
    """F(x) = c |x|^2 / 2."""
    origin, shape, coords = centered_grid(n, spacing, half_width)
    values = 0.5 * c * sum(x**2 for x in coords)
    return GraphField(n, origin, spacing, shape, values, source)


def harmonic_expcos_field(spacing: float = cfg.expcos_spacing, half_width: float = cfg.expcos_half_width) -> GraphField:
    """F(x, y) = e^x cos y, a special Lagrangian potential with Im det(I + i Hess F) = 0."""
    origin, shape, (x, y) = centered_grid(2, spacing, half_width)
    return GraphField(2, origin, spacing, shape, np.exp(x) * np.cos(y), "harmonic_expcos")


def builtin_field(descriptor: str, spacing: Optional[float] = None, half_width: Optional[float] = None) -> GraphField:
    """
    Sample one of the closed-form potentials:

        quadratic:<n>:<packed upper triangle of A>
        paraboloid:<n>:<c>
        harmonic_expcos
    """
    name, *params = descriptor.split(":")
    if name == "harmonic_expcos":
        if params:
            raise FieldFormatError(f"{descriptor}: harmonic_expcos takes no parameters")
        return harmonic_expcos_field(
            spacing or cfg.expcos_spacing, half_width or cfg.expcos_half_width
        )
    if name in ("quadratic", "paraboloid"):
        if len(params) != 2:
            raise FieldFormatError(f"{descriptor}: expected {name}:<n>:<parameters>")
        n = _parse_int(params[0], descriptor)
        if not 1 <= n <= cfg.max_field_dim:
            raise FieldFormatError(f"{descriptor}: n must be in 1..{cfg.max_field_dim}, got {n}")
        numbers = _parse_floats(params[1], descriptor)
        if name == "quadratic":
            try:
                a = SymMatrix(n, tuple(numbers))
            except ValueError as e:
                raise FieldFormatError(f"{descriptor}: {e}") from e
            return quadratic_field(
                a,
                spacing or cfg.quadratic_spacing,
                half_width or cfg.quadratic_half_width,
                descriptor,
            )
        if len(numbers) != 1:
            raise FieldFormatError(f"{descriptor}: paraboloid takes a single constant c")
        return paraboloid_field(
            n,
            numbers[0],
            spacing or cfg.paraboloid_spacing,
            half_width or cfg.paraboloid_half_width,
            descriptor,
        )
    raise FieldFormatError(f"unknown builtin field {name!r}")


def is_builtin(source: str) -> bool:
    name = source.removeprefix("builtin:").split(":")[0]
    return name in ("quadratic", "paraboloid", "harmonic_expcos")


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return _is_int(value) or isinstance(value, float)


def read_field_file(path) -> GraphField:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FieldFormatError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise FieldFormatError(f"{path}: top level must be an object")
    unknown = sorted(set(data) - FIELD_KEYS)
    if unknown:
        raise FieldFormatError(f"{path}: unknown keys {unknown}")
    missing = sorted(FIELD_KEYS - set(data))
    if missing:
        raise FieldFormatError(f"{path}: missing keys {missing}")

    spacing = data["spacing"]
    if isinstance(spacing, list):
        if not spacing or any(s != spacing[0] for s in spacing):
            raise FieldFormatError(f"{path}: key 'spacing' must be uniform, got {spacing}")
        spacing = spacing[0]
    if not _is_int(data["n"]):
        raise FieldFormatError(f"{path}: key 'n' must be an integer")
    for key in ("origin", "shape", "values"):
        if not isinstance(data[key], list):
            raise FieldFormatError(f"{path}: key {key!r} must be an array")
    if not _is_number(spacing):
        raise FieldFormatError(f"{path}: key 'spacing' must be a number, got {spacing!r}")
    entry_types = (
        ("origin", _is_number, "a number"),
        ("shape", _is_int, "an integer"),
        ("values", _is_number, "a number"),
    )
    for key, check, kind in entry_types:
        for idx, item in enumerate(data[key]):
            if not check(item):
                raise FieldFormatError(f"{path}: key {key!r} entry {idx} must be {kind}, got {item!r}")
    try:
        return GraphField(
            data["n"], data["origin"], float(spacing), tuple(data["shape"]), data["values"], str(path)
        )
    except FieldFormatError:
        raise
    except (TypeError, ValueError) as e:
        raise FieldFormatError(f"{path}: {e}") from e


def write_field_file(field: GraphField, path):
    Path(path).write_text(json.dumps(field.to_dict()), encoding="utf-8")


def load_field(source: str, spacing: Optional[float] = None, half_width: Optional[float] = None) -> GraphField:
    """A builtin descriptor (optionally prefixed with 'builtin:') or the path of a JSON field file."""
    if is_builtin(source):
        return builtin_field(source.removeprefix("builtin:"), spacing, half_width)
    if source.startswith("builtin:"):
        raise FieldFormatError(f"unknown builtin field {source!r}")
    return read_field_file(source)
