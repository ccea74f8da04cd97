"""Exception types raised across the package."""


class ClcError(Exception):
    """Base class for all library errors."""


class ShapeError(ClcError, ValueError):
    pass


class DivisibilityError(ClcError, ValueError):
    pass


class ConstraintError(ClcError, ValueError):
    """A group-parameter pair violates the cost-problem constraints."""


class ConfigParseError(ClcError, ValueError):
    def __init__(self, message: str, position: int | None = None, field: str | None = None):
        self.position = position
        self.field = field
        where = []
        if position is not None:
            where.append(f"at char {position}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class LayerShapeError(ShapeError):
    """Shape mismatch inside a network forward pass, tagged with the layer index."""

    def __init__(self, layer_index: int, layer_name: str, message: str):
        self.layer_index = layer_index
        self.layer_name = layer_name
        super().__init__(f"layer {layer_index} ({layer_name}): {message}")
