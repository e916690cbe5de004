# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Exception hierarchy shared by every maiplab module.
"""


class MaipError(RuntimeError):
    """Base class of all maiplab errors."""


class ShapeError(MaipError, ValueError):
    """
    Dimension mismatch inside an operation.

    Args:
        op: name of the operation that rejected its inputs
        expected: human readable description of what was expected
        got: shapes actually received
    """
    def __init__(self, op, expected, got):
        self.op = op
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: expected {expected}, got {got}")


class UsageError(MaipError):
    """An API was called in a state where it is not allowed."""


class ConfigurationError(MaipError, ValueError):
    """Invalid configuration, missing gradients or an untrained model."""


class GeometryError(MaipError, ValueError):
    """The world configuration does not describe a consistent intersection."""


class DivergenceError(MaipError):
    """Training produced a non-finite loss."""
