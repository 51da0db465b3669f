"""Toolchain for a linear circuit-description language with dynamic
lifting: parser, linear typechecker, channel-buffering evaluator,
density-matrix simulator, and categorical semantics."""

__version__ = "0.1.0"
