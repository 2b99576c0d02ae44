"""Bundled theories: points-to analysis and simple type inference."""
