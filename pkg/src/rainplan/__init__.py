"""Resilient multi-robot active information acquisition."""
