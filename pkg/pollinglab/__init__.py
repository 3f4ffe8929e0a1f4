"""Polling-system laboratory: simulation and exact analytics for cyclic polling models."""
