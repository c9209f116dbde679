"""Benchmark scripts for tentlab."""
