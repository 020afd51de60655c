"""Coupled local/nonlocal diffusion by splicing finite element systems."""
