"""
Pointformer Test Suite

Tests for the geometry kernels, the manual-backprop layers, attention, networks,
training harness and command line.
"""
