"""Experiment runner, reference minimizers and the command-line interface."""
