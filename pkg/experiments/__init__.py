"""Experiment configuration, presets, multi-seed runs and reports.

Configs are plain key=value files; `run_experiment.py` is the command-line
entry point. Plots are a view of the CSV outputs and never feed back into any
number that is written.
"""
