"""Experiment cells driven by the ExperimentManager."""
