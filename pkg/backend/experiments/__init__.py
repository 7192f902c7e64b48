from backend.experiments.runner import ExperimentConfig, RunRecord, run_experiment

__all__ = ['ExperimentConfig', 'RunRecord', 'run_experiment']
