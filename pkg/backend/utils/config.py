# Default hyperparameters for the SVRCD optimizer
DEFAULT_HYPERPARAMS = {
    'lambda1': 1.0,         # Sparsity (group-lasso) weight
    'lambda2': 0.2,         # DAG penalty weight
    'gamma': 0.1,           # Step size on the per-row (mean) likelihood gradient
    'm': None,              # Inner epoch length, None means n
    'sweeps': 50,           # Max outer sweeps
    'tol': 1e-4,            # Relative objective decrease to stop at
    'tau': 1e-8,            # Edge-extraction norm threshold
    'loss_scale': 'calibrated',  # Likelihood scaling: 'sum', 'sqrt', 'mean' or 'calibrated'
    'full_batch': False,    # Exhaustive-mean gradients instead of sampled rows
    'screening': True,      # Zero out blocks whose block minimizer is zero without inner steps
    'pm_source': 'acyclic', # Path matrix of the cycle-broken ('acyclic') or raw ('extracted') edge set
}

LOSS_SCALES = ('sum', 'sqrt', 'mean', 'calibrated')

PM_SOURCES = ('acyclic', 'extracted')

# Ground-truth CPD coefficient magnitudes
DEFAULT_CPD_RANGE = {
    'coef_low': 0.5,
    'coef_high': 1.5,
}

# Benchmark harness defaults
DEFAULT_EXPERIMENT = {
    'graph_type': 'bipartite',
    'p': 50,
    'n': 50,
    'replicates': 20,
    'seed': 0,
    'mode': 'compare',
    'max_parents': 3,
    'scale_free_power': -3.0,
    'edge_count': None,     # None means the generator's own default
    'noise': None,          # None means no noise, or the noise grid in noise mode
    'workers': 1,
    'out': 'runs/latest',
}

GRAPH_TYPES = ('bipartite', 'scale_free', 'random')

MODES = ('sweep-lambda1', 'sweep-lambda2', 'sweep-gamma', 'compare', 'scalability', 'noise')

# Sweep grids used when the CLI does not give explicit values
LAMBDA1_GRID = [0.9, 1.0, 1.1, 1.2, 1.3]
LAMBDA2_GRID = [0.1, 0.2, 0.3, 0.4, 0.5]
GAMMA_GRID = [0.1, 0.2, 0.4, 0.6, 0.8]
NOISE_GRID = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
SCALABILITY_GRID = [(50, 50), (50, 100), (100, 100), (50, 200)]  # (n, p)

# Output table headers
METRIC_COLUMNS = ('P', 'E', 'R', 'M', 'FP', 'TPR', 'FDR', 'SHD', 'JI')
TRACE_COLUMNS = ('sweep', 'neg_ll', 'sparsity_pen', 'dag_pen', 'total', 'edges')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
