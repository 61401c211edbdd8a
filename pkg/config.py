import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Grid solver budgets
    MEM_BUDGET = int(os.getenv('TILEKIT_MEM_BUDGET', '16000000'))  # transfer-matrix cells
    ROW_BUDGET = int(os.getenv('TILEKIT_ROW_BUDGET', '6000'))  # horizontally valid rows
    SEARCH_BUDGET = int(os.getenv('TILEKIT_SEARCH_BUDGET', '2000000'))  # backtracking nodes
    ENUM_CAP = int(os.getenv('TILEKIT_ENUM_CAP', '50000000'))  # brute-force assignments

    # Turing machine simulation
    STEP_CAP = int(os.getenv('TILEKIT_STEP_CAP', '100000'))
    CONFIG_CAP = int(os.getenv('TILEKIT_CONFIG_CAP', '200000'))

    # Line solver
    LINE_MATERIALIZE_CAP = int(os.getenv('TILEKIT_LINE_MATERIALIZE_CAP', '100000'))

    # Eigen solver
    DENSE_EIG_DIM = int(os.getenv('TILEKIT_DENSE_EIG_DIM', '2048'))
    EIG_MAXITER = int(os.getenv('TILEKIT_EIG_MAXITER', '20000'))
    EIG_RESIDUAL_TOL = float(os.getenv('TILEKIT_EIG_RESIDUAL_TOL', '1e-10'))

    # Randomness (prime sampling, random instances, eigen start vectors)
    SEED = int(os.getenv('TILEKIT_SEED', '20240101'))

    # Logging
    LOG_LEVEL = os.getenv('TILEKIT_LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('TILEKIT_LOG_FILE', 'tilekit.log')
