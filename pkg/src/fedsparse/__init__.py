"""Deterministic federated-learning simulator with sparsified client
updates, label-skew Dirichlet partitioning, and byte-accurate
communication accounting."""

__version__ = "0.1.0"

from .config import (ConfigError, CsvDataConfig, ExperimentConfig, ModelConfig,
                     SyntheticDataConfig, emit_config, parse_config,
                     parse_config_dict)
from .data import Dataset, NormStats, gen_synthetic, load_csv, normalize, save_csv, \
    train_test_split
from .federation import (ClientState, ClientUpdate, ExperimentResult, RoundMetrics,
                         ServerState, TrainingConfig, TrainingDiverged, aggregate,
                         client_local_train, global_loss, run_experiment, run_round)
from .model import (ModelSpec, backward, cross_entropy, evaluate, finite_diff_grad,
                    forward, init_params, param_count)
from .partition import (DirichletParams, Partition, dirichlet_log_pdf,
                        export_assignments_csv, log_gamma, partition_dataset,
                        sample_dirichlet)
from .sparsify import (DecodeError, SparseUpdate, SparsityPolicy, comm_bytes, decode,
                       densify, encode, encoded_size, random_sparsify, retained_count,
                       sparsify, threshold_sparsify, top_k_sparsify)
