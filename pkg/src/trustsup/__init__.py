"""Trust supervision for classifier ensembles.

A regression network reads a class-invariant descriptor of an ensemble's
softmax activations and predicts how many members are correct; a loss layer
with memory learns the trust threshold that splits trustworthy from
untrustworthy verdicts; evaluation loops cover the plurality baseline,
regression-guided voting, online supervisor retraining, and budgeted
oracle-driven active learning, all scored with the trusted metric suite.
"""

from .config import ExperimentConfig, load_config
from .decision import (EvalRecord, METRIC_ROWS, TrustedMetrics, maximal_vote,
                       predicted_vote, trust_flag, trusted_metrics, vote_counts)
from .descriptor import UncertaintyDescriptor, build_usd, usd_batch, validate_softmax_matrix
from .ensemble import (LabeledSample, SynthConfig, ToyEnsemble, correct_count,
                       descriptor_dataset, load_ensemble, load_features, load_samples,
                       oracle_update, save_ensemble, save_features, save_samples,
                       stream_samples, synth_generate, toy_predict, toy_train)
from .errors import ConfigError, DataFormatError, NumericError, TrustsupError
from .loops import (LoopConfig, LoopResult, order_stream, run_active, run_maximal,
                    run_online, run_predicted, select_reference)
from .numerics import AdamState, adam_step, finite_diff_grad, seeded_rng
from .supervisor import (SupervisorNet, TrainConfig, grad_check, load_checkpoint,
                         save_checkpoint, sse_loss, train)
from .trustloss import (TrustMemory, grad_tt, push, push_many, scan_optimal_tt,
                        sse_tt, update_tt)

__version__ = "0.1.0"
