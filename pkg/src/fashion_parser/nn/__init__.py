"""Dense numeric layer: LSTM encoders, linear-chain CRF, RMSprop."""

from .crf import (CrfGrads, CrfParams, crf_log_partition, crf_marginals, crf_nll_grad,
                  crf_path_score, crf_viterbi)
from .layers import Linear, dropout
from .lstm import (LstmParams, bilstm_backward, bilstm_forward, bptt_backward, hard_sigmoid,
                   lstm_forward)
from .optim import RMSprop, RmspropState, rmsprop_step

__all__ = [
    "CrfGrads", "CrfParams", "crf_log_partition", "crf_marginals", "crf_nll_grad", "crf_path_score",
    "crf_viterbi", "Linear", "dropout", "LstmParams", "bilstm_backward", "bilstm_forward",
    "bptt_backward", "hard_sigmoid", "lstm_forward", "RMSprop", "RmspropState", "rmsprop_step",
]
