from rxfault.neuralnet.net import (
    CascadeNet,
    NormalizationSpec,
    Topology,
    dminmax,
    dminmax_inverse,
    forward,
    gradient,
    init_weights,
    jacobian,
    mse,
    residuals,
)
from rxfault.neuralnet.trainers import (
    ALGORITHMS,
    LM_MAX_WEIGHTS,
    TrainConfig,
    TrainingError,
    TrainLog,
    lm_step,
    train,
)
