"""Registry tying each model kind to its initializer and batched kernels."""
from dataclasses import dataclass
from typing import Callable

from . import baselines, ecnn


@dataclass(frozen=True)
class ModelKind:
    name: str
    params_cls: type
    init: Callable
    loss_and_grad: Callable
    forward: Callable
    predict_last: Callable


KINDS = {
    "ecnn": ModelKind("ecnn", ecnn.EcnnParams, ecnn.init_params, ecnn.loss_and_grad,
                      ecnn.forward_batch, ecnn.predict_last),
    "rnn": ModelKind("rnn", baselines.RnnParams, baselines.init_rnn, baselines.rnn_loss_and_grad,
                     baselines.rnn_forward_batch, baselines.rnn_predict_last),
    "lstm": ModelKind("lstm", baselines.LstmParams, baselines.init_lstm, baselines.lstm_loss_and_grad,
                      baselines.lstm_forward_batch, baselines.lstm_predict_last),
}


def get_kind(name):
    try:
        return KINDS[name]
    except KeyError:
        raise ValueError(f"unknown model kind {name!r}; choose from {sorted(KINDS)}") from None


def kind_of(params):
    return get_kind(params.kind)
