"""Error correction neural networks with hand-written backpropagation through time."""
from .backtest import CostSpec, Signal, buy_and_hold, generate_signals, strategy_return
from .data import MinMaxNormalizer, SplitSpec, compute_indicators, make_windows, parse_csv
from .ecnn import EcnnParams, backward_batch, forecast, forward_batch, init_params, loss_and_grad
from .estimators import ECNNRegressor, LSTMRegressor, RNNRegressor, regressor_for
from .evaluation import directional_accuracy, mape, pearson_r, theil_u, yearly_report
from .exceptions import ConfigError, DataError, EcnnError, NumericalError
from .gradcheck import check_gradients
from .smoothing import SmoothedPipeline, smooth_level
from .training import TrainConfig, fit_arrays

__version__ = "0.1.0"
