"""Channel-dependent vs channel-independent forecasting toolkit.

Closed-form and Yule-Walker Linear solvers, ACF drift diagnostics, risk
decomposition, gradient-trained forecasters (CD, CI, PRReg) and a benchmark
command line harness.
"""

from .acf import (
    AcfProfile,
    CorrelationBlocks,
    DriftReport,
    acf_profile,
    build_blocks,
    build_blocks_from_windows,
    drift_report,
    estimate_acf,
    estimate_cross_corr,
)
from .diagnostics import RiskReport, evaluate, mae, mse, persistence_baseline, risk_decompose
from .models import ModelSpec, NeuralForecaster, TrainConfig, TrainedModel, train_cd, train_ci, train_prreg
from .series import (
    DesignMatrices,
    MultivariateSeries,
    SplitSpec,
    WindowedDataset,
    fit_normalizer,
    load_csv,
    make_windows,
    split,
    stack,
    unstack,
    write_csv,
)
from .solver import (
    LinearCoefficients,
    LinearForecaster,
    SolveConfig,
    ols_cd,
    ols_ci,
    yule_walker_cd,
    yule_walker_ci,
)
from .synth import ArSpec, DriftSpec, gen_ar, gen_multichannel

__version__ = "0.1.0"
