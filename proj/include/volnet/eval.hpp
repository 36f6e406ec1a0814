#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volnet/backtest.hpp"
#include "volnet/data.hpp"
#include "volnet/types.hpp"

namespace volnet::eval {

// ---------------------------------------------------------------------------
// Loss tables
// ---------------------------------------------------------------------------

struct LossTableRow {
    std::string model_id;
    int horizon = 0;
    double mse = 0.0;
    double qlike = 0.0;
    double mse_ratio = 1.0;    // vs the baseline model at the same horizon
    double qlike_ratio = 1.0;
    long n_days = 0;
};

// Mean out-of-sample losses over the joint (asset, day) sample and their
// ratios against `baseline_id`. `day_filter`, when given, restricts to the
// listed forecast origins (regime stratification).
std::vector<LossTableRow> loss_table(const std::vector<backtest::ForecastSet>& forecasts,
                                     const data::RvPanel& actual,
                                     const std::string& baseline_id,
                                     const std::vector<int>* day_filter = nullptr,
                                     double qlike_floor = 1e-8);

// Targets aligned with forecast origins: row k = sum of panel rows
// origins[k] .. origins[k]+h. Origins whose target would run past the panel
// are rejected; use `trim_origins_for_horizon` first.
Mat aligned_targets(const data::RvPanel& panel, const std::vector<int>& origins, int horizon);
std::vector<int> trim_origins_for_horizon(const std::vector<int>& origins, int horizon,
                                          int panel_days);

// Per-day cross-sectional mean loss series of one forecast set.
std::vector<double> daily_loss_series(const backtest::ForecastSet& fs,
                                      const data::RvPanel& actual, train::Criterion kind,
                                      double qlike_floor = 1e-8);
// Per-day loss series of a single asset.
std::vector<double> asset_loss_series(const backtest::ForecastSet& fs,
                                      const data::RvPanel& actual, int asset,
                                      train::Criterion kind, double qlike_floor = 1e-8);

// ---------------------------------------------------------------------------
// Diebold-Mariano
// ---------------------------------------------------------------------------

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int lag = 0;               // Newey-West lag (the forecast horizon)
    bool cross_sectional = false;
};

// DM test with Bartlett/Newey-West long-run variance at lag `horizon`,
// Harvey small-sample correction, and a Student-t(n-1) two-sided p-value.
// Identical series give statistic 0 / p 1; a constant nonzero differential
// is degenerate and raises NumericError.
DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b,
                 int horizon);

// Averages the per-asset losses across the cross-section first, then runs
// the univariate test on the resulting daily series.
DmResult dm_test_cross_sectional(const Mat& loss_a, const Mat& loss_b, int horizon);

// ---------------------------------------------------------------------------
// Model confidence set
// ---------------------------------------------------------------------------

struct McsResult {
    std::vector<int> surviving;      // model indices with p_value >= alpha
    std::vector<double> p_values;    // monotonized elimination p-values
    std::vector<int> elimination_order;
    double alpha = 0.05;
};

// Hansen-style MCS with the range statistic over studentized pairwise mean
// loss differentials and a moving-block bootstrap null. Models are
// eliminated worst-first until one remains; the surviving set collects the
// models whose monotonized elimination p-value is >= alpha.
McsResult mcs(const Mat& losses /* models x days */, double alpha, int bootstrap_reps,
              int block_length, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Regimes, FVU, MAD
// ---------------------------------------------------------------------------

struct RegimePartition {
    std::vector<int> calm;       // index_rv <= threshold
    std::vector<int> turbulent;  // index_rv >  threshold
    double threshold = 0.0;
};

// Threshold = k-th order statistic with k = floor(q * n); ties fall into the
// calm stratum. Indices refer to positions in the input series.
RegimePartition stratify_by_regime(const std::vector<double>& index_rv, double q);

// Per-day fraction of model forecast variance unexplained by the baseline:
// sum_i (F_i - B_i)^2 / sum_i (F_i - mean_i F)^2; NaN when the denominator
// is zero (all model forecasts identical that day).
Vec fvu(const Mat& model_preds, const Mat& baseline_preds);

struct MadResult {
    double value = 0.0;
    int excluded_nodes = 0;  // connected nodes with zero-norm representations
};

// Mean average cosine distance between graph-adjacent rows of `hidden`;
// 0 when no positive masked distances exist.
MadResult mad(const Mat& hidden, const graph::Adjacency& a);

// ---------------------------------------------------------------------------
// Distribution reports
// ---------------------------------------------------------------------------

struct BoxSummary {
    double median = 0.0, q1 = 0.0, q3 = 0.0;
    double lo_whisker = 0.0, hi_whisker = 0.0;  // Tukey fences at 1.5 IQR
    long n = 0;
};
BoxSummary five_number_summary(std::vector<double> values);

struct ErrorRatioRow {
    std::string model_id;
    int horizon = 0;
    std::string regime;  // "all", "calm", "turbulent"
    std::string metric;  // "error" (pred - actual) or "ratio" (pred / actual)
    BoxSummary box;
};

// Box-plot summaries of forecast errors and forecast ratios per model and
// regime. `calm_origins`, when given, splits days into calm/turbulent strata
// by forecast origin.
std::vector<ErrorRatioRow> error_ratio_report(const std::vector<backtest::ForecastSet>& forecasts,
                                              const data::RvPanel& actual,
                                              const std::vector<int>* calm_origins = nullptr);

// Named linear coefficient ("beta_d", "gamma_w", "delta_m", ...); throws
// ConfigError when the model kind lacks it.
double coefficient_value(const model::LinearParams& params, const std::string& name);

struct TrajectoryRow {
    int window = 0;
    std::string model_id;
    int horizon = 0;
    std::string coefficient;
    double value = 0.0;
};

// Tidy per-window series of every present coefficient.
std::vector<TrajectoryRow> coefficient_trajectory_report(
    const std::vector<backtest::WindowCoefficients>& fits);

}  // namespace volnet::eval
