#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "volnet/calendar.hpp"
#include "volnet/graph.hpp"
#include "volnet/types.hpp"

namespace volnet::model {
struct LinearParams;  // forward declaration, defined in model.hpp
}

namespace volnet::data {

// One asset-day of intraday observations: (minutes from session open, price).
struct IntradaySeries {
    std::string asset;
    Date day;
    std::vector<std::pair<int, double>> prices;  // times strictly increasing, prices > 0

    void validate() const;  // throws DataError on invariant violations
};

// Rectangular panel of daily realized volatilities: T dates x N assets,
// no missing cells, values >= 0, dates strictly increasing.
struct RvPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Mat values;  // T x N

    int days() const { return static_cast<int>(dates.size()); }
    int n_assets() const { return static_cast<int>(assets.size()); }
    void validate() const;
};

// HAR regressors for one forecast origin t: column 0 = previous day's RV,
// column 1 = mean of lags 2..5, column 2 = mean of lags 6..22.
struct LagFeatures {
    int origin = 0;  // day index t; features use rows t-22..t-1
    Mat matrix;      // N x 3
};

// h-step cumulative targets: row t = sum of panel rows t..t+h.
struct TargetPanel {
    int horizon = 0;
    Mat values;  // (T - h) x N
};

// Realized volatility for one asset-day: squared log returns on a
// delta-minute grid, averaged over all base-minute subsample offsets.
// base == delta gives the plain non-overlapping estimator. Grid times
// snap to the last observed price at or before each grid point.
double compute_daily_rv(const IntradaySeries& series, int delta_minutes,
                        int base_minutes);

LagFeatures build_lag_features(const RvPanel& panel, int t);
TargetPanel build_horizon_targets(const RvPanel& panel, int h);

// ---------------------------------------------------------------------------
// Synthetic data generation
// ---------------------------------------------------------------------------

struct SynthResult {
    RvPanel panel;
    Mat returns;  // T x N daily returns aligned with panel.dates
};

struct SynthOptions {
    double precision_coupling = 0.5;  // off-diag precision = coupling / max degree
    int burn_in = 300;
    Date start_date{2005, 1, 3};
};

// Linear spillover DGP: log RV follows the graph-augmented HAR recursion
// (per-asset intercepts, shared lag coefficients, normalized-adjacency
// spillover) plus i.i.d. centered Gaussian noise, then exponentiates.
// Daily returns are conditionally Gaussian with variance RV and a precision
// matrix whose off-diagonal support matches `adjacency`. Deterministic
// given the seed. Throws NumericError("unstable-dgp...") when the implied
// companion spectral radius is >= 1.
SynthResult generate_synthetic_panel(const graph::Adjacency& adjacency,
                                     const volnet::model::LinearParams& coefficients,
                                     double noise_scale, int days, std::uint64_t seed,
                                     const SynthOptions& options = {});

// Nonlinear spillover DGP in RV levels: the conditional mean adds
// gain * ReLU((W v_d) - knee * (W v_w)) to the HAR part, and noise is
// multiplicative lognormal, keeping the panel positive. Used to study
// models that aggregate neighbor volatilities through a nonlinearity.
struct ReluSynthOptions {
    double gain = 0.3;
    double knee = 0.8;          // ReLU argument: (W v_d) - knee * (W v_w)
    double noise_sigma = 0.25;  // lognormal sigma, mean-one noise
    double base_level = 0.3;    // per-asset intercept
    double precision_coupling = 0.5;
    int burn_in = 300;
    Date start_date{2005, 1, 3};
};
SynthResult generate_relu_spillover_panel(const graph::Adjacency& adjacency,
                                          double beta_d, double beta_w, double beta_m,
                                          int days, std::uint64_t seed,
                                          const ReluSynthOptions& options = {});

// Spectral radius of the companion matrix implied by (alpha, beta, gamma)
// on the given graph; < 1 means the log-RV recursion is stationary.
double companion_spectral_radius(const graph::Adjacency& adjacency,
                                 const volnet::model::LinearParams& coefficients);

// ---------------------------------------------------------------------------
// CSV loaders (schemas documented in the README)
// ---------------------------------------------------------------------------

// Long format "date,asset,rv"; the (date, asset) grid must be complete.
RvPanel load_rv_panel(const std::filesystem::path& path);
void save_rv_panel(const RvPanel& panel, const std::filesystem::path& path);

// Long format "date,asset,ret": daily returns aligned on the same grid.
struct ReturnsPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Mat values;
};
ReturnsPanel load_returns_panel(const std::filesystem::path& path);
void save_returns_panel(const ReturnsPanel& panel, const std::filesystem::path& path);

// "date,asset,minute,price" rows grouped into per-asset-day series.
std::vector<IntradaySeries> load_intraday(const std::filesystem::path& path);

// "date,rv" univariate series (e.g. a market index) for regime splits.
struct IndexRvSeries {
    std::vector<Date> dates;
    std::vector<double> values;
};
IndexRvSeries load_index_rv(const std::filesystem::path& path);
void save_index_rv(const IndexRvSeries& series, const std::filesystem::path& path);

}  // namespace volnet::data
