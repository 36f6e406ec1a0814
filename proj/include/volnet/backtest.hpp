#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "volnet/calendar.hpp"
#include "volnet/data.hpp"
#include "volnet/graph.hpp"
#include "volnet/model.hpp"
#include "volnet/train.hpp"

namespace volnet::backtest {

// One trained forecaster in the experiment: a model kind plus the criterion
// it is estimated under. Linear models under MSE use closed-form OLS; all
// other combinations train with Adam.
struct ModelEntry {
    model::ModelSpec spec;
    train::Criterion ec = train::Criterion::Mse;

    std::string id() const;  // "har_m", "ghar_q", "gnnhar1_q", ...
    static ModelEntry parse(const std::string& id, int hidden_dim = 9);
};

struct BacktestSpec {
    int window_days = 1000;      // reference count; the window itself is month-based
    int train_months = 36;
    int validation_months = 12;
    int refit_frequency = 1;     // calendar months per test block
    std::vector<int> horizons = {0, 4, 21};
    std::vector<ModelEntry> models;
    graph::GlassoSettings glasso;
    train::TrainConfig train_cfg;
    double qlike_floor = 1e-8;

    void validate() const;
};

// Day-index ranges [begin, end) into the panel; validation immediately
// precedes the test block, training immediately precedes validation.
struct Window {
    int index = 0;
    int train_begin = 0, train_end = 0;
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
};

// Monthly refit schedule. Windows are aligned to calendar months; each test
// block covers `refit_frequency` whole months and every out-of-sample month
// is forecast exactly once.
std::vector<Window> make_windows(const std::vector<Date>& dates, const BacktestSpec& spec);

// Out-of-sample forecasts of one model at one horizon. `origins` are day
// indices into the panel; features at origin t use panel rows t-22..t-1 only.
struct ForecastSet {
    std::string model_id;
    train::Criterion criterion = train::Criterion::Mse;
    int horizon = 0;
    std::vector<int> origins;
    Mat forecasts;  // origins.size() x assets
};

// Ensemble-mean linear coefficients of one refit, for trajectory reports.
struct WindowCoefficients {
    int window = 0;
    std::string model_id;
    int horizon = 0;
    model::LinearParams params;
    std::vector<std::string> zeroed_columns;
};

// Per-test-day over-smoothing diagnostic of a graph-neural model, computed
// from the ensemble-averaged final-layer representations.
struct MadDaily {
    int window = 0;
    std::string model_id;
    int layers = 0;
    int origin = 0;
    double value = 0.0;
};

struct BacktestResult {
    std::vector<ForecastSet> forecasts;  // one per (model, horizon)
    std::vector<WindowCoefficients> coefficients;
    std::vector<MadDaily> mad;
    std::vector<Window> windows;
    std::vector<std::string> warnings;
};

// Rolling experiment: per window, estimate the spillover graph from the
// window's returns, fit every model per its criterion, and forecast each day
// of the test block at every horizon. When `persist_dir` is nonempty, each
// finished window is flushed to disk and complete windows are reloaded on
// rerun instead of recomputed.
BacktestResult run_backtest(const data::RvPanel& panel, const Mat& returns,
                            const BacktestSpec& spec,
                            const std::filesystem::path& persist_dir = {});

// Deterministic merge of the per-window files into the top-level forecast
// CSV ("origin_date,asset,horizon,model,criterion,forecast").
void save_forecasts(const BacktestResult& result, const data::RvPanel& panel,
                    const std::filesystem::path& path);
std::vector<ForecastSet> load_forecasts(const std::filesystem::path& path,
                                        const data::RvPanel& panel);

void save_coefficients(const std::vector<WindowCoefficients>& coefficients,
                       const std::filesystem::path& path);
void save_mad_daily(const std::vector<MadDaily>& mad, const data::RvPanel& panel,
                    const std::filesystem::path& path);

}  // namespace volnet::backtest
