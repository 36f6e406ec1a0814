#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "volnet/data.hpp"
#include "volnet/model.hpp"
#include "volnet/types.hpp"

namespace volnet::train {

enum class Criterion { Mse, Qlike };

std::string criterion_name(Criterion c);          // "mse" / "qlike"
Criterion parse_criterion(const std::string& s);

// In-sample objective. QLIKE clamps predictions at `qlike_floor` before
// evaluating (gradient is zero through clamped entries).
struct EstimationCriterion {
    Criterion kind = Criterion::Mse;
    double qlike_floor = 1e-8;
};

// Mean over all (asset, day) cells of the squared error.
double mse_loss(const Mat& actual, const Mat& predicted);

// Mean over all cells of y/p - log(y/p) - 1 with p = max(predicted, floor).
// Requires strictly positive actuals.
double qlike_loss(const Mat& actual, const Mat& predicted, double floor = 1e-8);

// ---------------------------------------------------------------------------
// Training data: one sample = one day's full cross-section
// ---------------------------------------------------------------------------

struct DaySamples {
    std::vector<data::LagFeatures> features;  // each N x 3
    std::vector<Vec> targets;                 // each N
    Mat w;   // normalized adjacency; ignored by plain HAR
    Mat w2;  // normalized 2nd-hop adjacency; GHAR2Hop only

    int n_days() const { return static_cast<int>(features.size()); }
    int n_assets() const;
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size_days = 32;  // 0 = full batch
    int max_epochs = 500;
    int patience_epochs = 10;
    int ensemble_size = 10;
    std::uint64_t seed = 0;
    std::vector<int> hidden_dim_grid = {3, 6, 9, 16, 32};
    int workers = 0;

    void validate() const;
};

struct EpochPoint {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct FittedModel {
    model::Params params;
    model::ModelSpec spec;
    EstimationCriterion criterion;
    std::vector<EpochPoint> training_curve;
    int best_epoch = -1;  // index into training_curve; epoch with min val loss
    int member_id = 0;
};

// Per-member training curve CSV, header "epoch,train_loss,val_loss".
void save_training_curve(const FittedModel& fit, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Closed-form pooled OLS
// ---------------------------------------------------------------------------

struct OlsResult {
    model::LinearParams params;
    // Regressor columns that were exactly all-zero (e.g. the 2nd-hop block on
    // a graph with no distance-2 pairs); their coefficients are pinned to 0.
    std::vector<std::string> zeroed_columns;
};

// Pooled least squares with per-asset intercepts and shared lag coefficients,
// solved by column-pivoted Householder QR. Rank deficiency (beyond exactly
// zero columns) raises NumericError naming the collinear columns.
OlsResult ols_fit(const DaySamples& samples, model::ModelKind kind);

// ---------------------------------------------------------------------------
// Gradient engine (flat parameter vector <-> model params)
// ---------------------------------------------------------------------------

// Batch loss and exact backpropagation gradients for every model kind under
// either criterion. Exposed so tests can difference `loss` directly.
class GradientEngine {
public:
    GradientEngine(model::ModelSpec spec, int n_assets, EstimationCriterion ec);

    int param_count() const { return param_count_; }
    const model::ModelSpec& spec() const { return spec_; }

    Vec pack(const model::Params& params) const;
    model::Params unpack(const Vec& flat) const;

    // Mean loss over the listed day indices of `samples`.
    double loss(const Vec& flat, const DaySamples& samples,
                const std::vector<int>& day_indices) const;
    double loss_and_grad(const Vec& flat, const DaySamples& samples,
                         const std::vector<int>& day_indices, Vec& grad) const;

    // Forecast for a single day at the given flat parameters.
    Vec predict(const Vec& flat, const data::LagFeatures& v, const Mat& w,
                const Mat& w2) const;

private:
    model::ModelSpec spec_;
    int n_assets_;
    EstimationCriterion ec_;
    int param_count_;
};

// ---------------------------------------------------------------------------
// Adam training
// ---------------------------------------------------------------------------

// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) with per-epoch
// validation and early stopping; returns the snapshot from the epoch with
// the lowest validation loss. Train/validation must be disjoint and in
// chronological order. Nonfinite losses raise NumericError.
FittedModel adam_fit(const model::ModelSpec& spec, const DaySamples& train_data,
                     const DaySamples& validation, const EstimationCriterion& ec,
                     const TrainConfig& cfg, int member_id = 0);

// Fixed epoch budget, no validation; used when a model is fitted on the
// pooled train+validation window.
FittedModel adam_fit_fixed_epochs(const model::ModelSpec& spec, const DaySamples& samples,
                                  const EstimationCriterion& ec, const TrainConfig& cfg,
                                  int epochs, int member_id = 0);

// ---------------------------------------------------------------------------
// Grid search and ensembles
// ---------------------------------------------------------------------------

struct GridSearchRow {
    int dim = 0;
    double mean_val_loss = 0.0;
};

// Trains one ensemble per hidden dimension in cfg.hidden_dim_grid and picks
// the dimension with the lowest mean validation loss. Multi-layer specs are
// searched with their one-layer variant and reuse the selected width.
std::pair<int, std::vector<GridSearchRow>> grid_search_hidden_dim(
    const model::ModelSpec& spec, const DaySamples& train_data, const DaySamples& validation,
    const EstimationCriterion& ec, const TrainConfig& cfg);

struct Ensemble {
    model::ModelSpec spec;
    EstimationCriterion criterion;
    std::vector<FittedModel> members;

    // Unweighted mean of member forecasts.
    Vec predict(const data::LagFeatures& v, const Mat& w, const Mat& w2 = Mat()) const;
    // Mean of member final-layer hidden representations (GnnHar only).
    Mat hidden(const data::LagFeatures& v, const Mat& w) const;
};

// Members are trained with seeds cfg.seed + 0 .. cfg.seed + ensemble_size-1,
// concurrently when cfg.workers allows.
Ensemble ensemble_fit(const model::ModelSpec& spec, const DaySamples& train_data,
                      const DaySamples& validation, const EstimationCriterion& ec,
                      const TrainConfig& cfg);

// Pooled-data counterpart with a fixed epoch budget per member.
Ensemble ensemble_fit_fixed_epochs(const model::ModelSpec& spec, const DaySamples& samples,
                                   const EstimationCriterion& ec, const TrainConfig& cfg,
                                   int epochs);

}  // namespace volnet::train
