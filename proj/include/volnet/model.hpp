#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "volnet/graph.hpp"
#include "volnet/types.hpp"

namespace volnet::data {
struct LagFeatures;
}

namespace volnet::model {

using Vec3 = Eigen::Vector3d;

// Coefficients of the linear forecasters. `gamma` carries the 1st-hop
// spillover loadings, `delta` the 2nd-hop ones; presence encodes the model:
//   plain HAR: neither; 1-hop spillover: gamma; 2-hop: gamma + delta.
struct LinearParams {
    Vec alpha;                   // per-asset intercepts (N)
    Vec3 beta = Vec3::Zero();    // own daily/weekly/monthly loadings
    std::optional<Vec3> gamma;
    std::optional<Vec3> delta;
};

// Weights of a graph-neural forecaster: a stack of layer matrices
// (layers[l] has shape D(l) x D(l+1), D(0) = 3) and the output loading
// gamma in R^{D(L)}.
struct GnnParams {
    Vec alpha;
    Vec3 beta = Vec3::Zero();
    std::vector<Mat> layers;
    Vec gamma;

    int depth() const { return static_cast<int>(layers.size()); }
    void validate_shapes(int n_assets) const;  // throws ConfigError on mismatch
};

struct Forecast {
    int origin = 0;
    int horizon = 0;
    Vec values;
};

enum class ModelKind { Har, Ghar, Ghar2Hop, GnnHar };

struct ModelSpec {
    ModelKind kind = ModelKind::Har;
    int layers = 0;      // GnnHar only
    int hidden_dim = 9;  // GnnHar only; D(l) for every l >= 1

    bool is_linear() const { return kind != ModelKind::GnnHar; }
    std::string name() const;              // "har", "ghar", "ghar2hop", "gnnhar1", ...
    static ModelSpec parse(const std::string& name, int hidden_dim = 9);
};

// ---------------------------------------------------------------------------
// Forward passes (pure functions)
// ---------------------------------------------------------------------------

// forecast_i = alpha_i + beta . V[i,:]
Forecast har_forward(const data::LagFeatures& v, const LinearParams& p);

// forecast = alpha + V beta + (W V) gamma
Forecast ghar_forward(const data::LagFeatures& v, const Mat& w, const LinearParams& p);

// forecast = alpha + V beta + (W1 V) gamma + (W2 V) delta,
// with W2 the normalized exact-distance-2 adjacency.
Forecast ghar2hop_forward(const data::LagFeatures& v, const Mat& w1, const Mat& w2,
                          const LinearParams& p);

// ReLU(W h theta); the propagation step used by the graph-neural models.
Mat gnn_layer(const Mat& h, const Mat& w, const Mat& theta);

// Final-layer node representations H^(L) after `depth` propagation steps.
Mat gnnhar_hidden(const data::LagFeatures& v, const Mat& w, const GnnParams& p);

// forecast = alpha + V beta + H^(L) gamma
Forecast gnnhar_forward(const data::LagFeatures& v, const Mat& w, const GnnParams& p);

// Receptive field of node v after the model's layers: the L-hop neighbor set.
std::vector<int> receptive_field_check(const GnnParams& p, const graph::Adjacency& a, int v);

// ---------------------------------------------------------------------------
// Parameter snapshots
// ---------------------------------------------------------------------------

using Params = std::variant<LinearParams, GnnParams>;

// JSON snapshot with model kind, shapes, and flat coefficient arrays.
// save -> load -> forward is bit-exact.
void save_params(const Params& params, const ModelSpec& spec,
                 const std::filesystem::path& path);
std::pair<Params, ModelSpec> load_params(const std::filesystem::path& path);

}  // namespace volnet::model
