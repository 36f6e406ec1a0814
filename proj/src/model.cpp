#include "volnet/model.hpp"

#include <nlohmann/json.hpp>

#include "volnet/data.hpp"
#include "volnet/errors.hpp"
#include "volnet/io.hpp"

namespace volnet::model {

using nlohmann::json;

void GnnParams::validate_shapes(int n_assets) const {
    if (alpha.size() != n_assets)
        throw ConfigError("gnn params: alpha size " + std::to_string(alpha.size()) +
                          " != asset count " + std::to_string(n_assets));
    if (layers.empty()) throw ConfigError("gnn params: at least one layer required");
    Eigen::Index in_dim = 3;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].rows() != in_dim)
            throw ConfigError("gnn params: layer " + std::to_string(l) + " expects input dim " +
                              std::to_string(layers[l].rows()) + ", chain gives " +
                              std::to_string(in_dim));
        in_dim = layers[l].cols();
    }
    if (gamma.size() != in_dim)
        throw ConfigError("gnn params: gamma size " + std::to_string(gamma.size()) +
                          " != final layer width " + std::to_string(in_dim));
}

std::string ModelSpec::name() const {
    switch (kind) {
        case ModelKind::Har: return "har";
        case ModelKind::Ghar: return "ghar";
        case ModelKind::Ghar2Hop: return "ghar2hop";
        case ModelKind::GnnHar: return "gnnhar" + std::to_string(layers);
    }
    return "?";
}

ModelSpec ModelSpec::parse(const std::string& name, int hidden_dim) {
    if (name == "har") return {ModelKind::Har, 0, hidden_dim};
    if (name == "ghar") return {ModelKind::Ghar, 0, hidden_dim};
    if (name == "ghar2hop") return {ModelKind::Ghar2Hop, 0, hidden_dim};
    if (name.rfind("gnnhar", 0) == 0 && name.size() > 6) {
        const int layers = std::stoi(name.substr(6));
        if (layers < 1) throw ConfigError("gnnhar layer count must be >= 1");
        return {ModelKind::GnnHar, layers, hidden_dim};
    }
    throw ConfigError("unknown model '" + name + "'");
}

namespace {

void check_feature_shape(const data::LagFeatures& v, const LinearParams& p) {
    if (v.matrix.cols() != 3) throw ConfigError("lag features must have 3 columns");
    if (p.alpha.size() != v.matrix.rows())
        throw ConfigError("alpha size " + std::to_string(p.alpha.size()) +
                          " != asset count " + std::to_string(v.matrix.rows()));
}

}  // namespace

Forecast har_forward(const data::LagFeatures& v, const LinearParams& p) {
    check_feature_shape(v, p);
    if (p.gamma || p.delta) throw ConfigError("har takes no spillover coefficients");
    Forecast f;
    f.origin = v.origin;
    f.values = p.alpha + v.matrix * p.beta;
    return f;
}

Forecast ghar_forward(const data::LagFeatures& v, const Mat& w, const LinearParams& p) {
    check_feature_shape(v, p);
    if (!p.gamma) throw ConfigError("ghar requires gamma");
    if (p.delta) throw ConfigError("ghar takes no 2nd-hop coefficients");
    if (w.rows() != v.matrix.rows() || w.cols() != v.matrix.rows())
        throw ConfigError("normalized adjacency shape mismatch");
    Forecast f;
    f.origin = v.origin;
    f.values = p.alpha + v.matrix * p.beta + (w * v.matrix) * (*p.gamma);
    return f;
}

Forecast ghar2hop_forward(const data::LagFeatures& v, const Mat& w1, const Mat& w2,
                          const LinearParams& p) {
    check_feature_shape(v, p);
    if (!p.gamma || !p.delta) throw ConfigError("ghar2hop requires gamma and delta");
    if (w1.rows() != v.matrix.rows() || w2.rows() != v.matrix.rows())
        throw ConfigError("normalized adjacency shape mismatch");
    Forecast f;
    f.origin = v.origin;
    f.values = p.alpha + v.matrix * p.beta + (w1 * v.matrix) * (*p.gamma) +
               (w2 * v.matrix) * (*p.delta);
    return f;
}

Mat gnn_layer(const Mat& h, const Mat& w, const Mat& theta) {
    if (w.cols() != h.rows())
        throw ConfigError("gnn layer: adjacency/representation shape mismatch");
    if (h.cols() != theta.rows())
        throw ConfigError("gnn layer: representation/weight shape mismatch");
    return ((w * h) * theta).cwiseMax(0.0);
}

Mat gnnhar_hidden(const data::LagFeatures& v, const Mat& w, const GnnParams& p) {
    p.validate_shapes(static_cast<int>(v.matrix.rows()));
    Mat h = v.matrix;
    for (const Mat& theta : p.layers) h = gnn_layer(h, w, theta);
    return h;
}

Forecast gnnhar_forward(const data::LagFeatures& v, const Mat& w, const GnnParams& p) {
    const Mat hidden = gnnhar_hidden(v, w, p);
    Forecast f;
    f.origin = v.origin;
    f.values = p.alpha + v.matrix * p.beta + hidden * p.gamma;
    return f;
}

std::vector<int> receptive_field_check(const GnnParams& p, const graph::Adjacency& a, int v) {
    return graph::k_hop_neighbors(a, v, p.depth());
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json mat_to_json(const Mat& m) {
    // row-major flat array plus shape
    json flat = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& flat = j.at("data");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index jj = 0; jj < m.cols(); ++jj) m(i, jj) = flat[k++].get<double>();
    return m;
}

}  // namespace

void save_params(const Params& params, const ModelSpec& spec,
                 const std::filesystem::path& path) {
    json j;
    j["model"] = spec.name();
    j["hidden_dim"] = spec.hidden_dim;
    if (std::holds_alternative<LinearParams>(params)) {
        const auto& p = std::get<LinearParams>(params);
        j["alpha"] = vec_to_json(p.alpha);
        j["beta"] = {p.beta[0], p.beta[1], p.beta[2]};
        if (p.gamma) j["gamma"] = {(*p.gamma)[0], (*p.gamma)[1], (*p.gamma)[2]};
        if (p.delta) j["delta"] = {(*p.delta)[0], (*p.delta)[1], (*p.delta)[2]};
    } else {
        const auto& p = std::get<GnnParams>(params);
        j["alpha"] = vec_to_json(p.alpha);
        j["beta"] = {p.beta[0], p.beta[1], p.beta[2]};
        j["gamma"] = vec_to_json(p.gamma);
        json layers = json::array();
        for (const auto& theta : p.layers) layers.push_back(mat_to_json(theta));
        j["layers"] = layers;
    }
    write_file(path, j.dump(2) + "\n");
}

std::pair<Params, ModelSpec> load_params(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    const ModelSpec spec = ModelSpec::parse(j.at("model").get<std::string>(),
                                            j.value("hidden_dim", 9));
    auto read_vec3 = [&](const char* key) {
        const auto& arr = j.at(key);
        return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
    };
    if (spec.kind == ModelKind::GnnHar) {
        GnnParams p;
        p.alpha = vec_from_json(j.at("alpha"));
        p.beta = read_vec3("beta");
        p.gamma = vec_from_json(j.at("gamma"));
        for (const auto& layer : j.at("layers")) p.layers.push_back(mat_from_json(layer));
        p.validate_shapes(static_cast<int>(p.alpha.size()));
        return {Params{std::move(p)}, spec};
    }
    LinearParams p;
    p.alpha = vec_from_json(j.at("alpha"));
    p.beta = read_vec3("beta");
    if (j.contains("gamma")) p.gamma = read_vec3("gamma");
    if (j.contains("delta")) p.delta = read_vec3("delta");
    return {Params{std::move(p)}, spec};
}

}  // namespace volnet::model
