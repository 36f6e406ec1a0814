#include "volnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "volnet/errors.hpp"
#include "volnet/io.hpp"
#include "volnet/parallel.hpp"
#include "volnet/rng.hpp"

namespace volnet::train {

std::string criterion_name(Criterion c) { return c == Criterion::Mse ? "mse" : "qlike"; }

Criterion parse_criterion(const std::string& s) {
    if (s == "mse") return Criterion::Mse;
    if (s == "qlike") return Criterion::Qlike;
    throw ConfigError("unknown criterion '" + s + "' (expected mse or qlike)");
}

// ===========================================================================
// Losses
// ===========================================================================

double mse_loss(const Mat& actual, const Mat& predicted) {
    if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
        throw ConfigError("mse: shape mismatch");
    if (actual.size() == 0) throw ConfigError("mse: empty sample");
    return (actual - predicted).squaredNorm() / static_cast<double>(actual.size());
}

double qlike_loss(const Mat& actual, const Mat& predicted, double floor) {
    if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
        throw ConfigError("qlike: shape mismatch");
    if (actual.size() == 0) throw ConfigError("qlike: empty sample");
    if (!(floor > 0.0)) throw ConfigError("qlike: floor must be positive");
    double total = 0.0;
    for (Eigen::Index i = 0; i < actual.rows(); ++i) {
        for (Eigen::Index j = 0; j < actual.cols(); ++j) {
            const double y = actual(i, j);
            if (!(y > 0.0))
                throw DataError("qlike: nonpositive actual at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
            const double p = std::max(predicted(i, j), floor);
            const double ratio = y / p;
            total += ratio - std::log(ratio) - 1.0;
        }
    }
    return total / static_cast<double>(actual.size());
}

// ===========================================================================
// DaySamples / TrainConfig
// ===========================================================================

int DaySamples::n_assets() const {
    return features.empty() ? 0 : static_cast<int>(features.front().matrix.rows());
}

void DaySamples::validate() const {
    if (features.size() != targets.size())
        throw ConfigError("day samples: features/targets length mismatch");
    const int n = n_assets();
    for (std::size_t d = 0; d < features.size(); ++d) {
        if (features[d].matrix.rows() != n || features[d].matrix.cols() != 3)
            throw ConfigError("day samples: feature matrix shape mismatch at day " +
                              std::to_string(d));
        if (targets[d].size() != n)
            throw ConfigError("day samples: target size mismatch at day " + std::to_string(d));
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (batch_size_days < 1) throw ConfigError("train: batch_size_days must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience_epochs < 1 || patience_epochs >= max_epochs)
        throw ConfigError("train: patience_epochs must be in [1, max_epochs)");
    if (ensemble_size < 1) throw ConfigError("train: ensemble_size must be >= 1");
    for (int d : hidden_dim_grid)
        if (d < 1) throw ConfigError("train: hidden dimensions must be >= 1");
}

void save_training_curve(const FittedModel& fit, const std::filesystem::path& path) {
    CsvWriter w("epoch,train_loss,val_loss");
    for (std::size_t epoch = 0; epoch < fit.training_curve.size(); ++epoch) {
        w.field(static_cast<int>(epoch));
        w.field(fit.training_curve[epoch].train_loss);
        w.field(fit.training_curve[epoch].val_loss);
        w.end_row();
    }
    w.save(path);
}

// ===========================================================================
// Pooled OLS
// ===========================================================================

namespace {

std::vector<std::string> lag_column_names(model::ModelKind kind) {
    std::vector<std::string> names{"beta_d", "beta_w", "beta_m"};
    if (kind == model::ModelKind::Ghar || kind == model::ModelKind::Ghar2Hop) {
        names.insert(names.end(), {"gamma_d", "gamma_w", "gamma_m"});
    }
    if (kind == model::ModelKind::Ghar2Hop) {
        names.insert(names.end(), {"delta_d", "delta_w", "delta_m"});
    }
    return names;
}

}  // namespace

OlsResult ols_fit(const DaySamples& samples, model::ModelKind kind) {
    samples.validate();
    if (kind == model::ModelKind::GnnHar)
        throw ConfigError("ols applies to the linear model kinds only");
    const int n = samples.n_assets();
    const int days = samples.n_days();
    if (n == 0 || days == 0) throw ConfigError("ols: empty sample");

    const auto lag_names = lag_column_names(kind);
    const int k_lag = static_cast<int>(lag_names.size());
    const long rows = static_cast<long>(days) * n;
    if (rows < n + k_lag) throw NumericError("ols: fewer observations than coefficients");

    Mat x = Mat::Zero(rows, n + k_lag);
    Vec y(rows);
    for (int d = 0; d < days; ++d) {
        const Mat& v = samples.features[static_cast<std::size_t>(d)].matrix;
        Mat lag(n, k_lag);
        lag.leftCols(3) = v;
        if (k_lag >= 6) lag.middleCols(3, 3) = samples.w * v;
        if (k_lag == 9) lag.rightCols(3) = samples.w2 * v;
        for (int i = 0; i < n; ++i) {
            const long r = static_cast<long>(d) * n + i;
            x(r, i) = 1.0;
            x.block(r, n, 1, k_lag) = lag.row(i);
            y[r] = samples.targets[static_cast<std::size_t>(d)][i];
        }
    }

    // Exactly zero regressor columns (a structurally absent effect, not a
    // data defect) are dropped and their coefficients pinned to zero.
    OlsResult out;
    std::vector<int> kept_lag;
    for (int c = 0; c < k_lag; ++c) {
        if (x.col(n + c).cwiseAbs().maxCoeff() == 0.0)
            out.zeroed_columns.push_back(lag_names[static_cast<std::size_t>(c)]);
        else
            kept_lag.push_back(c);
    }
    Mat xr(rows, n + static_cast<int>(kept_lag.size()));
    xr.leftCols(n) = x.leftCols(n);
    for (std::size_t c = 0; c < kept_lag.size(); ++c)
        xr.col(n + static_cast<Eigen::Index>(c)) = x.col(n + kept_lag[c]);

    Eigen::ColPivHouseholderQR<Mat> qr(xr);
    if (qr.rank() < xr.cols()) {
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index k = qr.rank(); k < xr.cols(); ++k) {
            const int c = perm[k];
            if (!cols.empty()) cols += ", ";
            cols += c < n ? ("alpha[" + std::to_string(c) + "]")
                          : lag_names[static_cast<std::size_t>(kept_lag[static_cast<std::size_t>(c - n)])];
        }
        throw NumericError("ols: rank-deficient design; collinear columns: " + cols);
    }
    const Vec coef = qr.solve(y);

    model::LinearParams p;
    p.alpha = coef.head(n);
    Vec lag_coef = Vec::Zero(k_lag);
    for (std::size_t c = 0; c < kept_lag.size(); ++c)
        lag_coef[kept_lag[c]] = coef[n + static_cast<Eigen::Index>(c)];
    p.beta = lag_coef.head<3>();
    if (k_lag >= 6) p.gamma = model::Vec3(lag_coef.segment<3>(3));
    if (k_lag == 9) p.delta = model::Vec3(lag_coef.segment<3>(6));
    out.params = std::move(p);
    return out;
}

// ===========================================================================
// GradientEngine
// ===========================================================================

namespace {

struct Layout {
    int n = 0;
    int layers = 0;
    int dim = 0;
    bool gamma3 = false, delta3 = false;
    // offsets into the flat vector
    int beta_off = 0, gamma3_off = -1, delta3_off = -1, gamma_off = -1;
    std::vector<int> theta_off;
    std::vector<std::pair<int, int>> theta_shape;
    int total = 0;
};

Layout make_layout(const model::ModelSpec& spec, int n) {
    Layout lt;
    lt.n = n;
    lt.beta_off = n;
    int pos = n + 3;
    switch (spec.kind) {
        case model::ModelKind::Har:
            break;
        case model::ModelKind::Ghar:
            lt.gamma3 = true;
            lt.gamma3_off = pos;
            pos += 3;
            break;
        case model::ModelKind::Ghar2Hop:
            lt.gamma3 = lt.delta3 = true;
            lt.gamma3_off = pos;
            lt.delta3_off = pos + 3;
            pos += 6;
            break;
        case model::ModelKind::GnnHar: {
            if (spec.layers < 1) throw ConfigError("gnnhar needs at least one layer");
            if (spec.hidden_dim < 1) throw ConfigError("gnnhar hidden_dim must be >= 1");
            lt.layers = spec.layers;
            lt.dim = spec.hidden_dim;
            int in_dim = 3;
            for (int l = 0; l < spec.layers; ++l) {
                lt.theta_off.push_back(pos);
                lt.theta_shape.emplace_back(in_dim, spec.hidden_dim);
                pos += in_dim * spec.hidden_dim;
                in_dim = spec.hidden_dim;
            }
            lt.gamma_off = pos;
            pos += spec.hidden_dim;
            break;
        }
    }
    lt.total = pos;
    return lt;
}

Mat theta_of(const Vec& flat, const Layout& lt, int l) {
    const auto [r, c] = lt.theta_shape[static_cast<std::size_t>(l)];
    Mat theta(r, c);
    int pos = lt.theta_off[static_cast<std::size_t>(l)];
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) theta(i, j) = flat[pos++];
    return theta;
}

void add_theta_grad(Vec& grad, const Layout& lt, int l, const Mat& g) {
    int pos = lt.theta_off[static_cast<std::size_t>(l)];
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) grad[pos++] += g(i, j);
}

}  // namespace

GradientEngine::GradientEngine(model::ModelSpec spec, int n_assets, EstimationCriterion ec)
    : spec_(spec), n_assets_(n_assets), ec_(ec) {
    if (n_assets < 1) throw ConfigError("gradient engine: need at least one asset");
    param_count_ = make_layout(spec_, n_assets_).total;
}

Vec GradientEngine::pack(const model::Params& params) const {
    const Layout lt = make_layout(spec_, n_assets_);
    Vec flat = Vec::Zero(lt.total);
    if (spec_.kind == model::ModelKind::GnnHar) {
        const auto& p = std::get<model::GnnParams>(params);
        p.validate_shapes(n_assets_);
        flat.head(lt.n) = p.alpha;
        flat.segment(lt.beta_off, 3) = p.beta;
        for (int l = 0; l < lt.layers; ++l) {
            int pos = lt.theta_off[static_cast<std::size_t>(l)];
            const Mat& theta = p.layers[static_cast<std::size_t>(l)];
            for (Eigen::Index i = 0; i < theta.rows(); ++i)
                for (Eigen::Index j = 0; j < theta.cols(); ++j) flat[pos++] = theta(i, j);
        }
        flat.segment(lt.gamma_off, lt.dim) = p.gamma;
    } else {
        const auto& p = std::get<model::LinearParams>(params);
        flat.head(lt.n) = p.alpha;
        flat.segment(lt.beta_off, 3) = p.beta;
        if (lt.gamma3) {
            if (!p.gamma) throw ConfigError("pack: gamma required for this model kind");
            flat.segment(lt.gamma3_off, 3) = *p.gamma;
        }
        if (lt.delta3) {
            if (!p.delta) throw ConfigError("pack: delta required for this model kind");
            flat.segment(lt.delta3_off, 3) = *p.delta;
        }
    }
    return flat;
}

model::Params GradientEngine::unpack(const Vec& flat) const {
    const Layout lt = make_layout(spec_, n_assets_);
    if (flat.size() != lt.total) throw ConfigError("unpack: flat vector size mismatch");
    if (spec_.kind == model::ModelKind::GnnHar) {
        model::GnnParams p;
        p.alpha = flat.head(lt.n);
        p.beta = flat.segment(lt.beta_off, 3);
        for (int l = 0; l < lt.layers; ++l) p.layers.push_back(theta_of(flat, lt, l));
        p.gamma = flat.segment(lt.gamma_off, lt.dim);
        return p;
    }
    model::LinearParams p;
    p.alpha = flat.head(lt.n);
    p.beta = flat.segment(lt.beta_off, 3);
    if (lt.gamma3) p.gamma = model::Vec3(flat.segment(lt.gamma3_off, 3));
    if (lt.delta3) p.delta = model::Vec3(flat.segment(lt.delta3_off, 3));
    return p;
}

Vec GradientEngine::predict(const Vec& flat, const data::LagFeatures& v, const Mat& w,
                            const Mat& w2) const {
    const Layout lt = make_layout(spec_, n_assets_);
    const Mat& features = v.matrix;
    Vec pred = flat.head(lt.n) + features * Vec(flat.segment(lt.beta_off, 3));
    if (lt.gamma3) pred += (w * features) * Vec(flat.segment(lt.gamma3_off, 3));
    if (lt.delta3) pred += (w2 * features) * Vec(flat.segment(lt.delta3_off, 3));
    if (spec_.kind == model::ModelKind::GnnHar) {
        Mat h = features;
        for (int l = 0; l < lt.layers; ++l) h = ((w * h) * theta_of(flat, lt, l)).cwiseMax(0.0);
        pred += h * Vec(flat.segment(lt.gamma_off, lt.dim));
    }
    return pred;
}

double GradientEngine::loss(const Vec& flat, const DaySamples& samples,
                            const std::vector<int>& day_indices) const {
    if (day_indices.empty()) throw ConfigError("loss: empty day set");
    const double cells = static_cast<double>(day_indices.size()) * n_assets_;
    double total = 0.0;
    for (int d : day_indices) {
        const Vec pred = predict(flat, samples.features[static_cast<std::size_t>(d)],
                                 samples.w, samples.w2);
        const Vec& y = samples.targets[static_cast<std::size_t>(d)];
        if (ec_.kind == Criterion::Mse) {
            total += (pred - y).squaredNorm();
        } else {
            for (int i = 0; i < n_assets_; ++i) {
                if (!(y[i] > 0.0)) throw DataError("qlike: nonpositive target");
                const double p = std::max(pred[i], ec_.qlike_floor);
                const double ratio = y[i] / p;
                total += ratio - std::log(ratio) - 1.0;
            }
        }
    }
    return total / cells;
}

double GradientEngine::loss_and_grad(const Vec& flat, const DaySamples& samples,
                                     const std::vector<int>& day_indices, Vec& grad) const {
    const Layout lt = make_layout(spec_, n_assets_);
    if (day_indices.empty()) throw ConfigError("loss: empty day set");
    grad = Vec::Zero(lt.total);
    const double scale = 1.0 / (static_cast<double>(day_indices.size()) * n_assets_);
    double total = 0.0;

    std::vector<Mat> thetas;
    for (int l = 0; l < lt.layers; ++l) thetas.push_back(theta_of(flat, lt, l));
    std::vector<Mat> h(static_cast<std::size_t>(lt.layers) + 1);
    std::vector<Mat> wh(static_cast<std::size_t>(lt.layers));  // W * H_l
    std::vector<Mat> z(static_cast<std::size_t>(lt.layers));   // pre-activations

    for (int d : day_indices) {
        const Mat& features = samples.features[static_cast<std::size_t>(d)].matrix;
        const Vec& y = samples.targets[static_cast<std::size_t>(d)];

        Vec pred = flat.head(lt.n) + features * Vec(flat.segment(lt.beta_off, 3));
        Mat spill1, spill2;
        if (lt.gamma3) {
            spill1 = samples.w * features;
            pred += spill1 * Vec(flat.segment(lt.gamma3_off, 3));
        }
        if (lt.delta3) {
            spill2 = samples.w2 * features;
            pred += spill2 * Vec(flat.segment(lt.delta3_off, 3));
        }
        if (lt.layers > 0) {
            h[0] = features;
            for (int l = 0; l < lt.layers; ++l) {
                wh[static_cast<std::size_t>(l)] = samples.w * h[static_cast<std::size_t>(l)];
                z[static_cast<std::size_t>(l)] =
                    wh[static_cast<std::size_t>(l)] * thetas[static_cast<std::size_t>(l)];
                h[static_cast<std::size_t>(l) + 1] = z[static_cast<std::size_t>(l)].cwiseMax(0.0);
            }
            pred += h[static_cast<std::size_t>(lt.layers)] * Vec(flat.segment(lt.gamma_off, lt.dim));
        }

        // dL/dpred, including the loss value
        Vec g(lt.n);
        if (ec_.kind == Criterion::Mse) {
            g = 2.0 * scale * (pred - y);
            total += (pred - y).squaredNorm();
        } else {
            for (int i = 0; i < lt.n; ++i) {
                if (!(y[i] > 0.0)) throw DataError("qlike: nonpositive target");
                const double p = std::max(pred[i], ec_.qlike_floor);
                const double ratio = y[i] / p;
                total += ratio - std::log(ratio) - 1.0;
                g[i] = pred[i] > ec_.qlike_floor ? scale * (p - y[i]) / (p * p) : 0.0;
            }
        }

        grad.head(lt.n) += g;
        grad.segment(lt.beta_off, 3) += features.transpose() * g;
        if (lt.gamma3) grad.segment(lt.gamma3_off, 3) += spill1.transpose() * g;
        if (lt.delta3) grad.segment(lt.delta3_off, 3) += spill2.transpose() * g;
        if (lt.layers > 0) {
            grad.segment(lt.gamma_off, lt.dim) +=
                h[static_cast<std::size_t>(lt.layers)].transpose() * g;
            Mat back = g * flat.segment(lt.gamma_off, lt.dim).transpose();  // N x D
            for (int l = lt.layers - 1; l >= 0; --l) {
                // ReLU subgradient: exactly zero pre-activations pass nothing
                back = (z[static_cast<std::size_t>(l)].array() > 0.0)
                           .select(back, Mat::Zero(back.rows(), back.cols()));
                add_theta_grad(grad, lt, l, wh[static_cast<std::size_t>(l)].transpose() * back);
                if (l > 0)
                    back = samples.w * (back * thetas[static_cast<std::size_t>(l)].transpose());
            }
        }
    }
    return total * scale;
}

// ===========================================================================
// Adam
// ===========================================================================

namespace {

Vec initial_parameters(const Layout& lt, const model::ModelSpec& spec,
                       const DaySamples& train_data, Rng& rng) {
    Vec flat = Vec::Zero(lt.total);
    // Intercepts start at the per-asset target mean, own-lag loadings at
    // 1/3 each (HAR coefficients typically sum near one).
    Vec alpha = Vec::Zero(lt.n);
    for (const auto& y : train_data.targets) alpha += y;
    alpha /= std::max(1, train_data.n_days());
    flat.head(lt.n) = alpha;
    flat.segment(lt.beta_off, 3).setConstant(0.33);
    if (spec.kind == model::ModelKind::GnnHar) {
        for (int l = 0; l < lt.layers; ++l) {
            const auto [r, c] = lt.theta_shape[static_cast<std::size_t>(l)];
            const double scale = 1.0 / std::sqrt(static_cast<double>(r));
            int pos = lt.theta_off[static_cast<std::size_t>(l)];
            for (int k = 0; k < r * c; ++k)
                flat[pos++] = scale * (2.0 * rng.uniform() - 1.0);
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(lt.dim));
        for (int k = 0; k < lt.dim; ++k)
            flat[lt.gamma_off + k] = scale * (2.0 * rng.uniform() - 1.0);
    }
    return flat;
}

FittedModel run_adam(const model::ModelSpec& spec, const DaySamples& train_data,
                     const DaySamples* validation, const EstimationCriterion& ec,
                     const TrainConfig& cfg, int fixed_epochs, int member_id) {
    cfg.validate();
    train_data.validate();
    if (validation) {
        validation->validate();
        if (validation->n_days() == 0) throw ConfigError("adam: empty validation set");
        if (validation->n_assets() != train_data.n_assets())
            throw ConfigError("adam: train/validation asset count mismatch");
        int max_train = std::numeric_limits<int>::min();
        int min_val = std::numeric_limits<int>::max();
        for (const auto& f : train_data.features) max_train = std::max(max_train, f.origin);
        for (const auto& f : validation->features) min_val = std::min(min_val, f.origin);
        if (min_val <= max_train)
            throw ConfigError("adam: validation must follow training chronologically");
    }
    if (train_data.n_days() == 0) throw ConfigError("adam: empty training set");

    const GradientEngine engine(spec, train_data.n_assets(), ec);
    const Layout lt = make_layout(spec, train_data.n_assets());
    Rng rng(cfg.seed);
    Vec flat = initial_parameters(lt, spec, train_data, rng);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vec m = Vec::Zero(lt.total), v = Vec::Zero(lt.total), grad(lt.total);
    long step = 0;

    std::vector<int> order(static_cast<std::size_t>(train_data.n_days()));
    std::vector<int> all_train(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = all_train[i] = static_cast<int>(i);
    std::vector<int> all_val;
    if (validation)
        for (int i = 0; i < validation->n_days(); ++i) all_val.push_back(i);

    FittedModel out;
    out.spec = spec;
    out.criterion = ec;
    out.member_id = member_id;

    const int max_epochs = fixed_epochs >= 0 ? fixed_epochs : cfg.max_epochs;
    double best_val = std::numeric_limits<double>::infinity();
    Vec best_flat = flat;
    int epochs_since_best = 0;
    const int batch = std::min(cfg.batch_size_days, train_data.n_days());

    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(batch)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(batch));
            const std::vector<int> chunk(order.begin() + static_cast<long>(lo),
                                         order.begin() + static_cast<long>(hi));
            const double batch_loss = engine.loss_and_grad(flat, train_data, chunk, grad);
            if (!std::isfinite(batch_loss) || !grad.allFinite())
                throw NumericError("diverged-training: nonfinite loss at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step));
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
            flat -= cfg.learning_rate *
                    ((m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
        }

        EpochPoint point;
        point.train_loss = engine.loss(flat, train_data, all_train);
        if (!std::isfinite(point.train_loss))
            throw NumericError("diverged-training: nonfinite loss at epoch " +
                               std::to_string(epoch));
        if (validation) {
            point.val_loss = engine.loss(flat, *validation, all_val);
            if (!std::isfinite(point.val_loss))
                throw NumericError("diverged-training: nonfinite validation loss at epoch " +
                                   std::to_string(epoch));
            if (point.val_loss < best_val) {
                best_val = point.val_loss;
                best_flat = flat;
                out.best_epoch = epoch;
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
            }
            out.training_curve.push_back(point);
            if (epochs_since_best >= cfg.patience_epochs) break;
        } else {
            point.val_loss = std::numeric_limits<double>::quiet_NaN();
            out.training_curve.push_back(point);
        }
    }

    if (validation) {
        out.params = engine.unpack(best_flat);
    } else {
        out.params = engine.unpack(flat);
        out.best_epoch = static_cast<int>(out.training_curve.size()) - 1;
    }
    return out;
}

}  // namespace

FittedModel adam_fit(const model::ModelSpec& spec, const DaySamples& train_data,
                     const DaySamples& validation, const EstimationCriterion& ec,
                     const TrainConfig& cfg, int member_id) {
    return run_adam(spec, train_data, &validation, ec, cfg, -1, member_id);
}

FittedModel adam_fit_fixed_epochs(const model::ModelSpec& spec, const DaySamples& samples,
                                  const EstimationCriterion& ec, const TrainConfig& cfg,
                                  int epochs, int member_id) {
    if (epochs < 1) throw ConfigError("adam: fixed epoch budget must be >= 1");
    return run_adam(spec, samples, nullptr, ec, cfg, epochs, member_id);
}

// ===========================================================================
// Grid search and ensembles
// ===========================================================================

std::pair<int, std::vector<GridSearchRow>> grid_search_hidden_dim(
    const model::ModelSpec& spec, const DaySamples& train_data, const DaySamples& validation,
    const EstimationCriterion& ec, const TrainConfig& cfg) {
    if (spec.kind != model::ModelKind::GnnHar)
        throw ConfigError("hidden-dimension grid search applies to gnnhar models");
    if (cfg.hidden_dim_grid.empty()) throw ConfigError("hidden-dimension grid is empty");

    // Width is selected on the one-layer variant and reused by deeper stacks.
    model::ModelSpec search_spec = spec;
    search_spec.layers = 1;

    std::vector<GridSearchRow> table;
    int best_dim = cfg.hidden_dim_grid.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (int dim : cfg.hidden_dim_grid) {
        search_spec.hidden_dim = dim;
        const Ensemble ens = ensemble_fit(search_spec, train_data, validation, ec, cfg);
        double mean_val = 0.0;
        for (const auto& member : ens.members)
            mean_val += member.training_curve[static_cast<std::size_t>(member.best_epoch)].val_loss;
        mean_val /= static_cast<double>(ens.members.size());
        table.push_back({dim, mean_val});
        if (mean_val < best_loss) {
            best_loss = mean_val;
            best_dim = dim;
        }
    }
    return {best_dim, table};
}

Vec Ensemble::predict(const data::LagFeatures& v, const Mat& w, const Mat& w2) const {
    if (members.empty()) throw ConfigError("ensemble: no members");
    Vec sum = Vec::Zero(v.matrix.rows());
    for (const auto& member : members) {
        if (spec.kind == model::ModelKind::GnnHar) {
            sum += model::gnnhar_forward(v, w, std::get<model::GnnParams>(member.params)).values;
        } else {
            const auto& p = std::get<model::LinearParams>(member.params);
            switch (spec.kind) {
                case model::ModelKind::Har:
                    sum += model::har_forward(v, p).values;
                    break;
                case model::ModelKind::Ghar:
                    sum += model::ghar_forward(v, w, p).values;
                    break;
                default:
                    sum += model::ghar2hop_forward(v, w, w2, p).values;
            }
        }
    }
    return sum / static_cast<double>(members.size());
}

Mat Ensemble::hidden(const data::LagFeatures& v, const Mat& w) const {
    if (spec.kind != model::ModelKind::GnnHar)
        throw ConfigError("hidden representations exist for gnnhar models only");
    if (members.empty()) throw ConfigError("ensemble: no members");
    Mat sum;
    for (const auto& member : members) {
        const Mat h = model::gnnhar_hidden(v, w, std::get<model::GnnParams>(member.params));
        if (sum.size() == 0)
            sum = h;
        else
            sum += h;
    }
    return sum / static_cast<double>(members.size());
}

Ensemble ensemble_fit(const model::ModelSpec& spec, const DaySamples& train_data,
                      const DaySamples& validation, const EstimationCriterion& ec,
                      const TrainConfig& cfg) {
    cfg.validate();
    Ensemble ens;
    ens.spec = spec;
    ens.criterion = ec;
    ens.members.resize(static_cast<std::size_t>(cfg.ensemble_size));
    parallel_for(cfg.ensemble_size, cfg.workers, [&](int k) {
        TrainConfig member_cfg = cfg;
        member_cfg.seed = cfg.seed + static_cast<std::uint64_t>(k);
        ens.members[static_cast<std::size_t>(k)] =
            adam_fit(spec, train_data, validation, ec, member_cfg, k);
    });
    return ens;
}

Ensemble ensemble_fit_fixed_epochs(const model::ModelSpec& spec, const DaySamples& samples,
                                   const EstimationCriterion& ec, const TrainConfig& cfg,
                                   int epochs) {
    cfg.validate();
    Ensemble ens;
    ens.spec = spec;
    ens.criterion = ec;
    ens.members.resize(static_cast<std::size_t>(cfg.ensemble_size));
    parallel_for(cfg.ensemble_size, cfg.workers, [&](int k) {
        TrainConfig member_cfg = cfg;
        member_cfg.seed = cfg.seed + static_cast<std::uint64_t>(k);
        ens.members[static_cast<std::size_t>(k)] =
            adam_fit_fixed_epochs(spec, samples, ec, member_cfg, epochs, k);
    });
    return ens;
}

}  // namespace volnet::train
