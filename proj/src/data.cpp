#include "volnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "volnet/errors.hpp"
#include "volnet/io.hpp"
#include "volnet/model.hpp"
#include "volnet/rng.hpp"

namespace volnet::data {

// ===========================================================================
// Validation
// ===========================================================================

void IntradaySeries::validate() const {
    const std::string ctx = asset + " " + to_iso(day);
    if (prices.size() < 2)
        throw DataError(ctx + ": at least 2 intraday observations required");
    for (std::size_t k = 0; k < prices.size(); ++k) {
        if (!(prices[k].second > 0.0))
            throw DataError(ctx + ": nonpositive price at minute " +
                            std::to_string(prices[k].first));
        if (k > 0 && prices[k].first <= prices[k - 1].first)
            throw DataError(ctx + ": intraday times must be strictly increasing");
    }
}

void RvPanel::validate() const {
    if (values.rows() != days() || values.cols() != n_assets())
        throw DataError("rv panel: value matrix shape does not match dates/assets");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw DataError("rv panel: dates must be strictly increasing");
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j)
            if (!(values(i, j) >= 0.0) || !std::isfinite(values(i, j)))
                throw DataError("rv panel: invalid value at (" + to_iso(dates[i]) + ", " +
                                assets[static_cast<std::size_t>(j)] + ")");
}

// ===========================================================================
// Realized volatility
// ===========================================================================

double compute_daily_rv(const IntradaySeries& series, int delta_minutes, int base_minutes) {
    series.validate();
    if (delta_minutes <= 0 || base_minutes <= 0)
        throw ConfigError("rv: delta and base must be positive");
    if (delta_minutes % base_minutes != 0)
        throw ConfigError("rv: delta_minutes must be divisible by base_minutes");
    const std::string ctx = series.asset + " " + to_iso(series.day);
    const int first_time = series.prices.front().first;
    const int last_time = series.prices.back().first;
    if (last_time - first_time < delta_minutes)
        throw DataError(ctx + ": series spans fewer than " + std::to_string(delta_minutes) +
                        " minutes");

    // Last observed price at or before each grid time, walking the grid and
    // the tape together.
    const int offsets = delta_minutes / base_minutes;
    double total = 0.0;
    for (int s = 0; s < offsets; ++s) {
        double sum_sq = 0.0;
        int grid_points = 0;
        double prev_log_price = 0.0;
        std::size_t tape = 0;
        for (int g = s * base_minutes; g <= last_time; g += delta_minutes) {
            while (tape + 1 < series.prices.size() && series.prices[tape + 1].first <= g) ++tape;
            if (series.prices[tape].first > g) continue;  // grid point precedes first tick
            const double lp = std::log(series.prices[tape].second);
            if (grid_points > 0) {
                const double r = lp - prev_log_price;
                sum_sq += r * r;
            }
            prev_log_price = lp;
            ++grid_points;
        }
        if (grid_points < 2)
            throw DataError(ctx + ": insufficient data at subsample offset " + std::to_string(s));
        total += sum_sq;
    }
    return total / offsets;
}

// ===========================================================================
// Features and targets
// ===========================================================================

LagFeatures build_lag_features(const RvPanel& panel, int t) {
    if (t < 22)
        throw DataError("lag features need 22 days of history; origin " + std::to_string(t) +
                        " is too early");
    if (t > panel.days())
        throw DataError("lag features origin " + std::to_string(t) + " beyond panel end " +
                        std::to_string(panel.days()));
    LagFeatures out;
    out.origin = t;
    const int n = panel.n_assets();
    out.matrix.resize(n, 3);
    out.matrix.col(0) = panel.values.row(t - 1).transpose();
    Vec weekly = Vec::Zero(n);
    for (int k = 2; k <= 5; ++k) weekly += panel.values.row(t - k).transpose();
    out.matrix.col(1) = weekly / 4.0;
    Vec monthly = Vec::Zero(n);
    for (int k = 6; k <= 22; ++k) monthly += panel.values.row(t - k).transpose();
    out.matrix.col(2) = monthly / 17.0;
    return out;
}

TargetPanel build_horizon_targets(const RvPanel& panel, int h) {
    if (h < 0) throw ConfigError("horizon must be nonnegative");
    if (h >= panel.days())
        throw DataError("horizon " + std::to_string(h) + " leaves no target rows (panel has " +
                        std::to_string(panel.days()) + " days)");
    TargetPanel out;
    out.horizon = h;
    out.values = Mat::Zero(panel.days() - h, panel.n_assets());
    for (int t = 0; t < panel.days() - h; ++t)
        for (int k = 0; k <= h; ++k) out.values.row(t) += panel.values.row(t + k);
    return out;
}

// ===========================================================================
// Synthetic data
// ===========================================================================

namespace {

constexpr int kLagDepth = 22;

struct LagCoefficients {
    double own[3];
    double spill[3];
    bool has_spill;
};

LagCoefficients unpack(const volnet::model::LinearParams& c) {
    LagCoefficients lc{};
    lc.own[0] = c.beta[0];
    lc.own[1] = c.beta[1];
    lc.own[2] = c.beta[2];
    lc.has_spill = c.gamma.has_value();
    if (lc.has_spill) {
        lc.spill[0] = (*c.gamma)[0];
        lc.spill[1] = (*c.gamma)[1];
        lc.spill[2] = (*c.gamma)[2];
    }
    return lc;
}

// AR coefficient at lag k (1-based) for the scalar recursion obtained by
// projecting onto an eigenvector of W with eigenvalue lambda.
double scalar_lag_coef(const LagCoefficients& lc, double lambda, int k) {
    const double own = k == 1 ? lc.own[0] : (k <= 5 ? lc.own[1] / 4.0 : lc.own[2] / 17.0);
    if (!lc.has_spill) return own;
    const double sp = k == 1 ? lc.spill[0] : (k <= 5 ? lc.spill[1] / 4.0 : lc.spill[2] / 17.0);
    return own + sp * lambda;
}

double scalar_companion_radius(const LagCoefficients& lc, double lambda) {
    Mat companion = Mat::Zero(kLagDepth, kLagDepth);
    for (int k = 1; k <= kLagDepth; ++k) companion(0, k - 1) = scalar_lag_coef(lc, lambda, k);
    for (int k = 1; k < kLagDepth; ++k) companion(k, k - 1) = 1.0;
    Eigen::EigenSolver<Mat> es(companion, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Correlation matrix whose precision support matches the adjacency:
// Theta = I + c A with c small enough for positive definiteness, inverted
// and rescaled to unit diagonal (diagonal scaling preserves the support).
Mat support_matched_correlation(const graph::Adjacency& a, double coupling) {
    const int n = a.size();
    int max_deg = 0;
    for (int i = 0; i < n; ++i) max_deg = std::max(max_deg, a.degree(i));
    const double c = coupling / std::max(1, max_deg);
    Mat theta = Mat::Identity(n, n) + c * a.to_matrix();
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
        throw NumericError("synthetic returns: precision template not PD");
    Mat sigma = llt.solve(Mat::Identity(n, n));
    Vec d = sigma.diagonal().cwiseSqrt();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) sigma(i, j) /= d[i] * d[j];
    return sigma;
}

Mat simulate_returns(const Mat& rv, const graph::Adjacency& a, double coupling, Rng rng) {
    const auto t = rv.rows();
    const auto n = rv.cols();
    const Mat sigma = support_matched_correlation(a, coupling);
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericError("synthetic returns: correlation not PD");
    const Mat chol = llt.matrixL();
    Mat returns(t, n);
    Vec xi(n);
    for (Eigen::Index day = 0; day < t; ++day) {
        for (Eigen::Index i = 0; i < n; ++i) xi[i] = rng.normal();
        const Vec z = chol * xi;
        for (Eigen::Index i = 0; i < n; ++i)
            returns(day, i) = std::sqrt(rv(day, i)) * z[i];
    }
    return returns;
}

}  // namespace

double companion_spectral_radius(const graph::Adjacency& adjacency,
                                 const volnet::model::LinearParams& coefficients) {
    const LagCoefficients lc = unpack(coefficients);
    if (!lc.has_spill) return scalar_companion_radius(lc, 0.0);
    const Mat w = graph::normalize(adjacency);
    Eigen::SelfAdjointEigenSolver<Mat> es(w, Eigen::EigenvaluesOnly);
    double radius = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        radius = std::max(radius, scalar_companion_radius(lc, es.eigenvalues()[i]));
    return radius;
}

SynthResult generate_synthetic_panel(const graph::Adjacency& adjacency,
                                     const volnet::model::LinearParams& coefficients,
                                     double noise_scale, int days, std::uint64_t seed,
                                     const SynthOptions& options) {
    const int n = adjacency.size();
    if (days <= 0) throw ConfigError("synthetic panel: days must be positive");
    if (coefficients.alpha.size() != n)
        throw ConfigError("synthetic panel: alpha size must match graph size");
    if (coefficients.delta)
        throw ConfigError("synthetic panel: the log-linear recursion takes no delta");
    if (!(noise_scale >= 0.0)) throw ConfigError("synthetic panel: noise_scale must be >= 0");

    const double radius = companion_spectral_radius(adjacency, coefficients);
    if (radius >= 1.0)
        throw NumericError("unstable-dgp: companion spectral radius " + std::to_string(radius) +
                           " >= 1");

    const LagCoefficients lc = unpack(coefficients);
    const Mat w = graph::normalize(adjacency);

    // Deterministic fixed point of the noiseless recursion.
    const double sum_own = lc.own[0] + lc.own[1] + lc.own[2];
    Mat m = (1.0 - sum_own) * Mat::Identity(n, n);
    if (lc.has_spill) m -= (lc.spill[0] + lc.spill[1] + lc.spill[2]) * w;
    const Vec fixed_point = m.colPivHouseholderQr().solve(coefficients.alpha);

    Rng rng(seed);
    Rng rng_panel = rng.fork(1);
    Rng rng_returns = rng.fork(2);

    const int total = days + options.burn_in;
    Mat log_rv(total + kLagDepth, n);
    for (int t = 0; t < kLagDepth; ++t) log_rv.row(t) = fixed_point.transpose();

    Vec v_d(n), v_w(n), v_m(n);
    for (int t = kLagDepth; t < total + kLagDepth; ++t) {
        v_d = log_rv.row(t - 1).transpose();
        v_w.setZero();
        for (int k = 2; k <= 5; ++k) v_w += log_rv.row(t - k).transpose();
        v_w /= 4.0;
        v_m.setZero();
        for (int k = 6; k <= 22; ++k) v_m += log_rv.row(t - k).transpose();
        v_m /= 17.0;

        Vec mean_t = coefficients.alpha + lc.own[0] * v_d + lc.own[1] * v_w + lc.own[2] * v_m;
        if (lc.has_spill)
            mean_t += w * (lc.spill[0] * v_d + lc.spill[1] * v_w + lc.spill[2] * v_m);
        for (int i = 0; i < n; ++i)
            log_rv(t, i) = mean_t[i] + noise_scale * rng_panel.normal();
    }

    SynthResult out;
    out.panel.dates = weekday_calendar(options.start_date, days);
    out.panel.assets.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.panel.assets.push_back("A" + std::to_string(i));
    out.panel.values =
        log_rv.bottomRows(days).array().exp().matrix();
    out.panel.validate();
    out.returns = simulate_returns(out.panel.values, adjacency, options.precision_coupling,
                                   rng_returns);
    return out;
}

SynthResult generate_relu_spillover_panel(const graph::Adjacency& adjacency,
                                          double beta_d, double beta_w, double beta_m,
                                          int days, std::uint64_t seed,
                                          const ReluSynthOptions& options) {
    const int n = adjacency.size();
    if (days <= 0) throw ConfigError("synthetic panel: days must be positive");
    const double sum_own = beta_d + beta_w + beta_m;
    if (beta_d < 0.0 || beta_w < 0.0 || beta_m < 0.0 || options.gain < 0.0)
        throw ConfigError("relu panel: coefficients must be nonnegative");
    if (sum_own >= 1.0)
        throw NumericError("unstable-dgp: own-lag coefficients must sum below 1");

    const Mat w = graph::normalize(adjacency);
    Rng rng(seed);
    Rng rng_panel = rng.fork(1);
    Rng rng_returns = rng.fork(2);

    const int total = days + options.burn_in;
    Mat rv(total + kLagDepth, n);
    const double level = options.base_level / (1.0 - sum_own);
    for (int t = 0; t < kLagDepth; ++t) rv.row(t).setConstant(level);

    const double drift = -0.5 * options.noise_sigma * options.noise_sigma;  // mean-one noise
    Vec v_d(n), v_w(n), v_m(n);
    for (int t = kLagDepth; t < total + kLagDepth; ++t) {
        v_d = rv.row(t - 1).transpose();
        v_w.setZero();
        for (int k = 2; k <= 5; ++k) v_w += rv.row(t - k).transpose();
        v_w /= 4.0;
        v_m.setZero();
        for (int k = 6; k <= 22; ++k) v_m += rv.row(t - k).transpose();
        v_m /= 17.0;

        const Vec spill = (w * (v_d - options.knee * v_w)).cwiseMax(0.0);
        const Vec mean_t = Vec::Constant(n, options.base_level) + beta_d * v_d +
                           beta_w * v_w + beta_m * v_m + options.gain * spill;
        for (int i = 0; i < n; ++i) {
            const double noise = std::exp(options.noise_sigma * rng_panel.normal() + drift);
            rv(t, i) = std::max(1e-12, mean_t[i] * noise);
        }
        // the threshold spillover has no closed-form stationarity bound, so
        // explosion is detected along the simulated path
        if (!rv.row(t).allFinite() || rv.row(t).maxCoeff() > 1e9 * level)
            throw NumericError("unstable-dgp: relu spillover recursion exploded");
    }

    SynthResult out;
    out.panel.dates = weekday_calendar(options.start_date, days);
    for (int i = 0; i < n; ++i) out.panel.assets.push_back("A" + std::to_string(i));
    out.panel.values = rv.bottomRows(days);
    out.panel.validate();
    out.returns = simulate_returns(out.panel.values, adjacency, options.precision_coupling,
                                   rng_returns);
    return out;
}

// ===========================================================================
// CSV loaders
// ===========================================================================

namespace {

// Shared long-format panel reader for "date,asset,<value>" files.
struct LongPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Mat values;
};

LongPanel load_long_panel(const std::filesystem::path& path, const std::string& header,
                          bool require_nonnegative) {
    const auto rows = read_csv(path, header);
    if (rows.empty()) throw DataError(path.string() + ": no data rows");

    std::set<Date> date_set;
    std::set<std::string> asset_set;
    std::map<std::pair<Date, std::string>, std::pair<double, int>> cells;
    const std::string value_field = header.substr(header.rfind(',') + 1);
    for (const auto& row : rows) {
        const Date d = parse_iso(row.fields[0]);
        const double v = parse_double(row.fields[2], row.line_number, value_field);
        if (require_nonnegative && v < 0.0)
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": negative " + value_field + " for " + row.fields[1] + " on " +
                            row.fields[0]);
        auto key = std::make_pair(d, row.fields[1]);
        if (cells.count(key))
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": duplicate (date, asset) = (" + row.fields[0] + ", " +
                            row.fields[1] + ")");
        cells[key] = {v, row.line_number};
        date_set.insert(d);
        asset_set.insert(row.fields[1]);
    }

    LongPanel panel;
    panel.dates.assign(date_set.begin(), date_set.end());
    panel.assets.assign(asset_set.begin(), asset_set.end());
    panel.values.resize(static_cast<Eigen::Index>(panel.dates.size()),
                        static_cast<Eigen::Index>(panel.assets.size()));
    std::vector<std::string> holes;
    for (std::size_t t = 0; t < panel.dates.size(); ++t) {
        for (std::size_t i = 0; i < panel.assets.size(); ++i) {
            auto it = cells.find({panel.dates[t], panel.assets[i]});
            if (it == cells.end()) {
                if (holes.size() < 5)
                    holes.push_back("(" + to_iso(panel.dates[t]) + ", " + panel.assets[i] + ")");
                continue;
            }
            panel.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                it->second.first;
        }
    }
    if (!holes.empty()) {
        std::string msg = path.string() + ": incomplete (date, asset) grid; missing " +
                          std::to_string(panel.dates.size() * panel.assets.size() - cells.size()) +
                          " cells, first gaps:";
        for (const auto& h : holes) msg += " " + h;
        throw DataError(msg);
    }
    return panel;
}

void save_long_panel(const std::vector<Date>& dates, const std::vector<std::string>& assets,
                     const Mat& values, const std::string& header,
                     const std::filesystem::path& path) {
    CsvWriter w(header);
    for (std::size_t t = 0; t < dates.size(); ++t) {
        for (std::size_t i = 0; i < assets.size(); ++i) {
            w.field(to_iso(dates[t]));
            w.field(assets[i]);
            w.field(values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)));
            w.end_row();
        }
    }
    w.save(path);
}

}  // namespace

RvPanel load_rv_panel(const std::filesystem::path& path) {
    auto long_panel = load_long_panel(path, "date,asset,rv", true);
    RvPanel panel;
    panel.dates = std::move(long_panel.dates);
    panel.assets = std::move(long_panel.assets);
    panel.values = std::move(long_panel.values);
    panel.validate();
    return panel;
}

void save_rv_panel(const RvPanel& panel, const std::filesystem::path& path) {
    save_long_panel(panel.dates, panel.assets, panel.values, "date,asset,rv", path);
}

ReturnsPanel load_returns_panel(const std::filesystem::path& path) {
    auto long_panel = load_long_panel(path, "date,asset,ret", false);
    ReturnsPanel panel;
    panel.dates = std::move(long_panel.dates);
    panel.assets = std::move(long_panel.assets);
    panel.values = std::move(long_panel.values);
    return panel;
}

void save_returns_panel(const ReturnsPanel& panel, const std::filesystem::path& path) {
    save_long_panel(panel.dates, panel.assets, panel.values, "date,asset,ret", path);
}

std::vector<IntradaySeries> load_intraday(const std::filesystem::path& path) {
    const auto rows = read_csv(path, "date,asset,minute,price");
    std::map<std::pair<std::string, Date>, IntradaySeries> groups;
    for (const auto& row : rows) {
        const Date d = parse_iso(row.fields[0]);
        const int minute = parse_int(row.fields[2], row.line_number, "minute");
        const double price = parse_double(row.fields[3], row.line_number, "price");
        if (price <= 0.0)
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": nonpositive price");
        if (minute < 0)
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": negative minute");
        auto& series = groups[{row.fields[1], d}];
        series.asset = row.fields[1];
        series.day = d;
        series.prices.emplace_back(minute, price);
    }
    std::vector<IntradaySeries> out;
    out.reserve(groups.size());
    for (auto& [key, series] : groups) {
        std::sort(series.prices.begin(), series.prices.end());
        series.validate();
        out.push_back(std::move(series));
    }
    return out;
}

IndexRvSeries load_index_rv(const std::filesystem::path& path) {
    const auto rows = read_csv(path, "date,rv");
    std::map<Date, double> cells;
    for (const auto& row : rows) {
        const Date d = parse_iso(row.fields[0]);
        const double v = parse_double(row.fields[1], row.line_number, "rv");
        if (v < 0.0)
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": negative rv");
        if (cells.count(d))
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": duplicate date " + row.fields[0]);
        cells[d] = v;
    }
    IndexRvSeries out;
    for (auto& [d, v] : cells) {
        out.dates.push_back(d);
        out.values.push_back(v);
    }
    return out;
}

void save_index_rv(const IndexRvSeries& series, const std::filesystem::path& path) {
    CsvWriter w("date,rv");
    for (std::size_t t = 0; t < series.dates.size(); ++t) {
        w.field(to_iso(series.dates[t]));
        w.field(series.values[t]);
        w.end_row();
    }
    w.save(path);
}

}  // namespace volnet::data
