#include "volnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "volnet/errors.hpp"
#include "volnet/rng.hpp"
#include "volnet/stats.hpp"
#include "volnet/train.hpp"

namespace volnet::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double cell_loss(double actual, double predicted, train::Criterion kind, double floor) {
    if (kind == train::Criterion::Mse) {
        const double e = actual - predicted;
        return e * e;
    }
    if (!(actual > 0.0)) throw DataError("qlike loss needs positive actuals");
    const double p = std::max(predicted, floor);
    const double ratio = actual / p;
    return ratio - std::log(ratio) - 1.0;
}

}  // namespace

// ===========================================================================
// Alignment and loss series
// ===========================================================================

std::vector<int> trim_origins_for_horizon(const std::vector<int>& origins, int horizon,
                                          int panel_days) {
    std::vector<int> out;
    for (int t : origins)
        if (t + horizon < panel_days) out.push_back(t);
    return out;
}

Mat aligned_targets(const data::RvPanel& panel, const std::vector<int>& origins, int horizon) {
    Mat targets(static_cast<Eigen::Index>(origins.size()), panel.n_assets());
    for (std::size_t k = 0; k < origins.size(); ++k) {
        const int t = origins[k];
        if (t < 0 || t + horizon >= panel.days())
            throw DataError("forecast origin " + std::to_string(t) +
                            " has no horizon-" + std::to_string(horizon) + " target");
        Vec acc = Vec::Zero(panel.n_assets());
        for (int j = 0; j <= horizon; ++j) acc += panel.values.row(t + j).transpose();
        targets.row(static_cast<Eigen::Index>(k)) = acc.transpose();
    }
    return targets;
}

namespace {

// Rows of `fs` whose origins (optionally filtered) have valid targets.
std::vector<std::size_t> usable_rows(const backtest::ForecastSet& fs, int panel_days,
                                     const std::vector<int>* day_filter) {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < fs.origins.size(); ++k) {
        const int t = fs.origins[k];
        if (t + fs.horizon >= panel_days) continue;
        if (day_filter &&
            std::find(day_filter->begin(), day_filter->end(), t) == day_filter->end())
            continue;
        rows.push_back(k);
    }
    return rows;
}

}  // namespace

std::vector<double> daily_loss_series(const backtest::ForecastSet& fs,
                                      const data::RvPanel& actual, train::Criterion kind,
                                      double qlike_floor) {
    const auto rows = usable_rows(fs, actual.days(), nullptr);
    std::vector<int> origins;
    for (auto k : rows) origins.push_back(fs.origins[k]);
    const Mat targets = aligned_targets(actual, origins, fs.horizon);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double day_loss = 0.0;
        for (Eigen::Index i = 0; i < targets.cols(); ++i)
            day_loss += cell_loss(targets(static_cast<Eigen::Index>(r), i),
                                  fs.forecasts(static_cast<Eigen::Index>(rows[r]), i), kind,
                                  qlike_floor);
        out.push_back(day_loss / static_cast<double>(targets.cols()));
    }
    return out;
}

std::vector<double> asset_loss_series(const backtest::ForecastSet& fs,
                                      const data::RvPanel& actual, int asset,
                                      train::Criterion kind, double qlike_floor) {
    if (asset < 0 || asset >= actual.n_assets()) throw ConfigError("asset index out of range");
    const auto rows = usable_rows(fs, actual.days(), nullptr);
    std::vector<int> origins;
    for (auto k : rows) origins.push_back(fs.origins[k]);
    const Mat targets = aligned_targets(actual, origins, fs.horizon);
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.push_back(cell_loss(targets(static_cast<Eigen::Index>(r), asset),
                                fs.forecasts(static_cast<Eigen::Index>(rows[r]), asset), kind,
                                qlike_floor));
    return out;
}

// ===========================================================================
// Loss table
// ===========================================================================

std::vector<LossTableRow> loss_table(const std::vector<backtest::ForecastSet>& forecasts,
                                     const data::RvPanel& actual,
                                     const std::string& baseline_id,
                                     const std::vector<int>* day_filter, double qlike_floor) {
    std::vector<LossTableRow> rows;
    for (const auto& fs : forecasts) {
        const auto keep = usable_rows(fs, actual.days(), day_filter);
        if (keep.empty())
            throw DataError("loss table: no usable forecast days for " + fs.model_id +
                            " at horizon " + std::to_string(fs.horizon));
        std::vector<int> origins;
        for (auto k : keep) origins.push_back(fs.origins[k]);
        const Mat targets = aligned_targets(actual, origins, fs.horizon);
        LossTableRow row;
        row.model_id = fs.model_id;
        row.horizon = fs.horizon;
        row.n_days = static_cast<long>(keep.size());
        double mse = 0.0, qlike = 0.0;
        for (std::size_t r = 0; r < keep.size(); ++r) {
            for (Eigen::Index i = 0; i < targets.cols(); ++i) {
                const double y = targets(static_cast<Eigen::Index>(r), i);
                const double p = fs.forecasts(static_cast<Eigen::Index>(keep[r]), i);
                mse += cell_loss(y, p, train::Criterion::Mse, qlike_floor);
                qlike += cell_loss(y, p, train::Criterion::Qlike, qlike_floor);
            }
        }
        const double cells = static_cast<double>(keep.size()) * targets.cols();
        row.mse = mse / cells;
        row.qlike = qlike / cells;
        rows.push_back(row);
    }

    // Ratios against the baseline at the same horizon.
    std::map<int, const LossTableRow*> baseline_rows;
    for (const auto& row : rows)
        if (row.model_id == baseline_id) baseline_rows[row.horizon] = &row;
    for (auto& row : rows) {
        auto it = baseline_rows.find(row.horizon);
        if (it == baseline_rows.end())
            throw ConfigError("loss table: baseline '" + baseline_id +
                              "' missing at horizon " + std::to_string(row.horizon));
        row.mse_ratio = row.mse / it->second->mse;
        row.qlike_ratio = row.qlike / it->second->qlike;
    }
    return rows;
}

// ===========================================================================
// Diebold-Mariano
// ===========================================================================

DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b,
                 int horizon) {
    if (loss_a.size() != loss_b.size()) throw ConfigError("dm: loss series length mismatch");
    const int n = static_cast<int>(loss_a.size());
    if (n < 10) throw ConfigError("dm: need at least 10 observations");
    if (horizon < 0) throw ConfigError("dm: horizon must be nonnegative");

    std::vector<double> d(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        d[static_cast<std::size_t>(t)] = loss_a[static_cast<std::size_t>(t)] -
                                         loss_b[static_cast<std::size_t>(t)];
    const double dbar = mean(d);

    bool all_zero = true;
    for (double x : d)
        if (x != 0.0) all_zero = false;
    DmResult out;
    out.lag = horizon;
    if (all_zero) return out;  // statistic 0, p-value 1

    // Bartlett-weighted Newey-West long-run variance with lag = horizon.
    const double nf = static_cast<double>(n);
    double gamma0 = 0.0;
    for (double x : d) gamma0 += (x - dbar) * (x - dbar);
    gamma0 /= nf;
    double lrv = gamma0;
    for (int l = 1; l <= horizon; ++l) {
        double g = 0.0;
        for (int t = l; t < n; ++t)
            g += (d[static_cast<std::size_t>(t)] - dbar) *
                 (d[static_cast<std::size_t>(t - l)] - dbar);
        g /= nf;
        lrv += 2.0 * (1.0 - static_cast<double>(l) / (horizon + 1)) * g;
    }
    if (!(lrv > 0.0)) lrv = gamma0;
    if (!(lrv > 0.0))
        throw NumericError("dm: degenerate loss differential (zero variance, nonzero mean)");

    const double dm = dbar / std::sqrt(lrv / nf);
    const double h = static_cast<double>(horizon + 1);
    const double harvey = std::sqrt((nf + 1.0 - 2.0 * h + h * (h - 1.0) / nf) / nf);
    out.statistic = harvey * dm;
    out.p_value = student_t_two_sided_p(out.statistic, nf - 1.0);
    return out;
}

DmResult dm_test_cross_sectional(const Mat& loss_a, const Mat& loss_b, int horizon) {
    if (loss_a.rows() != loss_b.rows() || loss_a.cols() != loss_b.cols())
        throw ConfigError("dm: loss matrix shape mismatch");
    std::vector<double> a(static_cast<std::size_t>(loss_a.rows()));
    std::vector<double> b(a.size());
    for (Eigen::Index t = 0; t < loss_a.rows(); ++t) {
        a[static_cast<std::size_t>(t)] = loss_a.row(t).mean();
        b[static_cast<std::size_t>(t)] = loss_b.row(t).mean();
    }
    DmResult out = dm_test(a, b, horizon);
    out.cross_sectional = true;
    return out;
}

// ===========================================================================
// Model confidence set
// ===========================================================================

McsResult mcs(const Mat& losses, double alpha, int bootstrap_reps, int block_length,
              std::uint64_t seed) {
    const int m = static_cast<int>(losses.rows());
    const int n = static_cast<int>(losses.cols());
    if (m < 2) throw ConfigError("mcs: need at least 2 models");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("mcs: alpha must be in (0,1)");
    if (bootstrap_reps < 100) throw ConfigError("mcs: need at least 100 bootstrap reps");
    if (block_length < 1 || block_length > n)
        throw ConfigError("mcs: block length must be in [1, days]");
    if (n < 2 * block_length) throw DataError("mcs: too few days for the block length");
    if (!losses.allFinite()) throw DataError("mcs: nonfinite losses");

    // Moving-block bootstrap means per (rep, model); the same day resampling
    // is shared by all models within a rep.
    Rng rng(seed);
    Mat boot_means = Mat::Zero(bootstrap_reps, m);
    std::vector<int> sample(static_cast<std::size_t>(n));
    const int starts = n - block_length + 1;
    for (int b = 0; b < bootstrap_reps; ++b) {
        int filled = 0;
        while (filled < n) {
            const int s = rng.uniform_int(starts);
            for (int j = 0; j < block_length && filled < n; ++j)
                sample[static_cast<std::size_t>(filled++)] = s + j;
        }
        for (int u = 0; u < m; ++u) {
            double acc = 0.0;
            for (int t : sample) acc += losses(u, t);
            boot_means(b, u) = acc / static_cast<double>(n);
        }
    }
    Vec full_means(m);
    for (int u = 0; u < m; ++u) full_means[u] = losses.row(u).mean();

    // Full elimination sequence; p-values are monotonized along the way.
    McsResult out;
    out.alpha = alpha;
    out.p_values.assign(static_cast<std::size_t>(m), 1.0);
    std::vector<int> active(static_cast<std::size_t>(m));
    for (int u = 0; u < m; ++u) active[static_cast<std::size_t>(u)] = u;
    double p_prev = 0.0;

    while (active.size() > 1) {
        const auto k = active.size();
        // Pairwise studentized statistics on the active set.
        double t_range = 0.0;
        int worst = active[0];
        double worst_score = -std::numeric_limits<double>::infinity();
        Mat var(k, k);
        for (std::size_t a = 0; a < k; ++a) {
            double best_t_for_a = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                if (a == c) continue;
                const int u = active[a], v = active[c];
                const double dbar = full_means[u] - full_means[v];
                double s2 = 0.0;
                for (int b = 0; b < bootstrap_reps; ++b) {
                    const double e = (boot_means(b, u) - boot_means(b, v)) - dbar;
                    s2 += e * e;
                }
                s2 /= static_cast<double>(bootstrap_reps);
                var(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = s2;
                const double t_uv = dbar / std::max(std::sqrt(s2), 1e-150);
                t_range = std::max(t_range, std::fabs(t_uv));
                best_t_for_a = std::max(best_t_for_a, t_uv);
            }
            if (best_t_for_a > worst_score) {
                worst_score = best_t_for_a;
                worst = active[a];
            }
        }

        // Bootstrap null distribution of the range statistic.
        int exceed = 0;
        for (int b = 0; b < bootstrap_reps; ++b) {
            double t_star = 0.0;
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t c = a + 1; c < k; ++c) {
                    const int u = active[a], v = active[c];
                    const double centered = (boot_means(b, u) - boot_means(b, v)) -
                                            (full_means[u] - full_means[v]);
                    const double s = std::max(
                        std::sqrt(var(static_cast<Eigen::Index>(a),
                                      static_cast<Eigen::Index>(c))), 1e-150);
                    t_star = std::max(t_star, std::fabs(centered) / s);
                }
            }
            if (t_star >= t_range) ++exceed;
        }
        const double p = static_cast<double>(exceed) / bootstrap_reps;
        p_prev = std::max(p_prev, p);
        out.p_values[static_cast<std::size_t>(worst)] = p_prev;
        out.elimination_order.push_back(worst);
        active.erase(std::find(active.begin(), active.end(), worst));
    }
    out.p_values[static_cast<std::size_t>(active.front())] = 1.0;

    for (int u = 0; u < m; ++u)
        if (out.p_values[static_cast<std::size_t>(u)] >= alpha) out.surviving.push_back(u);
    return out;
}

// ===========================================================================
// Regimes, FVU, MAD
// ===========================================================================

RegimePartition stratify_by_regime(const std::vector<double>& index_rv, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("regime quantile must be in (0,1)");
    if (index_rv.empty()) throw ConfigError("regime stratification needs a nonempty series");
    RegimePartition out;
    out.threshold = order_statistic_quantile(index_rv, q);
    for (int t = 0; t < static_cast<int>(index_rv.size()); ++t) {
        if (index_rv[static_cast<std::size_t>(t)] <= out.threshold)
            out.calm.push_back(t);
        else
            out.turbulent.push_back(t);
    }
    return out;
}

Vec fvu(const Mat& model_preds, const Mat& baseline_preds) {
    if (model_preds.rows() != baseline_preds.rows() ||
        model_preds.cols() != baseline_preds.cols())
        throw ConfigError("fvu: shape mismatch");
    Vec out(model_preds.rows());
    for (Eigen::Index t = 0; t < model_preds.rows(); ++t) {
        const double num = (model_preds.row(t) - baseline_preds.row(t)).squaredNorm();
        const double mean_f = model_preds.row(t).mean();
        const double den = (model_preds.row(t).array() - mean_f).square().sum();
        out[t] = den > 0.0 ? num / den : kNaN;
    }
    return out;
}

MadResult mad(const Mat& hidden, const graph::Adjacency& a) {
    if (hidden.rows() != a.size()) throw ConfigError("mad: representation/graph size mismatch");
    // distances below this are roundoff from exactly-parallel rows, not a
    // positive separation
    constexpr double positive_eps = 1e-12;
    const int n = a.size();
    MadResult out;
    std::vector<double> norms(static_cast<std::size_t>(n));
    std::vector<bool> valid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        norms[static_cast<std::size_t>(i)] = hidden.row(i).norm();
        valid[static_cast<std::size_t>(i)] = norms[static_cast<std::size_t>(i)] > 0.0;
        if (!valid[static_cast<std::size_t>(i)] && a.degree(i) > 0) ++out.excluded_nodes;
    }
    double sum_dbar = 0.0;
    int positive_dbar = 0;
    for (int i = 0; i < n; ++i) {
        if (!valid[static_cast<std::size_t>(i)]) continue;
        double row_sum = 0.0;
        int row_positive = 0;
        for (int j = 0; j < n; ++j) {
            if (!a(i, j) || !valid[static_cast<std::size_t>(j)]) continue;
            const double cosine = hidden.row(i).dot(hidden.row(j)) /
                                  (norms[static_cast<std::size_t>(i)] *
                                   norms[static_cast<std::size_t>(j)]);
            const double dist = 1.0 - cosine;
            if (dist > positive_eps) {
                row_sum += dist;
                ++row_positive;
            }
        }
        if (row_positive > 0) {
            sum_dbar += row_sum / row_positive;
            ++positive_dbar;
        }
    }
    out.value = positive_dbar > 0 ? sum_dbar / positive_dbar : 0.0;
    return out;
}

// ===========================================================================
// Distribution reports
// ===========================================================================

BoxSummary five_number_summary(std::vector<double> values) {
    if (values.empty()) throw ConfigError("five-number summary of empty sample");
    BoxSummary box;
    box.n = static_cast<long>(values.size());
    box.median = quantile(values, 0.5);
    box.q1 = quantile(values, 0.25);
    box.q3 = quantile(values, 0.75);
    const double iqr = box.q3 - box.q1;
    const double lo_fence = box.q1 - 1.5 * iqr;
    const double hi_fence = box.q3 + 1.5 * iqr;
    box.lo_whisker = std::numeric_limits<double>::infinity();
    box.hi_whisker = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (v >= lo_fence) box.lo_whisker = std::min(box.lo_whisker, v);
        if (v <= hi_fence) box.hi_whisker = std::max(box.hi_whisker, v);
    }
    return box;
}

std::vector<ErrorRatioRow> error_ratio_report(const std::vector<backtest::ForecastSet>& forecasts,
                                              const data::RvPanel& actual,
                                              const std::vector<int>* calm_origins) {
    std::vector<ErrorRatioRow> out;
    for (const auto& fs : forecasts) {
        const auto keep = usable_rows(fs, actual.days(), nullptr);
        std::vector<int> origins;
        for (auto k : keep) origins.push_back(fs.origins[k]);
        const Mat targets = aligned_targets(actual, origins, fs.horizon);

        auto collect = [&](const std::vector<std::size_t>& rows, const std::string& regime) {
            if (rows.empty()) return;
            std::vector<double> errors, ratios;
            for (std::size_t r : rows) {
                for (Eigen::Index i = 0; i < targets.cols(); ++i) {
                    const double y = targets(static_cast<Eigen::Index>(r), i);
                    const double p = fs.forecasts(static_cast<Eigen::Index>(keep[r]), i);
                    errors.push_back(p - y);
                    if (y > 0.0) ratios.push_back(p / y);
                }
            }
            out.push_back({fs.model_id, fs.horizon, regime, "error",
                           five_number_summary(errors)});
            if (!ratios.empty())
                out.push_back({fs.model_id, fs.horizon, regime, "ratio",
                               five_number_summary(ratios)});
        };

        std::vector<std::size_t> all_rows(keep.size());
        for (std::size_t r = 0; r < keep.size(); ++r) all_rows[r] = r;
        collect(all_rows, "all");
        if (calm_origins) {
            std::vector<std::size_t> calm_rows, turb_rows;
            for (std::size_t r = 0; r < keep.size(); ++r) {
                const bool is_calm = std::find(calm_origins->begin(), calm_origins->end(),
                                               origins[r]) != calm_origins->end();
                (is_calm ? calm_rows : turb_rows).push_back(r);
            }
            collect(calm_rows, "calm");
            collect(turb_rows, "turbulent");
        }
    }
    return out;
}

double coefficient_value(const model::LinearParams& params, const std::string& name) {
    auto pick = [&](const model::Vec3& v, char tag) {
        if (tag == 'd') return v[0];
        if (tag == 'w') return v[1];
        return v[2];
    };
    if (name.size() == 6 && name.rfind("beta_", 0) == 0) return pick(params.beta, name[5]);
    if (name.size() == 7 && name.rfind("gamma_", 0) == 0) {
        if (!params.gamma) throw ConfigError("model has no coefficient '" + name + "'");
        return pick(*params.gamma, name[6]);
    }
    if (name.size() == 7 && name.rfind("delta_", 0) == 0) {
        if (!params.delta) throw ConfigError("model has no coefficient '" + name + "'");
        return pick(*params.delta, name[6]);
    }
    throw ConfigError("unknown coefficient '" + name + "'");
}

std::vector<TrajectoryRow> coefficient_trajectory_report(
    const std::vector<backtest::WindowCoefficients>& fits) {
    std::vector<TrajectoryRow> out;
    for (const auto& fit : fits) {
        std::vector<std::string> names{"beta_d", "beta_w", "beta_m"};
        if (fit.params.gamma) names.insert(names.end(), {"gamma_d", "gamma_w", "gamma_m"});
        if (fit.params.delta) names.insert(names.end(), {"delta_d", "delta_w", "delta_m"});
        for (const auto& name : names)
            out.push_back({fit.window, fit.model_id, fit.horizon, name,
                           coefficient_value(fit.params, name)});
    }
    return out;
}

}  // namespace volnet::eval
