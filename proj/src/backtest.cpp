#include "volnet/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "volnet/errors.hpp"
#include "volnet/eval.hpp"
#include "volnet/io.hpp"
#include "volnet/rng.hpp"
#include "volnet/stats.hpp"

namespace volnet::backtest {

namespace fs = std::filesystem;

// ===========================================================================
// Spec
// ===========================================================================

std::string ModelEntry::id() const {
    return spec.name() + (ec == train::Criterion::Mse ? "_m" : "_q");
}

ModelEntry ModelEntry::parse(const std::string& id, int hidden_dim) {
    const auto pos = id.rfind('_');
    if (pos == std::string::npos || pos + 2 != id.size() ||
        (id[pos + 1] != 'm' && id[pos + 1] != 'q'))
        throw ConfigError("model id '" + id + "' must end in _m or _q");
    ModelEntry entry;
    entry.spec = model::ModelSpec::parse(id.substr(0, pos), hidden_dim);
    entry.ec = id[pos + 1] == 'm' ? train::Criterion::Mse : train::Criterion::Qlike;
    return entry;
}

void BacktestSpec::validate() const {
    if (train_months < 1) throw ConfigError("backtest: train_months must be >= 1");
    if (validation_months < 1) throw ConfigError("backtest: validation_months must be >= 1");
    if (refit_frequency < 1) throw ConfigError("backtest: refit_frequency must be >= 1");
    if (horizons.empty()) throw ConfigError("backtest: at least one horizon required");
    for (int h : horizons)
        if (h < 0) throw ConfigError("backtest: horizons must be nonnegative");
    if (models.empty()) throw ConfigError("backtest: at least one model required");
    std::set<std::string> ids;
    for (const auto& entry : models)
        if (!ids.insert(entry.id()).second)
            throw ConfigError("backtest: duplicate model " + entry.id());
    if (!(qlike_floor > 0.0)) throw ConfigError("backtest: qlike_floor must be positive");
    train_cfg.validate();
}

// ===========================================================================
// Windows
// ===========================================================================

std::vector<Window> make_windows(const std::vector<Date>& dates, const BacktestSpec& spec) {
    spec.validate();
    if (dates.empty()) throw DataError("make_windows: empty calendar");

    // First day index of every calendar month present in the panel.
    std::vector<int> month_starts;
    int prev_month = -1;
    for (int t = 0; t < static_cast<int>(dates.size()); ++t) {
        const int m = month_index(dates[static_cast<std::size_t>(t)]);
        if (m != prev_month) {
            month_starts.push_back(t);
            prev_month = m;
        }
    }
    const int n_months = static_cast<int>(month_starts.size());
    const int window_months = spec.train_months + spec.validation_months;
    if (n_months < window_months + 1)
        throw DataError("make_windows: insufficient history; need " +
                        std::to_string(window_months + 1) + " months, have " +
                        std::to_string(n_months));

    auto month_begin = [&](int m) {
        return m < n_months ? month_starts[static_cast<std::size_t>(m)]
                            : static_cast<int>(dates.size());
    };

    std::vector<Window> out;
    for (int k = window_months; k < n_months; k += spec.refit_frequency) {
        Window w;
        w.index = static_cast<int>(out.size());
        w.train_begin = month_begin(k - window_months);
        w.train_end = month_begin(k - spec.validation_months);
        w.val_begin = w.train_end;
        w.val_end = month_begin(k);
        w.test_begin = w.val_end;
        w.test_end = month_begin(std::min(k + spec.refit_frequency, n_months));
        out.push_back(w);
    }
    return out;
}

// ===========================================================================
// Rolling engine
// ===========================================================================

namespace {

struct FitContext {
    const data::RvPanel* panel = nullptr;
    std::map<int, data::LagFeatures> feature_cache;

    const data::LagFeatures& features(int t) {
        auto it = feature_cache.find(t);
        if (it == feature_cache.end())
            it = feature_cache.emplace(t, data::build_lag_features(*panel, t)).first;
        return it->second;
    }
};

Vec target_row(const data::RvPanel& panel, int t, int h) {
    Vec acc = Vec::Zero(panel.n_assets());
    for (int k = 0; k <= h; ++k) acc += panel.values.row(t + k).transpose();
    return acc;
}

train::DaySamples make_samples(FitContext& ctx, const std::vector<int>& origins, int h,
                               const Mat& w, const Mat& w2) {
    train::DaySamples samples;
    samples.w = w;
    samples.w2 = w2;
    for (int t : origins) {
        samples.features.push_back(ctx.features(t));
        samples.targets.push_back(target_row(*ctx.panel, t, h));
    }
    return samples;
}

std::vector<int> origin_range(int begin, int end, int h, int target_limit) {
    std::vector<int> out;
    for (int t = std::max(begin, 22); t < end; ++t)
        if (t + h < target_limit) out.push_back(t);
    return out;
}

Vec predict_linear(const model::ModelSpec& spec, const model::LinearParams& params,
                   const data::LagFeatures& v, const Mat& w, const Mat& w2) {
    switch (spec.kind) {
        case model::ModelKind::Har: return model::har_forward(v, params).values;
        case model::ModelKind::Ghar: return model::ghar_forward(v, w, params).values;
        case model::ModelKind::Ghar2Hop:
            return model::ghar2hop_forward(v, w, w2, params).values;
        default: throw ConfigError("predict_linear: not a linear model");
    }
}

model::LinearParams mean_linear_params(const std::vector<train::FittedModel>& members) {
    model::LinearParams mean = std::get<model::LinearParams>(members.front().params);
    for (std::size_t k = 1; k < members.size(); ++k) {
        const auto& p = std::get<model::LinearParams>(members[k].params);
        mean.alpha += p.alpha;
        mean.beta += p.beta;
        if (mean.gamma) *mean.gamma += *p.gamma;
        if (mean.delta) *mean.delta += *p.delta;
    }
    const double k = static_cast<double>(members.size());
    mean.alpha /= k;
    mean.beta /= k;
    if (mean.gamma) *mean.gamma /= k;
    if (mean.delta) *mean.delta /= k;
    return mean;
}

std::string window_tag(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%04d", index);
    return buf;
}

// Per-window output bundle, kept separate so interrupted runs can resume at
// window granularity.
struct WindowOutput {
    // key: (model position in spec, horizon)
    std::map<std::pair<int, int>, std::pair<std::vector<int>, std::vector<Vec>>> forecasts;
    std::vector<WindowCoefficients> coefficients;
    std::vector<MadDaily> mad;
    graph::Adjacency graph{0};
    std::vector<std::string> warnings;
};

void persist_window(const fs::path& dir, const Window& w, const WindowOutput& out,
                    const data::RvPanel& panel, const BacktestSpec& spec) {
    const std::string tag = window_tag(w.index);
    {
        CsvWriter writer("origin_date,asset,horizon,model,criterion,forecast");
        for (const auto& [key, block] : out.forecasts) {
            const auto& entry = spec.models[static_cast<std::size_t>(key.first)];
            const auto& [origins, rows] = block;
            for (std::size_t r = 0; r < origins.size(); ++r) {
                for (int i = 0; i < panel.n_assets(); ++i) {
                    writer.field(to_iso(panel.dates[static_cast<std::size_t>(origins[r])]));
                    writer.field(panel.assets[static_cast<std::size_t>(i)]);
                    writer.field(key.second);
                    writer.field(entry.spec.name());
                    writer.field(train::criterion_name(entry.ec));
                    writer.field(rows[r][i]);
                    writer.end_row();
                }
            }
        }
        writer.save(dir / (tag + "_forecasts.csv"));
    }
    {
        CsvWriter writer("model,horizon,coefficient,value,zeroed");
        for (const auto& wc : out.coefficients) {
            std::vector<std::string> names{"beta_d", "beta_w", "beta_m"};
            if (wc.params.gamma) names.insert(names.end(), {"gamma_d", "gamma_w", "gamma_m"});
            if (wc.params.delta) names.insert(names.end(), {"delta_d", "delta_w", "delta_m"});
            for (const auto& name : names) {
                writer.field(wc.model_id);
                writer.field(wc.horizon);
                writer.field(name);
                writer.field(eval::coefficient_value(wc.params, name));
                writer.field(static_cast<int>(std::count(wc.zeroed_columns.begin(),
                                                         wc.zeroed_columns.end(), name)));
                writer.end_row();
            }
        }
        writer.save(dir / (tag + "_coefficients.csv"));
    }
    {
        CsvWriter writer("origin_date,model,layers,mad");
        for (const auto& row : out.mad) {
            writer.field(to_iso(panel.dates[static_cast<std::size_t>(row.origin)]));
            writer.field(row.model_id);
            writer.field(row.layers);
            writer.field(row.value);
            writer.end_row();
        }
        writer.save(dir / (tag + "_mad.csv"));
    }
    graph::save_edge_list(out.graph, panel.assets, dir / (tag + "_edges.csv"));
    write_file(dir / (tag + ".done"), "ok\n");
}

WindowOutput load_window(const fs::path& dir, const Window& w, const data::RvPanel& panel,
                         const BacktestSpec& spec) {
    const std::string tag = window_tag(w.index);
    WindowOutput out;
    out.graph = graph::load_edge_list(dir / (tag + "_edges.csv"), panel.assets);

    std::map<Date, int> date_index;
    for (int t = 0; t < panel.days(); ++t) date_index[panel.dates[static_cast<std::size_t>(t)]] = t;
    std::map<std::string, int> asset_index;
    for (int i = 0; i < panel.n_assets(); ++i)
        asset_index[panel.assets[static_cast<std::size_t>(i)]] = i;
    std::map<std::string, int> model_pos;
    for (int m = 0; m < static_cast<int>(spec.models.size()); ++m)
        model_pos[spec.models[static_cast<std::size_t>(m)].id()] = m;

    for (const auto& row : read_csv(dir / (tag + "_forecasts.csv"),
                                    "origin_date,asset,horizon,model,criterion,forecast")) {
        const int t = date_index.at(parse_iso(row.fields[0]));
        const int i = asset_index.at(row.fields[1]);
        const int h = parse_int(row.fields[2], row.line_number, "horizon");
        const std::string id = row.fields[3] + "_" + (row.fields[4] == "mse" ? "m" : "q");
        const double value = parse_double(row.fields[5], row.line_number, "forecast");
        auto& block = out.forecasts[{model_pos.at(id), h}];
        if (block.first.empty() || block.first.back() != t) {
            block.first.push_back(t);
            block.second.emplace_back(Vec::Zero(panel.n_assets()));
        }
        block.second.back()[i] = value;
    }
    for (const auto& row : read_csv(dir / (tag + "_coefficients.csv"),
                                    "model,horizon,coefficient,value,zeroed")) {
        const std::string& id = row.fields[0];
        const int h = parse_int(row.fields[1], row.line_number, "horizon");
        const std::string& name = row.fields[2];
        const double value = parse_double(row.fields[3], row.line_number, "value");
        auto it = std::find_if(out.coefficients.begin(), out.coefficients.end(),
                               [&](const WindowCoefficients& wc) {
                                   return wc.model_id == id && wc.horizon == h;
                               });
        if (it == out.coefficients.end()) {
            WindowCoefficients wc;
            wc.window = w.index;
            wc.model_id = id;
            wc.horizon = h;
            out.coefficients.push_back(wc);
            it = out.coefficients.end() - 1;
        }
        auto set3 = [&](std::optional<model::Vec3>& slot, int pos) {
            if (!slot) slot = model::Vec3::Zero();
            (*slot)[pos] = value;
        };
        const int pos = name.back() == 'd' ? 0 : (name.back() == 'w' ? 1 : 2);
        if (name.rfind("beta_", 0) == 0)
            it->params.beta[pos] = value;
        else if (name.rfind("gamma_", 0) == 0)
            set3(it->params.gamma, pos);
        else
            set3(it->params.delta, pos);
        if (parse_int(row.fields[4], row.line_number, "zeroed") != 0)
            it->zeroed_columns.push_back(name);
    }
    for (const auto& row :
         read_csv(dir / (tag + "_mad.csv"), "origin_date,model,layers,mad")) {
        MadDaily md;
        md.window = w.index;
        md.origin = date_index.at(parse_iso(row.fields[0]));
        md.model_id = row.fields[1];
        md.layers = parse_int(row.fields[2], row.line_number, "layers");
        md.value = parse_double(row.fields[3], row.line_number, "mad");
        out.mad.push_back(md);
    }
    return out;
}

WindowOutput compute_window(const data::RvPanel& panel, const Mat& returns,
                            const BacktestSpec& spec, const Window& w) {
    WindowOutput out;
    FitContext ctx;
    ctx.panel = &panel;

    // Spillover graph from this window's returns only (no test-month data).
    const Mat window_returns =
        returns.middleRows(w.train_begin, w.val_end - w.train_begin);
    const auto grid = graph::default_penalty_grid(window_returns, spec.glasso.grid_size);
    out.graph = graph::glasso_graph(window_returns, grid, spec.glasso.folds, spec.glasso);
    const Mat norm_w = graph::normalize(out.graph);
    const Mat norm_w2 = graph::normalize(graph::hop2(out.graph));
    const int graph_diameter = graph::diameter(out.graph);

    const int min_horizon = *std::min_element(spec.horizons.begin(), spec.horizons.end());
    const Rng seed_root(spec.train_cfg.seed);

    for (int m = 0; m < static_cast<int>(spec.models.size()); ++m) {
        const auto& entry = spec.models[static_cast<std::size_t>(m)];
        // deeper stacks than the graph diameter cannot widen any receptive field
        if (entry.spec.kind == model::ModelKind::GnnHar && graph_diameter > 0 &&
            entry.spec.layers > graph_diameter)
            out.warnings.push_back("window " + std::to_string(w.index) + ": " + entry.id() +
                                   " has more layers than the graph diameter (" +
                                   std::to_string(graph_diameter) + ")");
        for (int h : spec.horizons) {
            const auto train_origins = origin_range(w.train_begin, w.train_end, h, w.train_end);
            const auto val_origins = origin_range(w.val_begin, w.val_end, h, w.val_end);
            const auto pooled_origins = origin_range(w.train_begin, w.val_end, h, w.val_end);
            if (train_origins.empty() || val_origins.empty())
                throw DataError("backtest window " + std::to_string(w.index) +
                                ": no usable training days at horizon " + std::to_string(h));

            train::TrainConfig cfg = spec.train_cfg;
            cfg.seed = seed_root.derive(static_cast<std::uint64_t>(w.index) * 1000003ULL +
                                        static_cast<std::uint64_t>(m) * 1009ULL +
                                        static_cast<std::uint64_t>(h));
            const train::EstimationCriterion ec{entry.ec, spec.qlike_floor};

            std::function<Vec(const data::LagFeatures&)> predict;
            std::optional<train::Ensemble> gnn_ensemble;

            if (entry.spec.is_linear() && entry.ec == train::Criterion::Mse) {
                // Closed-form OLS on the pooled train+validation window.
                const auto samples = make_samples(ctx, pooled_origins, h, norm_w, norm_w2);
                const auto fit = train::ols_fit(samples, entry.spec.kind);
                out.coefficients.push_back(
                    {w.index, entry.id(), h, fit.params, fit.zeroed_columns});
                predict = [spec_ = entry.spec, params = fit.params, &norm_w,
                           &norm_w2](const data::LagFeatures& v) {
                    return predict_linear(spec_, params, v, norm_w, norm_w2);
                };
            } else if (entry.spec.is_linear()) {
                // QLIKE linear: early-stop on the split to pick an epoch
                // budget, then refit on the pooled window for that budget.
                const auto train_samples = make_samples(ctx, train_origins, h, norm_w, norm_w2);
                const auto val_samples = make_samples(ctx, val_origins, h, norm_w, norm_w2);
                const auto preliminary =
                    train::ensemble_fit(entry.spec, train_samples, val_samples, ec, cfg);
                std::vector<double> best_epochs;
                for (const auto& member : preliminary.members)
                    best_epochs.push_back(static_cast<double>(member.best_epoch));
                const int budget =
                    std::max(1, static_cast<int>(quantile(best_epochs, 0.5)) + 1);
                const auto pooled = make_samples(ctx, pooled_origins, h, norm_w, norm_w2);
                auto final_fit =
                    train::ensemble_fit_fixed_epochs(entry.spec, pooled, ec, cfg, budget);
                out.coefficients.push_back(
                    {w.index, entry.id(), h, mean_linear_params(final_fit.members), {}});
                predict = [ens = std::move(final_fit), &norm_w,
                           &norm_w2](const data::LagFeatures& v) {
                    return ens.predict(v, norm_w, norm_w2);
                };
            } else {
                const auto train_samples = make_samples(ctx, train_origins, h, norm_w, norm_w2);
                const auto val_samples = make_samples(ctx, val_origins, h, norm_w, norm_w2);
                gnn_ensemble =
                    train::ensemble_fit(entry.spec, train_samples, val_samples, ec, cfg);
                predict = [&ens = *gnn_ensemble, &norm_w,
                           &norm_w2](const data::LagFeatures& v) {
                    return ens.predict(v, norm_w, norm_w2);
                };
            }

            auto& block = out.forecasts[{m, h}];
            for (int t = w.test_begin; t < w.test_end; ++t) {
                const auto& v = ctx.features(t);
                block.first.push_back(t);
                block.second.push_back(predict(v));
                // Over-smoothing diagnostic from the shortest-horizon fit.
                if (gnn_ensemble && h == min_horizon) {
                    const Mat hidden = gnn_ensemble->hidden(v, norm_w);
                    out.mad.push_back({w.index, entry.id(), entry.spec.layers, t,
                                       eval::mad(hidden, out.graph).value});
                }
            }
        }
    }
    return out;
}

}  // namespace

BacktestResult run_backtest(const data::RvPanel& panel, const Mat& returns,
                            const BacktestSpec& spec, const fs::path& persist_dir) {
    panel.validate();
    spec.validate();
    if (returns.rows() != panel.days() || returns.cols() != panel.n_assets())
        throw ConfigError("backtest: returns matrix not aligned with the rv panel");

    BacktestResult result;
    result.windows = make_windows(panel.dates, spec);

    // The month-based window should stay close to the configured day count.
    const Window& first = result.windows.front();
    const double actual_days = first.test_begin - first.train_begin;
    if (std::fabs(actual_days - spec.window_days) > 0.05 * spec.window_days)
        result.warnings.push_back(
            "window spans " + std::to_string(static_cast<int>(actual_days)) +
            " days; configured reference is " + std::to_string(spec.window_days));

    const bool persist = !persist_dir.empty();
    if (persist) fs::create_directories(persist_dir);

    std::map<std::pair<int, int>, std::pair<std::vector<int>, std::vector<Vec>>> merged;
    for (const auto& w : result.windows) {
        WindowOutput wo;
        if (persist && fs::exists(persist_dir / (window_tag(w.index) + ".done"))) {
            wo = load_window(persist_dir, w, panel, spec);
        } else {
            try {
                wo = compute_window(panel, returns, spec, w);
            } catch (const Error& e) {
                // reraise with the refit window attached
                const std::string ctx = "window " + std::to_string(w.index) + " (test block " +
                                        to_iso(panel.dates[static_cast<std::size_t>(w.test_begin)]) +
                                        ".." +
                                        to_iso(panel.dates[static_cast<std::size_t>(w.test_end - 1)]) +
                                        "): " + e.what();
                if (e.category() == "config") throw ConfigError(ctx);
                if (e.category() == "data") throw DataError(ctx);
                throw NumericError(ctx);
            }
            if (persist) persist_window(persist_dir, w, wo, panel, spec);
        }
        for (auto& [key, block] : wo.forecasts) {
            auto& acc = merged[key];
            acc.first.insert(acc.first.end(), block.first.begin(), block.first.end());
            acc.second.insert(acc.second.end(), block.second.begin(), block.second.end());
        }
        result.coefficients.insert(result.coefficients.end(), wo.coefficients.begin(),
                                   wo.coefficients.end());
        result.mad.insert(result.mad.end(), wo.mad.begin(), wo.mad.end());
        result.warnings.insert(result.warnings.end(), wo.warnings.begin(), wo.warnings.end());
    }

    for (auto& [key, block] : merged) {
        const auto& entry = spec.models[static_cast<std::size_t>(key.first)];
        ForecastSet fset;
        fset.model_id = entry.id();
        fset.criterion = entry.ec;
        fset.horizon = key.second;
        fset.origins = block.first;
        fset.forecasts.resize(static_cast<Eigen::Index>(block.first.size()), panel.n_assets());
        for (std::size_t r = 0; r < block.second.size(); ++r)
            fset.forecasts.row(static_cast<Eigen::Index>(r)) = block.second[r].transpose();
        result.forecasts.push_back(std::move(fset));
    }
    return result;
}

// ===========================================================================
// Forecast persistence (merged, evaluate-facing format)
// ===========================================================================

void save_forecasts(const BacktestResult& result, const data::RvPanel& panel,
                    const fs::path& path) {
    CsvWriter writer("origin_date,asset,horizon,model,criterion,forecast");
    for (const auto& fset : result.forecasts) {
        const auto base = fset.model_id.substr(0, fset.model_id.rfind('_'));
        for (std::size_t r = 0; r < fset.origins.size(); ++r) {
            for (int i = 0; i < panel.n_assets(); ++i) {
                writer.field(to_iso(panel.dates[static_cast<std::size_t>(fset.origins[r])]));
                writer.field(panel.assets[static_cast<std::size_t>(i)]);
                writer.field(fset.horizon);
                writer.field(base);
                writer.field(train::criterion_name(fset.criterion));
                writer.field(fset.forecasts(static_cast<Eigen::Index>(r), i));
                writer.end_row();
            }
        }
    }
    writer.save(path);
}

std::vector<ForecastSet> load_forecasts(const fs::path& path, const data::RvPanel& panel) {
    std::map<Date, int> date_index;
    for (int t = 0; t < panel.days(); ++t)
        date_index[panel.dates[static_cast<std::size_t>(t)]] = t;
    std::map<std::string, int> asset_index;
    for (int i = 0; i < panel.n_assets(); ++i)
        asset_index[panel.assets[static_cast<std::size_t>(i)]] = i;

    // key preserves first-appearance order of (model, criterion, horizon)
    std::vector<ForecastSet> sets;
    std::map<std::string, std::size_t> set_pos;
    std::map<std::string, std::map<int, Vec>> rows;  // set key -> origin -> values

    for (const auto& row : read_csv(path, "origin_date,asset,horizon,model,criterion,forecast")) {
        auto dit = date_index.find(parse_iso(row.fields[0]));
        if (dit == date_index.end())
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": forecast date not in the rv panel");
        auto ait = asset_index.find(row.fields[1]);
        if (ait == asset_index.end())
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": unknown asset '" + row.fields[1] + "'");
        const int h = parse_int(row.fields[2], row.line_number, "horizon");
        const std::string key = row.fields[3] + "_" + row.fields[4] + "@" + row.fields[2];
        if (!set_pos.count(key)) {
            set_pos[key] = sets.size();
            ForecastSet fset;
            fset.model_id =
                row.fields[3] + "_" + (row.fields[4] == "mse" ? "m" : "q");
            fset.criterion = train::parse_criterion(row.fields[4]);
            fset.horizon = h;
            sets.push_back(fset);
        }
        auto& value_map = rows[key];
        auto vit = value_map.find(dit->second);
        if (vit == value_map.end())
            vit = value_map.emplace(dit->second, Vec::Zero(panel.n_assets())).first;
        vit->second[ait->second] =
            parse_double(row.fields[5], row.line_number, "forecast");
    }

    for (auto& [key, pos] : set_pos) {
        auto& fset = sets[pos];
        const auto& value_map = rows[key];
        fset.origins.reserve(value_map.size());
        fset.forecasts.resize(static_cast<Eigen::Index>(value_map.size()), panel.n_assets());
        Eigen::Index r = 0;
        for (const auto& [origin, values] : value_map) {
            fset.origins.push_back(origin);
            fset.forecasts.row(r++) = values.transpose();
        }
    }
    return sets;
}

void save_coefficients(const std::vector<WindowCoefficients>& coefficients,
                       const fs::path& path) {
    CsvWriter writer("window,model,horizon,coefficient,value");
    for (const auto& row : eval::coefficient_trajectory_report(coefficients)) {
        writer.field(row.window);
        writer.field(row.model_id);
        writer.field(row.horizon);
        writer.field(row.coefficient);
        writer.field(row.value);
        writer.end_row();
    }
    writer.save(path);
}

void save_mad_daily(const std::vector<MadDaily>& mad, const data::RvPanel& panel,
                    const fs::path& path) {
    CsvWriter writer("window,origin_date,model,layers,mad");
    for (const auto& row : mad) {
        writer.field(row.window);
        writer.field(to_iso(panel.dates[static_cast<std::size_t>(row.origin)]));
        writer.field(row.model_id);
        writer.field(row.layers);
        writer.field(row.value);
        writer.end_row();
    }
    writer.save(path);
}

}  // namespace volnet::backtest
