#include "volnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "volnet/backtest.hpp"
#include "volnet/data.hpp"
#include "volnet/errors.hpp"
#include "volnet/eval.hpp"
#include "volnet/graph.hpp"
#include "volnet/io.hpp"
#include "volnet/model.hpp"
#include "volnet/stats.hpp"
#include "volnet/train.hpp"

namespace volnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SynthConfig {
    std::string dgp = "linear";  // "linear" or "relu"
    int assets = 10;
    int days = 1500;
    std::uint64_t seed = 1;
    std::string topology = "chain";  // "chain", "ring", "complete", or explicit edges
    std::vector<std::pair<int, int>> edges;
    double noise_scale = 0.25;
    double alpha = -0.2;                       // per-asset log-level intercept
    std::vector<double> beta{0.35, 0.25, 0.2};
    std::vector<double> gamma{0.12, 0.06, 0.0};
    data::ReluSynthOptions relu;
};

struct EvaluateConfig {
    std::string baseline = "har_m";
    double regime_quantile = 0.9;
    double mcs_alpha = 0.05;
    int mcs_bootstrap_reps = 1000;
    int mcs_block_length = 10;
};

struct RunConfig {
    std::uint64_t seed = 1;
    int workers = 0;
    std::string out = "out";
    std::string rv_panel_path;
    std::string returns_path;
    std::string index_rv_path;
    backtest::BacktestSpec backtest_spec;
    SynthConfig synth;
    EvaluateConfig evaluate;
    int hidden_dim = 9;
};

// Collects every violated field before failing, so one pass reports all
// problems at once.
class ConfigReader {
public:
    explicit ConfigReader(json root) : root_(std::move(root)) {}

    template <typename T>
    void get(const json& obj, const std::string& key, T& out, const std::string& path) {
        if (!obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            errors_.push_back(path + ": wrong type");
        }
    }

    const json* section(const std::string& key) {
        if (!root_.contains(key)) return nullptr;
        if (!root_.at(key).is_object()) {
            errors_.push_back(key + ": must be an object");
            return nullptr;
        }
        return &root_.at(key);
    }

    void require(bool cond, const std::string& message) {
        if (!cond) errors_.push_back(message);
    }

    void finish() const {
        if (errors_.empty()) return;
        std::string joined;
        for (const auto& e : errors_) {
            if (!joined.empty()) joined += "; ";
            joined += e;
        }
        throw ConfigError(joined);
    }

    const json& root() const { return root_; }

private:
    json root_;
    std::vector<std::string> errors_;
};

RunConfig load_config(const fs::path& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    ConfigReader reader(std::move(root));
    RunConfig cfg;

    reader.get(reader.root(), "seed", cfg.seed, "seed");
    reader.get(reader.root(), "workers", cfg.workers, "workers");
    reader.get(reader.root(), "out", cfg.out, "out");

    if (const json* data = reader.section("data")) {
        reader.get(*data, "rv_panel", cfg.rv_panel_path, "data.rv_panel");
        reader.get(*data, "returns", cfg.returns_path, "data.returns");
        reader.get(*data, "index_rv", cfg.index_rv_path, "data.index_rv");
    }

    auto& bt = cfg.backtest_spec;
    if (const json* b = reader.section("backtest")) {
        reader.get(*b, "window_days", bt.window_days, "backtest.window_days");
        reader.get(*b, "train_months", bt.train_months, "backtest.train_months");
        reader.get(*b, "validation_months", bt.validation_months, "backtest.validation_months");
        reader.get(*b, "refit_frequency", bt.refit_frequency, "backtest.refit_frequency");
        reader.get(*b, "horizons", bt.horizons, "backtest.horizons");
        reader.get(*b, "qlike_floor", bt.qlike_floor, "backtest.qlike_floor");
        std::vector<std::string> model_ids;
        reader.get(*b, "models", model_ids, "backtest.models");
        for (const auto& id : model_ids) {
            try {
                bt.models.push_back(backtest::ModelEntry::parse(id, cfg.hidden_dim));
            } catch (const ConfigError& e) {
                reader.require(false, std::string("backtest.models: ") + e.what());
            }
        }
    }
    if (const json* t = reader.section("train")) {
        auto& tc = bt.train_cfg;
        reader.get(*t, "learning_rate", tc.learning_rate, "train.learning_rate");
        reader.get(*t, "batch_size_days", tc.batch_size_days, "train.batch_size_days");
        reader.get(*t, "max_epochs", tc.max_epochs, "train.max_epochs");
        reader.get(*t, "patience_epochs", tc.patience_epochs, "train.patience_epochs");
        reader.get(*t, "ensemble_size", tc.ensemble_size, "train.ensemble_size");
        reader.get(*t, "hidden_dim_grid", tc.hidden_dim_grid, "train.hidden_dim_grid");
        reader.get(*t, "hidden_dim", cfg.hidden_dim, "train.hidden_dim");
        for (auto& entry : bt.models) entry.spec.hidden_dim = cfg.hidden_dim;
    }
    if (const json* g = reader.section("glasso")) {
        auto& gs = bt.glasso;
        reader.get(*g, "tol", gs.tol, "glasso.tol");
        reader.get(*g, "max_iter", gs.max_iter, "glasso.max_iter");
        reader.get(*g, "grid_size", gs.grid_size, "glasso.grid_size");
        reader.get(*g, "folds", gs.folds, "glasso.folds");
        reader.require(gs.folds >= 2, "glasso.folds: must be >= 2");
        reader.require(gs.grid_size >= 1, "glasso.grid_size: must be >= 1");
    }
    if (const json* s = reader.section("synth")) {
        auto& sc = cfg.synth;
        reader.get(*s, "dgp", sc.dgp, "synth.dgp");
        reader.get(*s, "assets", sc.assets, "synth.assets");
        reader.get(*s, "days", sc.days, "synth.days");
        reader.get(*s, "seed", sc.seed, "synth.seed");
        reader.get(*s, "topology", sc.topology, "synth.topology");
        reader.get(*s, "noise_scale", sc.noise_scale, "synth.noise_scale");
        reader.get(*s, "alpha", sc.alpha, "synth.alpha");
        reader.get(*s, "beta", sc.beta, "synth.beta");
        reader.get(*s, "gamma", sc.gamma, "synth.gamma");
        reader.get(*s, "edges", sc.edges, "synth.edges");
        reader.get(*s, "relu_gain", sc.relu.gain, "synth.relu_gain");
        reader.get(*s, "relu_knee", sc.relu.knee, "synth.relu_knee");
        reader.get(*s, "relu_noise_sigma", sc.relu.noise_sigma, "synth.relu_noise_sigma");
        reader.get(*s, "relu_base_level", sc.relu.base_level, "synth.relu_base_level");
        reader.require(sc.dgp == "linear" || sc.dgp == "relu",
                       "synth.dgp: must be 'linear' or 'relu'");
        reader.require(sc.assets >= 2, "synth.assets: must be >= 2");
        reader.require(sc.days >= 1, "synth.days: must be >= 1");
        reader.require(sc.beta.size() == 3, "synth.beta: must have 3 entries");
        reader.require(sc.gamma.size() == 3, "synth.gamma: must have 3 entries");
    }
    if (const json* e = reader.section("evaluate")) {
        auto& ev = cfg.evaluate;
        reader.get(*e, "baseline", ev.baseline, "evaluate.baseline");
        reader.get(*e, "regime_quantile", ev.regime_quantile, "evaluate.regime_quantile");
        reader.get(*e, "mcs_alpha", ev.mcs_alpha, "evaluate.mcs_alpha");
        reader.get(*e, "mcs_bootstrap_reps", ev.mcs_bootstrap_reps,
                   "evaluate.mcs_bootstrap_reps");
        reader.get(*e, "mcs_block_length", ev.mcs_block_length, "evaluate.mcs_block_length");
        reader.require(ev.regime_quantile > 0.0 && ev.regime_quantile < 1.0,
                       "evaluate.regime_quantile: must be in (0,1)");
    }
    reader.finish();
    bt.train_cfg.seed = cfg.seed;
    bt.train_cfg.workers = cfg.workers;
    bt.glasso.workers = cfg.workers;
    return cfg;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

json digest_inputs(const std::vector<fs::path>& inputs) {
    json out = json::object();
    for (const auto& p : inputs) out[p.string()] = file_digest(p);
    return out;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& config_echo, const std::vector<fs::path>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& notes = {}) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config_echo;
    manifest["inputs"] = digest_inputs(inputs);
    manifest["outputs"] = outputs;
    if (!notes.empty()) manifest["notes"] = notes;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

graph::Adjacency build_topology(const SynthConfig& sc) {
    graph::Adjacency a(sc.assets);
    if (!sc.edges.empty()) {
        for (auto [i, j] : sc.edges) a.add_edge(i, j);
        return a;
    }
    if (sc.topology == "chain") {
        for (int i = 0; i + 1 < sc.assets; ++i) a.add_edge(i, i + 1);
    } else if (sc.topology == "ring") {
        for (int i = 0; i + 1 < sc.assets; ++i) a.add_edge(i, i + 1);
        if (sc.assets > 2) a.add_edge(sc.assets - 1, 0);
    } else if (sc.topology == "complete") {
        for (int i = 0; i < sc.assets; ++i)
            for (int j = i + 1; j < sc.assets; ++j) a.add_edge(i, j);
    } else {
        throw ConfigError("synth.topology: unknown topology '" + sc.topology + "'");
    }
    return a;
}

int cmd_synth(const RunConfig& cfg, const fs::path& config_path) {
    const auto& sc = cfg.synth;
    const graph::Adjacency a = build_topology(sc);

    data::SynthResult result;
    json truth;
    if (sc.dgp == "linear") {
        model::LinearParams coef;
        coef.alpha = Vec::Constant(sc.assets, sc.alpha);
        coef.beta = model::Vec3(sc.beta[0], sc.beta[1], sc.beta[2]);
        if (sc.gamma[0] != 0.0 || sc.gamma[1] != 0.0 || sc.gamma[2] != 0.0)
            coef.gamma = model::Vec3(sc.gamma[0], sc.gamma[1], sc.gamma[2]);
        result = data::generate_synthetic_panel(a, coef, sc.noise_scale, sc.days, sc.seed);
        truth["alpha"] = sc.alpha;
        truth["beta"] = sc.beta;
        truth["gamma"] = sc.gamma;
        truth["noise_scale"] = sc.noise_scale;
    } else {
        result = data::generate_relu_spillover_panel(a, sc.beta[0], sc.beta[1], sc.beta[2],
                                                     sc.days, sc.seed, sc.relu);
        truth["beta"] = sc.beta;
        truth["relu_gain"] = sc.relu.gain;
        truth["relu_knee"] = sc.relu.knee;
        truth["noise_sigma"] = sc.relu.noise_sigma;
        truth["base_level"] = sc.relu.base_level;
    }
    truth["dgp"] = sc.dgp;
    truth["seed"] = sc.seed;
    json edges = json::array();
    for (int i = 0; i < a.size(); ++i)
        for (int j = i + 1; j < a.size(); ++j)
            if (a(i, j)) edges.push_back({i, j});
    truth["edges"] = edges;

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    data::save_rv_panel(result.panel, out_dir / "panel.csv");
    data::ReturnsPanel returns{result.panel.dates, result.panel.assets, result.returns};
    data::save_returns_panel(returns, out_dir / "returns.csv");
    data::IndexRvSeries index;
    index.dates = result.panel.dates;
    for (int t = 0; t < result.panel.days(); ++t)
        index.values.push_back(result.panel.values.row(t).mean());
    data::save_index_rv(index, out_dir / "index_rv.csv");
    graph::save_edge_list(a, result.panel.assets, out_dir / "graph.csv");
    write_file(out_dir / "truth.json", truth.dump(2) + "\n");

    write_manifest(out_dir, "synth", json::parse(read_file(config_path)), {config_path},
                   {"panel.csv", "returns.csv", "index_rv.csv", "graph.csv", "truth.json"});
    std::cout << "synth: wrote " << result.panel.days() << " days x "
              << result.panel.n_assets() << " assets to " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compute-rv
// ---------------------------------------------------------------------------

int cmd_compute_rv(const std::string& input, int delta, int base, const std::string& out,
                   const std::string& returns_out) {
    const auto series = data::load_intraday(input);
    if (series.empty()) throw DataError(input + ": no intraday data");

    CsvWriter rv_writer("date,asset,rv");
    std::map<std::pair<Date, std::string>, double> rv_rows;
    std::map<std::string, std::map<Date, double>> closes;
    for (const auto& s : series) {
        rv_rows[{s.day, s.asset}] = data::compute_daily_rv(s, delta, base);
        closes[s.asset][s.day] = s.prices.back().second;
    }
    for (const auto& [key, rv] : rv_rows) {
        rv_writer.field(to_iso(key.first));
        rv_writer.field(key.second);
        rv_writer.field(rv);
        rv_writer.end_row();
    }
    rv_writer.save(out);

    if (!returns_out.empty()) {
        // Close-to-close log returns; each asset's first day has no return.
        CsvWriter ret_writer("date,asset,ret");
        std::map<std::pair<Date, std::string>, double> ret_rows;
        for (const auto& [asset, by_day] : closes) {
            const double* prev = nullptr;
            for (const auto& [day, close] : by_day) {
                if (prev) ret_rows[{day, asset}] = std::log(close / *prev);
                prev = &by_day.at(day);
            }
        }
        for (const auto& [key, ret] : ret_rows) {
            ret_writer.field(to_iso(key.first));
            ret_writer.field(key.second);
            ret_writer.field(ret);
            ret_writer.end_row();
        }
        ret_writer.save(returns_out);
    }
    std::cout << "compute-rv: " << rv_rows.size() << " asset-days -> " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// estimate-graph
// ---------------------------------------------------------------------------

int cmd_estimate_graph(const RunConfig& cfg, const std::string& returns_path,
                       const std::vector<fs::path>& manifest_inputs, const json& config_echo) {
    const auto returns = data::load_returns_panel(returns_path);
    const auto grid = graph::default_penalty_grid(returns.values, cfg.backtest_spec.glasso.grid_size);
    const auto a = graph::glasso_graph(returns.values, grid, cfg.backtest_spec.glasso.folds,
                                       cfg.backtest_spec.glasso);

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    graph::save_edge_list(a, returns.assets, out_dir / "edges.csv");
    graph::save_spd_frequency(a, out_dir / "spd_frequency.csv");

    json summary;
    summary["nodes"] = a.size();
    summary["edges"] = a.edge_count();
    summary["density"] =
        a.size() > 1 ? 2.0 * a.edge_count() / (static_cast<double>(a.size()) * (a.size() - 1))
                     : 0.0;
    summary["diameter"] = graph::diameter(a);
    write_file(out_dir / "graph_summary.json", summary.dump(2) + "\n");

    write_manifest(out_dir, "estimate-graph", config_echo, manifest_inputs,
                   {"edges.csv", "spd_frequency.csv", "graph_summary.json"});
    std::cout << "estimate-graph: " << a.edge_count() << " edges over " << a.size()
              << " nodes -> " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

// The rv and returns files must cover the same assets; dates are intersected
// so close-to-close returns (which drop each asset's first day) align.
std::pair<data::RvPanel, Mat> align_panel_and_returns(const data::RvPanel& panel,
                                                      const data::ReturnsPanel& returns) {
    if (panel.assets != returns.assets)
        throw DataError("rv panel and returns cover different asset sets");
    std::set<Date> common(panel.dates.begin(), panel.dates.end());
    std::set<Date> return_dates(returns.dates.begin(), returns.dates.end());
    std::vector<Date> dates;
    for (const Date& d : panel.dates)
        if (return_dates.count(d)) dates.push_back(d);
    if (dates.size() < panel.dates.size() / 2 || dates.empty())
        throw DataError("rv panel and returns share too few dates");

    std::map<Date, int> panel_index, return_index;
    for (int t = 0; t < panel.days(); ++t) panel_index[panel.dates[static_cast<std::size_t>(t)]] = t;
    for (int t = 0; t < static_cast<int>(returns.dates.size()); ++t)
        return_index[returns.dates[static_cast<std::size_t>(t)]] = t;

    data::RvPanel aligned;
    aligned.dates = dates;
    aligned.assets = panel.assets;
    aligned.values.resize(static_cast<Eigen::Index>(dates.size()), panel.n_assets());
    Mat aligned_returns(static_cast<Eigen::Index>(dates.size()), panel.n_assets());
    for (std::size_t t = 0; t < dates.size(); ++t) {
        aligned.values.row(static_cast<Eigen::Index>(t)) =
            panel.values.row(panel_index.at(dates[t]));
        aligned_returns.row(static_cast<Eigen::Index>(t)) =
            returns.values.row(return_index.at(dates[t]));
    }
    return {std::move(aligned), std::move(aligned_returns)};
}

int cmd_backtest(const RunConfig& cfg, const fs::path& config_path) {
    if (cfg.rv_panel_path.empty() || cfg.returns_path.empty())
        throw ConfigError("backtest needs data.rv_panel and data.returns");
    const auto raw_panel = data::load_rv_panel(cfg.rv_panel_path);
    const auto raw_returns = data::load_returns_panel(cfg.returns_path);
    auto [panel, returns] = align_panel_and_returns(raw_panel, raw_returns);

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    const auto result = backtest::run_backtest(panel, returns, cfg.backtest_spec,
                                               out_dir / "windows");
    backtest::save_forecasts(result, panel, out_dir / "forecasts.csv");
    backtest::save_coefficients(result.coefficients, out_dir / "coefficients.csv");
    backtest::save_mad_daily(result.mad, panel, out_dir / "mad_daily.csv");

    std::vector<fs::path> inputs{config_path, cfg.rv_panel_path, cfg.returns_path};
    if (!cfg.index_rv_path.empty()) inputs.push_back(cfg.index_rv_path);
    write_manifest(out_dir, "backtest", json::parse(read_file(config_path)), inputs,
                   {"forecasts.csv", "coefficients.csv", "mad_daily.csv"}, result.warnings);
    for (const auto& note : result.warnings) std::cerr << "warning: " << note << "\n";
    std::cout << "backtest: " << result.windows.size() << " windows, "
              << result.forecasts.size() << " forecast sets -> " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const RunConfig& cfg, const std::string& forecasts_path,
                 const std::string& panel_path, const std::string& index_path,
                 const std::string& baseline, const std::vector<fs::path>& manifest_inputs,
                 const json& config_echo) {
    const auto panel = data::load_rv_panel(panel_path);
    const auto forecasts = backtest::load_forecasts(forecasts_path, panel);
    if (forecasts.empty()) throw DataError(forecasts_path + ": no forecasts");

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;

    // Regime partition over the out-of-sample origin dates.
    std::vector<int> all_origins = forecasts.front().origins;
    std::optional<eval::RegimePartition> regimes;
    std::vector<int> calm_origins, turbulent_origins;
    if (!index_path.empty()) {
        const auto index = data::load_index_rv(index_path);
        std::map<Date, double> by_date;
        for (std::size_t t = 0; t < index.dates.size(); ++t)
            by_date[index.dates[t]] = index.values[t];
        std::vector<double> oos_values;
        for (int t : all_origins) {
            auto it = by_date.find(panel.dates[static_cast<std::size_t>(t)]);
            if (it == by_date.end())
                throw DataError("index rv series missing date " +
                                to_iso(panel.dates[static_cast<std::size_t>(t)]));
            oos_values.push_back(it->second);
        }
        regimes = eval::stratify_by_regime(oos_values, cfg.evaluate.regime_quantile);
        for (int k : regimes->calm) calm_origins.push_back(all_origins[static_cast<std::size_t>(k)]);
        for (int k : regimes->turbulent)
            turbulent_origins.push_back(all_origins[static_cast<std::size_t>(k)]);

        CsvWriter w("date,index_rv,regime");
        for (std::size_t k = 0; k < all_origins.size(); ++k) {
            w.field(to_iso(panel.dates[static_cast<std::size_t>(all_origins[k])]));
            w.field(oos_values[k]);
            w.field(std::string(oos_values[k] <= regimes->threshold ? "calm" : "turbulent"));
            w.end_row();
        }
        w.save(out_dir / "regimes.csv");
        outputs.push_back("regimes.csv");
    }

    auto write_loss_table = [&](const std::string& name, const std::vector<int>* filter) {
        const auto rows = eval::loss_table(forecasts, panel, baseline, filter,
                                           cfg.backtest_spec.qlike_floor);
        CsvWriter w("model,horizon,mse,qlike,mse_ratio,qlike_ratio,n_days");
        for (const auto& r : rows) {
            w.field(r.model_id);
            w.field(r.horizon);
            w.field(r.mse);
            w.field(r.qlike);
            w.field(r.mse_ratio);
            w.field(r.qlike_ratio);
            w.field(static_cast<int>(r.n_days));
            w.end_row();
        }
        w.save(out_dir / name);
        outputs.push_back(name);
    };
    write_loss_table("loss_table.csv", nullptr);
    if (regimes) {
        write_loss_table("loss_table_calm.csv", &calm_origins);
        write_loss_table("loss_table_turbulent.csv", &turbulent_origins);
    }

    // Horizons present, in first-appearance order.
    std::vector<int> horizons;
    for (const auto& fs_ : forecasts)
        if (std::find(horizons.begin(), horizons.end(), fs_.horizon) == horizons.end())
            horizons.push_back(fs_.horizon);

    auto find_set = [&](const std::string& id, int h) -> const backtest::ForecastSet* {
        for (const auto& fs_ : forecasts)
            if (fs_.model_id == id && fs_.horizon == h) return &fs_;
        return nullptr;
    };

    // DM tests of every model against the baseline, per asset plus the
    // cross-sectional average row.
    {
        CsvWriter w("model,horizon,loss,asset,statistic,p_value");
        for (int h : horizons) {
            const auto* base_set = find_set(baseline, h);
            if (!base_set)
                throw ConfigError("baseline '" + baseline + "' missing at horizon " +
                                  std::to_string(h));
            for (const auto& fs_ : forecasts) {
                if (fs_.horizon != h || fs_.model_id == baseline) continue;
                for (auto kind : {train::Criterion::Mse, train::Criterion::Qlike}) {
                    const int n = panel.n_assets();
                    Mat la(static_cast<Eigen::Index>(fs_.origins.size()), n),
                        lb(static_cast<Eigen::Index>(fs_.origins.size()), n);
                    for (int i = 0; i < n; ++i) {
                        const auto sa = eval::asset_loss_series(fs_, panel, i, kind,
                                                                cfg.backtest_spec.qlike_floor);
                        const auto sb = eval::asset_loss_series(*base_set, panel, i, kind,
                                                                cfg.backtest_spec.qlike_floor);
                        la.col(i) = Eigen::Map<const Vec>(sa.data(),
                                                          static_cast<Eigen::Index>(sa.size()));
                        lb.col(i) = Eigen::Map<const Vec>(sb.data(),
                                                          static_cast<Eigen::Index>(sb.size()));
                        const auto dm = eval::dm_test(sa, sb, h);
                        w.field(fs_.model_id);
                        w.field(h);
                        w.field(train::criterion_name(kind));
                        w.field(panel.assets[static_cast<std::size_t>(i)]);
                        w.field(dm.statistic);
                        w.field(dm.p_value);
                        w.end_row();
                    }
                    const auto dm = eval::dm_test_cross_sectional(la, lb, h);
                    w.field(fs_.model_id);
                    w.field(h);
                    w.field(train::criterion_name(kind));
                    w.field(std::string("__cross__"));
                    w.field(dm.statistic);
                    w.field(dm.p_value);
                    w.end_row();
                }
            }
        }
        w.save(out_dir / "dm_results.csv");
        outputs.push_back("dm_results.csv");
    }

    // Model confidence set per (horizon, loss kind) over daily mean losses.
    {
        CsvWriter w("horizon,loss,model,p_value,in_set");
        for (int h : horizons) {
            std::vector<const backtest::ForecastSet*> sets;
            for (const auto& fs_ : forecasts)
                if (fs_.horizon == h) sets.push_back(&fs_);
            if (sets.size() < 2) continue;
            for (auto kind : {train::Criterion::Mse, train::Criterion::Qlike}) {
                Mat losses;
                for (std::size_t s = 0; s < sets.size(); ++s) {
                    const auto series = eval::daily_loss_series(*sets[s], panel, kind,
                                                                cfg.backtest_spec.qlike_floor);
                    if (losses.size() == 0)
                        losses.resize(static_cast<Eigen::Index>(sets.size()),
                                      static_cast<Eigen::Index>(series.size()));
                    losses.row(static_cast<Eigen::Index>(s)) =
                        Eigen::Map<const Vec>(series.data(),
                                              static_cast<Eigen::Index>(series.size()))
                            .transpose();
                }
                const auto result = eval::mcs(losses, cfg.evaluate.mcs_alpha,
                                              cfg.evaluate.mcs_bootstrap_reps,
                                              cfg.evaluate.mcs_block_length, cfg.seed);
                for (std::size_t s = 0; s < sets.size(); ++s) {
                    w.field(h);
                    w.field(train::criterion_name(kind));
                    w.field(sets[s]->model_id);
                    w.field(result.p_values[s]);
                    w.field(static_cast<int>(std::find(result.surviving.begin(),
                                                       result.surviving.end(),
                                                       static_cast<int>(s)) !=
                                             result.surviving.end()));
                    w.end_row();
                }
            }
        }
        w.save(out_dir / "mcs.csv");
        outputs.push_back("mcs.csv");
    }

    // FVU against the baseline per day.
    {
        CsvWriter w("date,model,horizon,fvu");
        for (int h : horizons) {
            const auto* base_set = find_set(baseline, h);
            for (const auto& fs_ : forecasts) {
                if (fs_.horizon != h || fs_.model_id == baseline) continue;
                const Vec series = eval::fvu(fs_.forecasts, base_set->forecasts);
                for (std::size_t r = 0; r < fs_.origins.size(); ++r) {
                    w.field(to_iso(panel.dates[static_cast<std::size_t>(fs_.origins[r])]));
                    w.field(fs_.model_id);
                    w.field(h);
                    const double v = series[static_cast<Eigen::Index>(r)];
                    w.field(std::isnan(v) ? std::string("") : format_double(v));
                    w.end_row();
                }
            }
        }
        w.save(out_dir / "fvu.csv");
        outputs.push_back("fvu.csv");
    }

    // Box-plot summaries of forecast errors and ratios.
    {
        const auto rows =
            eval::error_ratio_report(forecasts, panel, regimes ? &calm_origins : nullptr);
        CsvWriter w("model,horizon,regime,metric,median,q1,q3,lo_whisker,hi_whisker,n");
        for (const auto& r : rows) {
            w.field(r.model_id);
            w.field(r.horizon);
            w.field(r.regime);
            w.field(r.metric);
            w.field(r.box.median);
            w.field(r.box.q1);
            w.field(r.box.q3);
            w.field(r.box.lo_whisker);
            w.field(r.box.hi_whisker);
            w.field(static_cast<int>(r.box.n));
            w.end_row();
        }
        w.save(out_dir / "boxplot_summary.csv");
        outputs.push_back("boxplot_summary.csv");
    }

    // Aggregate the backtest's per-day MAD into the per-window table, when
    // the file sits next to the forecasts.
    const fs::path mad_daily = fs::path(forecasts_path).parent_path() / "mad_daily.csv";
    if (fs::exists(mad_daily)) {
        std::map<std::tuple<int, std::string, int>, std::pair<double, int>> acc;
        for (const auto& row :
             read_csv(mad_daily, "window,origin_date,model,layers,mad")) {
            const int window = parse_int(row.fields[0], row.line_number, "window");
            const int layers = parse_int(row.fields[3], row.line_number, "layers");
            const double v = parse_double(row.fields[4], row.line_number, "mad");
            auto& slot = acc[{window, row.fields[2], layers}];
            slot.first += v;
            slot.second += 1;
        }
        CsvWriter w("window,model,layers,mad");
        for (const auto& [key, slot] : acc) {
            w.field(std::get<0>(key));
            w.field(std::get<1>(key));
            w.field(std::get<2>(key));
            w.field(slot.first / slot.second);
            w.end_row();
        }
        w.save(out_dir / "mad.csv");
        outputs.push_back("mad.csv");
    }

    write_manifest(out_dir, "evaluate", config_echo, manifest_inputs, outputs);
    std::cout << "evaluate: report bundle -> " << out_dir.string() << "\n";
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv) {
    CLI::App app{"volnet: graph-augmented realized volatility forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> workers_override;
    app.add_option("--config", config_path, "JSON configuration file")->capture_default_str();
    app.add_option("--out", out_override, "output directory (overrides config)");
    app.add_option("--seed", seed_override, "master seed (overrides config)");
    app.add_option("--workers", workers_override, "worker threads (overrides config)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic rv panel and returns");
    auto* compute_rv =
        app.add_subcommand("compute-rv", "compute daily realized volatility from intraday data");
    std::string intraday_path, rv_out, returns_out;
    int delta = 5, base = 1;
    compute_rv->add_option("--input", intraday_path, "intraday csv (date,asset,minute,price)")
        ->required();
    compute_rv->add_option("--delta", delta, "sampling window in minutes")
        ->capture_default_str();
    compute_rv->add_option("--base", base, "subsample offset resolution in minutes")
        ->capture_default_str();
    compute_rv->add_option("--rv-out", rv_out, "output rv csv")->required();
    compute_rv->add_option("--returns-out", returns_out, "optional close-to-close returns csv");

    auto* estimate = app.add_subcommand("estimate-graph", "estimate the spillover graph");
    std::string returns_path;
    estimate->add_option("--returns", returns_path, "returns csv (date,asset,ret)")->required();

    auto* bt = app.add_subcommand("backtest", "run the rolling forecasting experiment");
    auto* ev = app.add_subcommand("evaluate", "score forecasts and build the report bundle");
    std::string forecasts_path, panel_path, index_path, baseline = "har_m";
    ev->add_option("--forecasts", forecasts_path, "forecast csv from the backtest")->required();
    ev->add_option("--panel", panel_path, "realized volatility panel csv")->required();
    ev->add_option("--index-rv", index_path, "index rv csv for regime stratification");
    ev->add_option("--baseline", baseline, "baseline model id")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return ConfigError::exit_code;
    }

    try {
        RunConfig cfg;
        json config_echo = json::object();
        if (!config_path.empty()) {
            cfg = load_config(config_path);
            config_echo = json::parse(read_file(config_path));
        } else if (synth->parsed() || bt->parsed()) {
            throw ConfigError("--config is required for this subcommand");
        }
        if (!out_override.empty()) cfg.out = out_override;
        if (seed_override) {
            cfg.seed = *seed_override;
            cfg.backtest_spec.train_cfg.seed = *seed_override;
        }
        if (workers_override) {
            cfg.workers = *workers_override;
            cfg.backtest_spec.train_cfg.workers = *workers_override;
            cfg.backtest_spec.glasso.workers = *workers_override;
        }

        if (synth->parsed()) return cmd_synth(cfg, config_path);
        if (compute_rv->parsed())
            return cmd_compute_rv(intraday_path, delta, base, rv_out, returns_out);
        if (estimate->parsed()) {
            std::vector<fs::path> inputs{returns_path};
            if (!config_path.empty()) inputs.push_back(config_path);
            return cmd_estimate_graph(cfg, returns_path, inputs, config_echo);
        }
        if (bt->parsed()) return cmd_backtest(cfg, config_path);
        if (ev->parsed()) {
            std::vector<fs::path> inputs{forecasts_path, panel_path};
            if (!index_path.empty()) inputs.push_back(index_path);
            if (!config_path.empty()) inputs.push_back(config_path);
            return cmd_evaluate(cfg, forecasts_path, panel_path, index_path, baseline, inputs,
                                config_echo);
        }
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return ConfigError::exit_code;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return DataError::exit_code;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return NumericError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace volnet::cli
