#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "volnet/io.hpp"
#include "volnet/data.hpp"
#include "volnet/errors.hpp"
#include "volnet/model.hpp"
#include "volnet/rng.hpp"
#include "volnet/train.hpp"

using namespace volnet;
using model::ModelKind;
using model::ModelSpec;
using model::Vec3;
using train::Criterion;
using train::EstimationCriterion;

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

TEST_CASE("mse: zero, hand value, quadratic homogeneity") {
    Mat a(1, 2), p(1, 2);
    a << 1, 1;
    p << 0, 2;
    CHECK(train::mse_loss(a, a) == 0.0);
    CHECK(train::mse_loss(a, p) == doctest::Approx(1.0));
    CHECK(train::mse_loss(3.0 * a, 3.0 * p) == doctest::Approx(9.0));
    CHECK_THROWS_AS(train::mse_loss(a, Mat::Zero(2, 2)), ConfigError);
}

TEST_CASE("qlike: closed forms and the under-prediction asymmetry") {
    Mat y(1, 1), p(1, 1);
    y << 1.0;
    p << 1.0;
    CHECK(train::qlike_loss(y, p) == 0.0);
    p << 0.5;
    CHECK(train::qlike_loss(y, p) == doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-12));
    p << 1.5;
    CHECK(train::qlike_loss(y, p) ==
          doctest::Approx(2.0 / 3.0 - std::log(2.0 / 3.0) - 1.0).epsilon(1e-12));

    // under-predictions are penalized more than equal over-predictions
    for (int i = 1; i <= 100; ++i) {
        const double yv = 0.2 + 0.07 * i;
        const double d = 0.49 * yv * (i % 10 + 1) / 10.0;
        Mat actual(1, 1), under(1, 1), over(1, 1);
        actual << yv;
        under << yv - d;
        over << yv + d;
        CHECK(train::qlike_loss(actual, under) > train::qlike_loss(actual, over));
    }

    // floor: predictions at or below the floor are clamped
    p << -3.0;
    const double floored = train::qlike_loss(y, p, 1e-8);
    Mat pf(1, 1);
    pf << 1e-8;
    CHECK(floored == train::qlike_loss(y, pf, 1e-8));

    Mat bad(1, 1);
    bad << 0.0;
    CHECK_THROWS_AS(train::qlike_loss(bad, p), DataError);
}

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

namespace {

// Exact-fit synthetic samples for a linear model kind.
train::DaySamples exact_samples(ModelKind kind, int n, int days, Rng& rng,
                                model::LinearParams& truth, const Mat& w, const Mat& w2) {
    train::DaySamples s;
    s.w = w;
    s.w2 = w2;
    truth.alpha = Vec(n);
    for (int i = 0; i < n; ++i) truth.alpha[i] = rng.normal();
    truth.beta = Vec3(0.45, 0.3, 0.15);
    truth.gamma.reset();
    truth.delta.reset();
    if (kind != ModelKind::Har) truth.gamma = Vec3(0.2, -0.1, 0.05);
    if (kind == ModelKind::Ghar2Hop) truth.delta = Vec3(0.07, 0.04, -0.02);
    for (int d = 0; d < days; ++d) {
        data::LagFeatures v;
        v.origin = 22 + d;
        v.matrix = Mat(n, 3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 3; ++j) v.matrix(i, j) = 0.5 + rng.uniform();
        Vec y = truth.alpha + v.matrix * truth.beta;
        if (truth.gamma) y += (w * v.matrix) * (*truth.gamma);
        if (truth.delta) y += (w2 * v.matrix) * (*truth.delta);
        s.features.push_back(v);
        s.targets.push_back(y);
    }
    return s;
}

}  // namespace

TEST_CASE("ols: exact recovery for every linear kind") {
    Rng rng(51);
    graph::Adjacency a(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
    const Mat w = graph::normalize(a);
    const Mat w2 = graph::normalize(graph::hop2(a));
    for (ModelKind kind : {ModelKind::Har, ModelKind::Ghar, ModelKind::Ghar2Hop}) {
        model::LinearParams truth;
        const auto samples = exact_samples(kind, 5, 60, rng, truth, w, w2);
        const auto fit = train::ols_fit(samples, kind);
        CHECK((fit.params.alpha - truth.alpha).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((fit.params.beta - truth.beta).cwiseAbs().maxCoeff() < 1e-10);
        if (truth.gamma)
            CHECK((*fit.params.gamma - *truth.gamma).cwiseAbs().maxCoeff() < 1e-10);
        if (truth.delta)
            CHECK((*fit.params.delta - *truth.delta).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(fit.zeroed_columns.empty());
    }
}

TEST_CASE("ols: matches the normal-equations oracle on noisy data") {
    Rng rng(52);
    const int n = 4, days = 80;
    model::LinearParams truth;
    const Mat w = Mat::Zero(n, n);
    auto samples = exact_samples(ModelKind::Har, n, days, rng, truth, w, w);
    for (auto& y : samples.targets)
        for (int i = 0; i < n; ++i) y[i] += 0.05 * rng.normal();

    const auto fit = train::ols_fit(samples, ModelKind::Har);

    Mat x(days * n, n + 3);
    Vec y(days * n);
    x.setZero();
    for (int d = 0; d < days; ++d)
        for (int i = 0; i < n; ++i) {
            x(d * n + i, i) = 1.0;
            x.block(d * n + i, n, 1, 3) = samples.features[static_cast<std::size_t>(d)].matrix.row(i);
            y[d * n + i] = samples.targets[static_cast<std::size_t>(d)][i];
        }
    const Vec oracle = oracles::normal_equation_ols(x, y);
    CHECK((fit.params.alpha - oracle.head(n)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fit.params.beta - oracle.tail(3)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ols: first-order optimality under random perturbations") {
    Rng rng(53);
    const int n = 3, days = 50;
    model::LinearParams truth;
    const Mat w = Mat::Zero(n, n);
    auto samples = exact_samples(ModelKind::Har, n, days, rng, truth, w, w);
    for (auto& y : samples.targets)
        for (int i = 0; i < n; ++i) y[i] += 0.1 * rng.normal();
    const auto fit = train::ols_fit(samples, ModelKind::Har);

    auto pooled_mse = [&](const model::LinearParams& p) {
        double acc = 0.0;
        for (int d = 0; d < days; ++d) {
            const Vec pred = p.alpha + samples.features[static_cast<std::size_t>(d)].matrix * p.beta;
            acc += (pred - samples.targets[static_cast<std::size_t>(d)]).squaredNorm();
        }
        return acc;
    };
    const double at_fit = pooled_mse(fit.params);
    for (int rep = 0; rep < 50; ++rep) {
        model::LinearParams p = fit.params;
        for (int i = 0; i < n; ++i) p.alpha[i] += 1e-4 * rng.normal();
        for (int j = 0; j < 3; ++j) p.beta[j] += 1e-4 * rng.normal();
        CHECK(pooled_mse(p) >= at_fit - 1e-12);
    }
}

TEST_CASE("ols: duplicate feature columns raise a rank error naming them") {
    Rng rng(54);
    train::DaySamples s;
    s.w = Mat::Zero(2, 2);
    for (int d = 0; d < 30; ++d) {
        data::LagFeatures v;
        v.origin = 22 + d;
        v.matrix = Mat(2, 3);
        for (int i = 0; i < 2; ++i) {
            const double x = rng.uniform();
            v.matrix(i, 0) = x;
            v.matrix(i, 1) = x;  // duplicate of the daily column
            v.matrix(i, 2) = rng.uniform();
        }
        s.features.push_back(v);
        s.targets.push_back(Vec::Random(2));
    }
    CHECK_THROWS_WITH_AS(train::ols_fit(s, ModelKind::Har), doctest::Contains("beta"),
                         NumericError);
}

TEST_CASE("ols: structurally zero spillover columns are pinned, not fatal") {
    Rng rng(55);
    model::LinearParams truth;
    const Mat w = Mat::Zero(4, 4);  // empty graph
    auto samples = exact_samples(ModelKind::Har, 4, 50, rng, truth, w, w);
    const auto fit = train::ols_fit(samples, ModelKind::Ghar);
    REQUIRE(fit.params.gamma.has_value());
    CHECK(fit.params.gamma->isZero(0));
    CHECK(fit.zeroed_columns == std::vector<std::string>{"gamma_d", "gamma_w", "gamma_m"});
    CHECK((fit.params.beta - truth.beta).cwiseAbs().maxCoeff() < 1e-10);
}

// ---------------------------------------------------------------------------
// Gradient engine
// ---------------------------------------------------------------------------

namespace {

train::DaySamples random_samples(int n, int days, const Mat& w, const Mat& w2, Rng& rng) {
    train::DaySamples s;
    s.w = w;
    s.w2 = w2;
    for (int d = 0; d < days; ++d) {
        data::LagFeatures v;
        v.origin = 22 + d;
        v.matrix = Mat(n, 3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 3; ++j) v.matrix(i, j) = 0.5 + rng.uniform();
        s.features.push_back(v);
        Vec y(n);
        for (int i = 0; i < n; ++i) y[i] = 0.5 + rng.uniform();
        s.targets.push_back(y);
    }
    return s;
}

}  // namespace

TEST_CASE("gradients match central finite differences for all kinds and criteria") {
    Rng rng(61);
    graph::Adjacency a(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}});
    const Mat w = graph::normalize(a);
    const Mat w2 = graph::normalize(graph::hop2(a));
    const auto samples = random_samples(6, 8, w, w2, rng);
    std::vector<int> day_index{0, 1, 2, 3, 4, 5, 6, 7};

    const std::vector<ModelSpec> specs{
        {ModelKind::Har, 0, 9},    {ModelKind::Ghar, 0, 9}, {ModelKind::Ghar2Hop, 0, 9},
        {ModelKind::GnnHar, 1, 5}, {ModelKind::GnnHar, 2, 4},
    };
    for (const auto& spec : specs) {
        for (Criterion kind : {Criterion::Mse, Criterion::Qlike}) {
            const train::GradientEngine engine(spec, 6, {kind, 1e-8});
            int accepted = 0;
            while (accepted < 4) {
                Vec flat(engine.param_count());
                for (Eigen::Index k = 0; k < flat.size(); ++k) flat[k] = 0.4 * rng.normal();
                if (kind == Criterion::Qlike) flat.head(6).array() += 1.0;
                // skip points whose pre-activations or floor margins sit so
                // close to a kink that the difference step straddles it
                if (!oracles::safe_fd_point(engine, flat, samples, day_index, 1e-4,
                                            kind == Criterion::Qlike))
                    continue;
                ++accepted;
                Vec grad;
                const double loss = engine.loss_and_grad(flat, samples, day_index, grad);
                CHECK(std::isfinite(loss));
                const Vec fd = oracles::finite_difference_gradient(
                    [&](const Vec& x) { return engine.loss(x, samples, day_index); }, flat,
                    1e-6);
                const double denom =
                    std::max({grad.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-12});
                CHECK((grad - fd).cwiseAbs().maxCoeff() / denom < 1e-6);
            }
        }
    }
}

TEST_CASE("gradient engine pack/unpack round trip") {
    const ModelSpec spec{ModelKind::GnnHar, 2, 4};
    const train::GradientEngine engine(spec, 5, {Criterion::Mse, 1e-8});
    Rng rng(62);
    Vec flat(engine.param_count());
    for (Eigen::Index k = 0; k < flat.size(); ++k) flat[k] = rng.normal();
    const auto params = engine.unpack(flat);
    CHECK(engine.pack(params) == flat);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

namespace {

std::pair<train::DaySamples, train::DaySamples> split_samples(const train::DaySamples& s,
                                                              int train_days) {
    train::DaySamples train_part, val_part;
    train_part.w = val_part.w = s.w;
    train_part.w2 = val_part.w2 = s.w2;
    for (int d = 0; d < s.n_days(); ++d) {
        auto& dst = d < train_days ? train_part : val_part;
        dst.features.push_back(s.features[static_cast<std::size_t>(d)]);
        dst.targets.push_back(s.targets[static_cast<std::size_t>(d)]);
    }
    return {train_part, val_part};
}

}  // namespace

TEST_CASE("adam: har under mse converges to the ols solution on pooled data") {
    Rng rng(63);
    const int n = 5;
    model::LinearParams truth;
    const Mat w = Mat::Zero(n, n);
    auto samples = exact_samples(ModelKind::Har, n, 400, rng, truth, w, w);
    for (auto& y : samples.targets)
        for (int i = 0; i < n; ++i) y[i] += 0.05 * rng.normal();

    const auto ols = train::ols_fit(samples, ModelKind::Har);

    // full-batch training on the same pooled data; the fixed budget must be
    // long enough to walk down the ill-conditioned valley
    train::TrainConfig cfg;
    cfg.learning_rate = 3e-4;
    cfg.batch_size_days = 400;
    cfg.max_epochs = 20000;
    cfg.patience_epochs = 10;
    cfg.seed = 9;
    const auto fit = train::adam_fit_fixed_epochs({ModelKind::Har, 0, 9}, samples,
                                                  {Criterion::Mse, 1e-8}, cfg, 15000);
    const auto& p = std::get<model::LinearParams>(fit.params);
    CHECK((p.beta - ols.params.beta).cwiseAbs().maxCoeff() < 2e-3);
    CHECK((p.alpha - ols.params.alpha).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("adam: early-stopping contract holds") {
    Rng rng(67);
    auto samples = random_samples(4, 120, Mat::Zero(4, 4), Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 90);
    train::TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.patience_epochs = 15;
    cfg.seed = 2;
    const auto fit = train::adam_fit({ModelKind::Har, 0, 9}, train_part, val_part,
                                     {Criterion::Mse, 1e-8}, cfg);
    REQUIRE(fit.best_epoch >= 0);
    double min_val = std::numeric_limits<double>::infinity();
    for (const auto& pt : fit.training_curve) min_val = std::min(min_val, pt.val_loss);
    CHECK(fit.training_curve[static_cast<std::size_t>(fit.best_epoch)].val_loss == min_val);
    // stopped at most patience epochs past the best one (or hit the cap)
    CHECK(static_cast<int>(fit.training_curve.size()) <=
          std::max(fit.best_epoch + cfg.patience_epochs + 1, cfg.max_epochs));
}

TEST_CASE("adam: constant targets drive alpha to the constant and betas to zero") {
    Rng rng(64);
    const int n = 3;
    auto samples = random_samples(n, 120, Mat::Zero(n, n), Mat(), rng);
    for (auto& y : samples.targets) y.setConstant(2.0);

    train::TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size_days = 120;
    cfg.max_epochs = 30000;
    cfg.patience_epochs = 10;
    cfg.seed = 5;
    const auto fit = train::adam_fit_fixed_epochs({ModelKind::Har, 0, 9}, samples,
                                                  {Criterion::Mse, 1e-8}, cfg, 20000);
    const auto& p = std::get<model::LinearParams>(fit.params);
    CHECK((p.alpha.array() - 2.0).abs().maxCoeff() < 0.02);
    CHECK(p.beta.cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("adam: determinism and divergence signalling") {
    Rng rng(65);
    auto samples = random_samples(4, 60, Mat::Zero(4, 4), Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 50);
    train::TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.patience_epochs = 29;
    cfg.seed = 17;

    const ModelSpec spec{ModelKind::GnnHar, 1, 4};
    const auto f1 = train::adam_fit(spec, train_part, val_part, {Criterion::Mse, 1e-8}, cfg);
    const auto f2 = train::adam_fit(spec, train_part, val_part, {Criterion::Mse, 1e-8}, cfg);
    const train::GradientEngine engine(spec, 4, {Criterion::Mse, 1e-8});
    CHECK(engine.pack(f1.params) == engine.pack(f2.params));
    cfg.seed = 18;
    const auto f3 = train::adam_fit(spec, train_part, val_part, {Criterion::Mse, 1e-8}, cfg);
    CHECK(engine.pack(f1.params) != engine.pack(f3.params));

    train::TrainConfig wild = cfg;
    wild.learning_rate = 1e160;
    CHECK_THROWS_AS(train::adam_fit({ModelKind::Har, 0, 9}, train_part, val_part,
                                    {Criterion::Mse, 1e-8}, wild),
                    NumericError);
}

TEST_CASE("adam: validation must follow training chronologically") {
    Rng rng(66);
    auto samples = random_samples(3, 40, Mat::Zero(3, 3), Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 30);
    train::TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.patience_epochs = 4;
    CHECK_THROWS_AS(train::adam_fit({ModelKind::Har, 0, 9}, val_part, train_part,
                                    {Criterion::Mse, 1e-8}, cfg),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// Grid search and ensembles
// ---------------------------------------------------------------------------

TEST_CASE("grid search: singleton grid, empty grid") {
    Rng rng(71);
    graph::Adjacency a(4, {{0, 1}, {1, 2}, {2, 3}});
    const Mat w = graph::normalize(a);
    auto samples = random_samples(4, 60, w, Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 45);
    train::TrainConfig cfg;
    cfg.max_epochs = 20;
    cfg.patience_epochs = 19;
    cfg.ensemble_size = 1;
    cfg.hidden_dim_grid = {7};
    const auto [dim, table] = train::grid_search_hidden_dim(
        {ModelKind::GnnHar, 1, 9}, train_part, val_part, {Criterion::Mse, 1e-8}, cfg);
    CHECK(dim == 7);
    CHECK(table.size() == 1);

    cfg.hidden_dim_grid = {};
    CHECK_THROWS_AS(train::grid_search_hidden_dim({ModelKind::GnnHar, 1, 9}, train_part,
                                                  val_part, {Criterion::Mse, 1e-8}, cfg),
                    ConfigError);
}

TEST_CASE("grid search: rank-9 hidden structure prefers width 9 over 3") {
    graph::Adjacency a(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}, {2, 5}});
    const Mat w = graph::normalize(a);
    int wins = 0;
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + static_cast<std::uint64_t>(seed));
        // ground truth: a width-9 one-layer network with strong mixing
        Mat theta(3, 9);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 9; ++j) theta(i, j) = rng.normal();
        Vec gamma(9);
        for (int j = 0; j < 9; ++j)
            gamma[j] = (j % 2 == 0 ? 1.0 : -1.0) * (0.5 + rng.uniform());

        train::DaySamples samples;
        samples.w = w;
        for (int d = 0; d < 240; ++d) {
            data::LagFeatures v;
            v.origin = 22 + d;
            v.matrix = Mat(6, 3);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 3; ++j) v.matrix(i, j) = rng.uniform() * 2.0;
            Vec y = ((w * v.matrix) * theta).cwiseMax(0.0) * gamma;
            for (int i = 0; i < 6; ++i) y[i] += 0.01 * rng.normal();
            samples.features.push_back(v);
            samples.targets.push_back(y);
        }
        const auto [train_part, val_part] = split_samples(samples, 180);
        train::TrainConfig cfg;
        cfg.learning_rate = 5e-3;
        cfg.batch_size_days = 32;
        cfg.max_epochs = 120;
        cfg.patience_epochs = 30;
        cfg.ensemble_size = 2;
        cfg.seed = static_cast<std::uint64_t>(seed) * 101 + 7;
        cfg.hidden_dim_grid = {3, 9};
        const auto [dim, table] = train::grid_search_hidden_dim(
            {ModelKind::GnnHar, 1, 9}, train_part, val_part, {Criterion::Mse, 1e-8}, cfg);
        if (dim == 9) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("ensembles: size one, identical seeds, jensen inequality, init sanity") {
    Rng rng(73);
    graph::Adjacency a(4, {{0, 1}, {1, 2}, {2, 3}});
    const Mat w = graph::normalize(a);
    auto samples = random_samples(4, 80, w, Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 60);
    const ModelSpec spec{ModelKind::GnnHar, 1, 5};
    const EstimationCriterion ec{Criterion::Mse, 1e-8};

    train::TrainConfig cfg;
    cfg.max_epochs = 25;
    cfg.patience_epochs = 24;
    cfg.ensemble_size = 1;
    cfg.seed = 3;
    const auto single = train::adam_fit(spec, train_part, val_part, ec, cfg, 0);
    const auto ens1 = train::ensemble_fit(spec, train_part, val_part, ec, cfg);
    const train::GradientEngine engine(spec, 4, ec);
    CHECK(engine.pack(ens1.members[0].params) == engine.pack(single.params));

    cfg.ensemble_size = 4;
    const auto ens = train::ensemble_fit(spec, train_part, val_part, ec, cfg);
    CHECK(ens.members.size() == 4);

    // jensen: ensemble mse <= mean of member mses on a fixed test set
    double mean_member = 0.0, ensemble_loss = 0.0;
    for (int d = 0; d < val_part.n_days(); ++d) {
        const auto& v = val_part.features[static_cast<std::size_t>(d)];
        const Vec& y = val_part.targets[static_cast<std::size_t>(d)];
        Vec avg = Vec::Zero(4);
        for (const auto& member : ens.members) {
            const Vec pred =
                model::gnnhar_forward(v, w, std::get<model::GnnParams>(member.params)).values;
            mean_member += (pred - y).squaredNorm();
            avg += pred;
        }
        avg /= static_cast<double>(ens.members.size());
        ensemble_loss += (avg - y).squaredNorm();
        CHECK((ens.predict(v, w) - avg).cwiseAbs().maxCoeff() < 1e-14);
    }
    mean_member /= static_cast<double>(ens.members.size());
    CHECK(ensemble_loss <= mean_member + 1e-12);

    // identical seeds for all members produce identical members
    train::TrainConfig same = cfg;
    std::vector<train::FittedModel> clones;
    for (int k = 0; k < 3; ++k)
        clones.push_back(train::adam_fit(spec, train_part, val_part, ec, same, k));
    CHECK(engine.pack(clones[0].params) == engine.pack(clones[1].params));
    CHECK(engine.pack(clones[1].params) == engine.pack(clones[2].params));

    // first-epoch losses stay finite across the hidden-dimension grid
    for (int dim : {3, 6, 9, 16, 32}) {
        train::TrainConfig probe = cfg;
        probe.max_epochs = 2;
        probe.patience_epochs = 1;
        const auto fit =
            train::adam_fit({ModelKind::GnnHar, 1, dim}, train_part, val_part, ec, probe);
        CHECK(std::isfinite(fit.training_curve.front().train_loss));
        CHECK(std::isfinite(fit.training_curve.front().val_loss));
    }
}

TEST_CASE("qlike training reaches ratio-one predictions (floor inactive)") {
    Rng rng(74);
    auto samples = random_samples(3, 150, Mat::Zero(3, 3), Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 120);
    train::TrainConfig cfg;
    cfg.learning_rate = 2e-3;
    cfg.batch_size_days = 150;
    cfg.max_epochs = 2000;
    cfg.patience_epochs = 300;
    cfg.seed = 11;
    const auto fit = train::adam_fit({ModelKind::Har, 0, 9}, train_part, val_part,
                                     {Criterion::Qlike, 1e-8}, cfg);
    const auto& p = std::get<model::LinearParams>(fit.params);
    double ratio_sum = 0.0;
    int cells = 0;
    for (int d = 0; d < train_part.n_days(); ++d) {
        const Vec pred =
            p.alpha + train_part.features[static_cast<std::size_t>(d)].matrix * p.beta;
        for (int i = 0; i < 3; ++i) {
            ratio_sum += train_part.targets[static_cast<std::size_t>(d)][i] / pred[i];
            ++cells;
        }
    }
    CHECK(std::fabs(ratio_sum / cells - 1.0) < 0.05);
}

TEST_CASE("fixed-epoch training runs without validation and reports a flat curve") {
    Rng rng(75);
    auto samples = random_samples(3, 60, Mat::Zero(3, 3), Mat(), rng);
    train::TrainConfig cfg;
    cfg.max_epochs = 100;
    cfg.patience_epochs = 10;
    const auto fit = train::adam_fit_fixed_epochs({ModelKind::Har, 0, 9}, samples,
                                                  {Criterion::Mse, 1e-8}, cfg, 12);
    CHECK(fit.training_curve.size() == 12);
    CHECK(fit.best_epoch == 11);
    CHECK_THROWS_AS(train::adam_fit_fixed_epochs({ModelKind::Har, 0, 9}, samples,
                                                 {Criterion::Mse, 1e-8}, cfg, 0),
                    ConfigError);
}

TEST_CASE("ols homogeneity: scaling features and targets scales the forecasts") {
    Rng rng(76);
    graph::Adjacency a(4, {{0, 1}, {1, 2}, {2, 3}});
    const Mat w = graph::normalize(a);
    model::LinearParams truth;
    auto samples = exact_samples(ModelKind::Ghar, 4, 60, rng, truth, w, w);
    for (auto& y : samples.targets)
        for (int i = 0; i < 4; ++i) y[i] += 0.05 * rng.normal();

    const double scale = 3.75;
    train::DaySamples scaled = samples;
    for (auto& f : scaled.features) f.matrix *= scale;
    for (auto& y : scaled.targets) y *= scale;

    const auto base_fit = train::ols_fit(samples, ModelKind::Ghar);
    const auto scaled_fit = train::ols_fit(scaled, ModelKind::Ghar);
    for (int d = 0; d < 5; ++d) {
        const Vec f0 = model::ghar_forward(samples.features[static_cast<std::size_t>(d)], w,
                                           base_fit.params)
                           .values;
        const Vec f1 = model::ghar_forward(scaled.features[static_cast<std::size_t>(d)], w,
                                           scaled_fit.params)
                           .values;
        CHECK((f1 - scale * f0).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("training curve csv") {
    Rng rng(77);
    auto samples = random_samples(3, 50, Mat::Zero(3, 3), Mat(), rng);
    const auto [train_part, val_part] = split_samples(samples, 40);
    train::TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.patience_epochs = 7;
    const auto fit = train::adam_fit({ModelKind::Har, 0, 9}, train_part, val_part,
                                     {Criterion::Mse, 1e-8}, cfg);
    const auto path = std::filesystem::temp_directory_path() / "volnet_curve.csv";
    train::save_training_curve(fit, path);
    const auto rows = read_csv(path, "epoch,train_loss,val_loss");
    CHECK(rows.size() == fit.training_curve.size());
    std::filesystem::remove(path);
}

TEST_CASE("train config validation") {
    train::TrainConfig cfg;
    cfg.patience_epochs = cfg.max_epochs;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size_days = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.ensemble_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
