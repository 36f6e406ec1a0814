#include "volnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <utility>

#include <Eigen/Cholesky>

#include "volnet/errors.hpp"
#include "volnet/io.hpp"
#include "volnet/parallel.hpp"

namespace volnet::graph {

// ===========================================================================
// Adjacency
// ===========================================================================

Adjacency::Adjacency(int n) : n_(n), entries_(static_cast<std::size_t>(n) * n, 0) {
    if (n < 0) throw ConfigError("adjacency size must be nonnegative");
}

Adjacency::Adjacency(int n, const std::vector<std::pair<int, int>>& edges) : Adjacency(n) {
    for (auto [i, j] : edges) add_edge(i, j);
}

void Adjacency::add_edge(int i, int j) {
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
        throw ConfigError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                          ") out of range for " + std::to_string(n_) + " nodes");
    if (i == j) throw ConfigError("self-connections are not allowed");
    entries_[idx(i, j)] = 1;
    entries_[idx(j, i)] = 1;
}

Adjacency Adjacency::from_matrix(const Mat& m) {
    if (m.rows() != m.cols()) throw ConfigError("adjacency matrix must be square");
    const int n = static_cast<int>(m.rows());
    Adjacency a(n);
    for (int i = 0; i < n; ++i) {
        if (m(i, i) != 0.0) throw ConfigError("adjacency diagonal must be zero");
        for (int j = 0; j < n; ++j) {
            const double v = m(i, j);
            if (v != 0.0 && v != 1.0) throw ConfigError("adjacency entries must be 0 or 1");
            if (v != m(j, i)) throw ConfigError("adjacency must be symmetric");
            if (v == 1.0 && i < j) a.add_edge(i, j);
        }
    }
    return a;
}

int Adjacency::degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j) d += entries_[idx(i, j)];
    return d;
}

std::vector<int> Adjacency::neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
        if (entries_[idx(i, j)]) out.push_back(j);
    return out;
}

int Adjacency::edge_count() const {
    int c = 0;
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) c += entries_[idx(i, j)];
    return c;
}

Mat Adjacency::to_matrix() const {
    Mat m = Mat::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) m(i, j) = entries_[idx(i, j)];
    return m;
}

// ===========================================================================
// Graph algebra
// ===========================================================================

Mat normalize(const Adjacency& a) {
    const int n = a.size();
    Vec inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i) {
        const int d = a.degree(i);
        inv_sqrt_deg[i] = d > 0 ? 1.0 / std::sqrt(static_cast<double>(d)) : 0.0;
    }
    Mat w = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (a(i, j)) w(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
    return w;
}

Adjacency hop2(const Adjacency& a) {
    const int n = a.size();
    Adjacency out(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (a(i, j)) continue;
            for (int k = 0; k < n; ++k) {
                if (a(i, k) && a(k, j)) {
                    out.add_edge(i, j);
                    break;
                }
            }
        }
    }
    return out;
}

SpdMatrix shortest_path_distances(const Adjacency& a) {
    const int n = a.size();
    SpdMatrix spd;
    spd.n = n;
    spd.d.assign(static_cast<std::size_t>(n) * n, SpdMatrix::unreachable);
    std::deque<int> queue;
    for (int src = 0; src < n; ++src) {
        auto* row = spd.d.data() + static_cast<std::size_t>(src) * n;
        row[src] = 0;
        queue.clear();
        queue.push_back(src);
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v = 0; v < n; ++v) {
                if (a(u, v) && row[v] == SpdMatrix::unreachable) {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    return spd;
}

std::vector<int> k_hop_neighbors(const Adjacency& a, int v, int k) {
    if (v < 0 || v >= a.size())
        throw ConfigError("node " + std::to_string(v) + " out of range");
    if (k < 0) throw ConfigError("hop count must be nonnegative");
    std::vector<int> dist(a.size(), -1);
    dist[v] = 0;
    std::deque<int> queue{v};
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (dist[u] == k) continue;
        for (int w = 0; w < a.size(); ++w) {
            if (a(u, w) && dist[w] < 0) {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    std::vector<int> out;
    for (int u = 0; u < a.size(); ++u)
        if (dist[u] >= 0) out.push_back(u);
    return out;
}

int diameter(const Adjacency& a) {
    const auto spd = shortest_path_distances(a);
    int best = 0;
    for (int v : spd.d) {
        if (v == SpdMatrix::unreachable) return SpdMatrix::unreachable;
        best = std::max(best, v);
    }
    return best;
}

// ===========================================================================
// Graphical LASSO
// ===========================================================================

namespace {

// Demean and scale each column to unit variance (1/T convention) and return
// the resulting correlation matrix. Zero-variance columns are rejected.
Mat standardized_correlation(const Mat& returns) {
    const auto t = returns.rows();
    const auto n = returns.cols();
    if (t < 2) throw DataError("glasso needs at least 2 return observations");
    Mat x = returns;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mu = x.col(j).mean();
        x.col(j).array() -= mu;
        const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(t));
        if (!(sd > 0.0))
            throw DataError("glasso: zero-variance return column " + std::to_string(j));
        x.col(j) /= sd;
    }
    return (x.transpose() * x) / static_cast<double>(t);
}

double soft_threshold(double x, double lambda) {
    if (x > lambda) return x - lambda;
    if (x < -lambda) return x + lambda;
    return 0.0;
}

bool cholesky_ok(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    return llt.info() == Eigen::Success;
}

double log_det_spd(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericError("matrix not positive definite in log-det");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Lasso subproblem for column j:
//   min_beta 1/2 beta' W11 beta - s12' beta + lambda ||beta||_1
// solved by cyclic coordinate descent; beta indexed over the full n with
// slot j pinned to zero so callers avoid reindexing.
void lasso_column(const Mat& w, const Mat& s, int j, double lambda,
                  double inner_tol, int max_inner, Vec& beta) {
    const int n = static_cast<int>(w.rows());
    beta[j] = 0.0;
    for (int it = 0; it < max_inner; ++it) {
        double max_delta = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            // residual correlation with coordinate k, excluding its own term
            double r = s(k, j);
            for (int l = 0; l < n; ++l) {
                if (l == j || l == k) continue;
                r -= w(k, l) * beta[l];
            }
            const double denom = w(k, k);
            if (!(denom > 0.0)) throw NumericError("glasso: nonpositive working diagonal");
            const double updated = soft_threshold(r, lambda) / denom;
            max_delta = std::max(max_delta, std::fabs(updated - beta[k]));
            beta[k] = updated;
        }
        if (max_delta < inner_tol) break;
    }
}

Mat recover_precision(const Mat& w, const Mat& s, double penalty,
                      double inner_tol, int max_inner) {
    const int n = static_cast<int>(w.rows());
    Mat theta = Mat::Zero(n, n);
    Vec beta = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
        beta.setZero();
        lasso_column(w, s, j, penalty, inner_tol, max_inner, beta);
        double quad = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            quad += w(j, k) * beta[k];  // w12' beta with w12 from the current W
        }
        const double denom = w(j, j) - quad;
        if (!(denom > 0.0)) throw NumericError("glasso: precision recovery failed (not PD)");
        const double theta_jj = 1.0 / denom;
        theta(j, j) = theta_jj;
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            theta(k, j) = beta[k] == 0.0 ? 0.0 : -beta[k] * theta_jj;
        }
    }
    // Column solves give a matrix symmetric only up to solver tolerance;
    // average, preserving exact zeros where both sides vanished.
    Mat sym = 0.5 * (theta + theta.transpose());
    return sym;
}

double primal_objective(const Mat& theta, const Mat& s, double penalty) {
    double l1 = 0.0;
    const int n = static_cast<int>(theta.rows());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) l1 += std::fabs(theta(i, j));
    return log_det_spd(theta) - (s * theta).trace() - penalty * l1;
}

PrecisionEstimate glasso_on_correlation(const Mat& s, double penalty,
                                        double tol, int max_iter) {
    if (penalty < 0.0) throw ConfigError("glasso penalty must be nonnegative");
    const int n = static_cast<int>(s.rows());
    const double inner_tol = std::max(tol * 1e-3, 1e-12);
    const int max_inner = 2000;

    // Working covariance; diagonal stays at S_ii (off-diagonal penalty only).
    // If S itself is not PD, shrink the off-diagonal part until it is.
    Mat w = s;
    for (double shrink : {1.0, 0.95, 0.9, 0.7, 0.5, 0.25, 0.1, 0.0}) {
        w = s * shrink;
        w.diagonal() = s.diagonal();
        if (cholesky_ok(w)) break;
        if (shrink == 0.0) throw DataError("glasso: degenerate correlation matrix");
    }

    PrecisionEstimate out;
    out.penalty = penalty;
    Vec beta = Vec::Zero(n);
    Mat betas = Mat::Zero(n, n);  // warm starts, column j holds beta_j

    bool converged = (n <= 1);
    for (int sweep = 0; sweep < max_iter && !converged; ++sweep) {
        const Mat w_prev = w;
        for (int j = 0; j < n; ++j) {
            beta = betas.col(j);
            lasso_column(w, s, j, penalty, inner_tol, max_inner, beta);
            betas.col(j) = beta;
            // w12 <- W11 * beta
            for (int k = 0; k < n; ++k) {
                if (k == j) continue;
                double v = 0.0;
                for (int l = 0; l < n; ++l) {
                    if (l == j) continue;
                    v += w(k, l) * beta[l];
                }
                w(k, j) = v;
            }
            w.row(j) = w.col(j).transpose();
        }
        out.objective_trace.push_back(-log_det_spd(w));  // PD check doubles as trace
        out.sweeps = sweep + 1;
        converged = ((w - w_prev).cwiseAbs().maxCoeff() < tol);
    }

    Mat theta = recover_precision(w, s, penalty, inner_tol, max_inner);
    if (!converged) {
        throw NumericError("glasso did not converge in " + std::to_string(max_iter) +
                           " sweeps (objective " +
                           std::to_string(primal_objective(theta, s, penalty)) + ")");
    }
    if (!cholesky_ok(theta)) throw NumericError("glasso: estimated precision not PD");
    out.theta = std::move(theta);
    out.objective = primal_objective(out.theta, s, penalty);
    return out;
}

}  // namespace

PrecisionEstimate glasso_fit(const Mat& returns, double penalty, double tol, int max_iter) {
    return glasso_on_correlation(standardized_correlation(returns), penalty, tol, max_iter);
}

std::vector<double> default_penalty_grid(const Mat& returns, int grid_size) {
    const Mat s = standardized_correlation(returns);
    double lmax = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            if (i != j) lmax = std::max(lmax, std::fabs(s(i, j)));
    if (lmax <= 0.0) lmax = 1e-3;
    std::vector<double> grid;
    const double lo = std::log(0.01 * lmax);
    const double hi = std::log(lmax);
    for (int k = 0; k < grid_size; ++k) {
        const double f = grid_size == 1 ? 1.0 : static_cast<double>(k) / (grid_size - 1);
        grid.push_back(std::exp(lo + f * (hi - lo)));
    }
    return grid;
}

Adjacency glasso_graph(const Mat& returns, const std::vector<double>& penalty_grid,
                       int folds, const GlassoSettings& settings) {
    if (folds < 2) throw ConfigError("glasso cross-validation needs folds >= 2");
    if (penalty_grid.empty()) throw ConfigError("glasso penalty grid must be nonempty");
    const auto t = returns.rows();
    const auto n = returns.cols();
    if (t < 2 * folds) throw DataError("glasso: too few observations for requested folds");

    // Contiguous time blocks, respecting serial dependence.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> fold_ranges;
    for (int f = 0; f < folds; ++f) {
        const auto lo = t * f / folds;
        const auto hi = t * (f + 1) / folds;
        fold_ranges.emplace_back(lo, hi);
    }

    const int cells = folds * static_cast<int>(penalty_grid.size());
    std::vector<double> scores(static_cast<std::size_t>(cells),
                               -std::numeric_limits<double>::infinity());

    parallel_for(cells, settings.workers, [&](int cell) {
        const int f = cell % folds;
        const int p = cell / folds;
        const auto [lo, hi] = fold_ranges[static_cast<std::size_t>(f)];
        const auto held = hi - lo;
        Mat train(t - held, n);
        if (lo > 0) train.topRows(lo) = returns.topRows(lo);
        if (hi < t) train.bottomRows(t - hi) = returns.bottomRows(t - hi);

        // Standardize the held-out block with training moments so the score
        // is measured in the training frame.
        Vec mu(n), sd(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            mu[j] = train.col(j).mean();
            sd[j] = std::sqrt((train.col(j).array() - mu[j]).square().sum() /
                              static_cast<double>(train.rows()));
            if (!(sd[j] > 0.0)) throw DataError("glasso: zero-variance column in fold");
        }
        Mat hold = returns.middleRows(lo, held);
        for (Eigen::Index j = 0; j < n; ++j)
            hold.col(j) = (hold.col(j).array() - mu[j]) / sd[j];
        const Mat s_hold = (hold.transpose() * hold) / static_cast<double>(held);

        const auto fit = glasso_fit(train, penalty_grid[static_cast<std::size_t>(p)],
                                    settings.tol, settings.max_iter);
        scores[static_cast<std::size_t>(cell)] =
            log_det_spd(fit.theta) - (s_hold * fit.theta).trace();
    });

    // Mean held-out log-likelihood per penalty, then the one-standard-error
    // rule: the held-out likelihood is nearly flat around its maximum, so the
    // largest penalty within one SE of the best keeps the likelihood while
    // pruning support noise.
    const int n_penalties = static_cast<int>(penalty_grid.size());
    std::vector<double> mean_score(static_cast<std::size_t>(n_penalties));
    std::vector<double> se_score(static_cast<std::size_t>(n_penalties));
    int best_p = 0;
    for (int p = 0; p < n_penalties; ++p) {
        double m = 0.0;
        for (int f = 0; f < folds; ++f) m += scores[static_cast<std::size_t>(p * folds + f)];
        m /= folds;
        double var = 0.0;
        for (int f = 0; f < folds; ++f) {
            const double e = scores[static_cast<std::size_t>(p * folds + f)] - m;
            var += e * e;
        }
        mean_score[static_cast<std::size_t>(p)] = m;
        se_score[static_cast<std::size_t>(p)] = std::sqrt(var / folds / std::max(1, folds - 1));
        if (m > mean_score[static_cast<std::size_t>(best_p)]) best_p = p;
    }
    int selected = best_p;
    const double cutoff = mean_score[static_cast<std::size_t>(best_p)] -
                          se_score[static_cast<std::size_t>(best_p)];
    for (int p = 0; p < n_penalties; ++p) {
        if (mean_score[static_cast<std::size_t>(p)] < cutoff) continue;
        if (penalty_grid[static_cast<std::size_t>(p)] >
            penalty_grid[static_cast<std::size_t>(selected)])
            selected = p;
    }

    const auto fit = glasso_fit(returns, penalty_grid[static_cast<std::size_t>(selected)],
                                settings.tol, settings.max_iter);
    Adjacency a(static_cast<int>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (std::fabs(fit.theta(i, j)) > settings.support_eps ||
                std::fabs(fit.theta(j, i)) > settings.support_eps)
                a.add_edge(static_cast<int>(i), static_cast<int>(j));
    return a;
}

// ===========================================================================
// Serialization
// ===========================================================================

void save_edge_list(const Adjacency& a, const std::vector<std::string>& assets,
                    const std::filesystem::path& path) {
    if (static_cast<int>(assets.size()) != a.size())
        throw ConfigError("asset list size does not match graph size");
    CsvWriter w("i,j");
    for (int i = 0; i < a.size(); ++i)
        for (int j = i + 1; j < a.size(); ++j)
            if (a(i, j)) {
                w.field(assets[static_cast<std::size_t>(i)]);
                w.field(assets[static_cast<std::size_t>(j)]);
                w.end_row();
            }
    w.save(path);
}

Adjacency load_edge_list(const std::filesystem::path& path,
                         const std::vector<std::string>& assets) {
    std::map<std::string, int> index;
    for (int i = 0; i < static_cast<int>(assets.size()); ++i)
        index[assets[static_cast<std::size_t>(i)]] = i;
    Adjacency a(static_cast<int>(assets.size()));
    for (const auto& row : read_csv(path, "i,j")) {
        auto it_i = index.find(row.fields[0]);
        auto it_j = index.find(row.fields[1]);
        if (it_i == index.end() || it_j == index.end())
            throw DataError(path.string() + ": line " + std::to_string(row.line_number) +
                            ": unknown asset symbol");
        a.add_edge(it_i->second, it_j->second);
    }
    return a;
}

void save_spd_frequency(const Adjacency& a, const std::filesystem::path& path) {
    const auto spd = shortest_path_distances(a);
    std::map<int, int> counts;
    int pairs = 0;
    for (int i = 0; i < a.size(); ++i)
        for (int j = i + 1; j < a.size(); ++j) {
            ++pairs;
            if (spd(i, j) != SpdMatrix::unreachable) ++counts[spd(i, j)];
        }
    CsvWriter w("spd,frequency_pct");
    for (auto [d, c] : counts) {
        w.field(d);
        w.field(pairs > 0 ? 100.0 * c / pairs : 0.0);
        w.end_row();
    }
    w.save(path);
}

}  // namespace volnet::graph
