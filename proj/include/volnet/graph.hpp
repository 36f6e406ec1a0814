#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "volnet/rng.hpp"
#include "volnet/types.hpp"

namespace volnet::graph {

// Undirected binary graph without self-connections: symmetric 0/1 entries,
// zero diagonal. Construction validates the invariants.
class Adjacency {
public:
    explicit Adjacency(int n);
    Adjacency(int n, const std::vector<std::pair<int, int>>& edges);
    static Adjacency from_matrix(const Mat& m);  // validates symmetry/diagonal/binarity

    int size() const { return n_; }
    int operator()(int i, int j) const { return entries_[idx(i, j)]; }
    void add_edge(int i, int j);
    int degree(int i) const;
    std::vector<int> neighbors(int i) const;
    int edge_count() const;
    Mat to_matrix() const;

    bool operator==(const Adjacency& other) const = default;

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
    int n_ = 0;
    std::vector<std::uint8_t> entries_;
};

// W[i,j] = A[i,j] / sqrt(deg_i * deg_j); rows and columns of isolated nodes
// are all-zero. Symmetric with eigenvalues in [-1, 1].
Mat normalize(const Adjacency& a);

// Adjacency of pairs at shortest-path distance exactly 2: entry (i,j) = 1
// iff i != j, A[i,j] = 0 and some length-2 path connects i and j.
Adjacency hop2(const Adjacency& a);

// All-pairs shortest path distances via BFS; `unreachable` marks pairs with
// no connecting path.
struct SpdMatrix {
    static constexpr int unreachable = -1;
    int n = 0;
    std::vector<int> d;  // row-major n*n
    int operator()(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }
};
SpdMatrix shortest_path_distances(const Adjacency& a);

// Nodes with SPD(v, u) <= k, v itself included (distance 0).
std::vector<int> k_hop_neighbors(const Adjacency& a, int v, int k);

// Longest finite shortest-path distance; SpdMatrix::unreachable when the
// graph is disconnected.
int diameter(const Adjacency& a);

// ---------------------------------------------------------------------------
// Graphical LASSO
// ---------------------------------------------------------------------------

// L1-penalized Gaussian precision estimate:
//   maximize  log det(Theta) - tr(S Theta) - penalty * sum_{i != j} |Theta_ij|
// over positive definite Theta, where S is the correlation matrix of the
// (internally demeaned and standardized) return columns.
struct PrecisionEstimate {
    Mat theta;                           // symmetric positive definite
    double penalty = 0.0;
    double objective = 0.0;              // maximized value at theta
    int sweeps = 0;
    // Solver objective (minimization form, -log det W of the working
    // covariance) per sweep; nonincreasing by construction.
    std::vector<double> objective_trace;
};

struct GlassoSettings {
    double tol = 1e-5;       // max |Delta W| between sweeps
    int max_iter = 200;      // outer sweeps
    int grid_size = 20;      // log-spaced penalties in [0.01*lmax, lmax]
    int folds = 5;           // contiguous time blocks
    double support_eps = 1e-8;
    int workers = 0;         // 0 = hardware concurrency
};

// Block coordinate descent over columns (lasso subproblems solved by
// coordinate descent with soft thresholding). Throws NumericError when the
// sweep limit is exceeded, DataError on zero-variance columns.
PrecisionEstimate glasso_fit(const Mat& returns, double penalty,
                             double tol = 1e-5, int max_iter = 200);

// Cross-validated spillover graph: picks the penalty with the best mean
// held-out Gaussian log-likelihood (contiguous time folds), refits on all
// data, and reads edges off the precision support (OR-symmetrized).
Adjacency glasso_graph(const Mat& returns, const std::vector<double>& penalty_grid,
                       int folds, const GlassoSettings& settings = {});

// Convenience: default log-spaced grid from the data.
std::vector<double> default_penalty_grid(const Mat& returns, int grid_size = 20);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// Edge-list CSV (header "i,j"), upper-triangle edges listed by asset symbol.
void save_edge_list(const Adjacency& a, const std::vector<std::string>& assets,
                    const std::filesystem::path& path);
Adjacency load_edge_list(const std::filesystem::path& path,
                         const std::vector<std::string>& assets);

// SPD frequency table CSV (header "spd,frequency_pct") over unordered
// reachable pairs.
void save_spd_frequency(const Adjacency& a, const std::filesystem::path& path);

}  // namespace volnet::graph
