#pragma once

// The bilinear parameter expansion X = phi(b, A), its canonical pair
// indexing, the reparameterized squared loss, and the empirical
// least-squares oracle for it.
//
// Canonical order is the row-major upper triangle: for d = 1 the pairs
// (1,1),(1,2),(2,2) map to 1,2,3. Block j of X (length m) corresponds to
// column j of A, so X has length d*m with m = (d+1)(d+2)/2.

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mlsa/markov_data.hpp"
#include "mlsa/parallel.hpp"

namespace mlsa {

inline int pair_count(int d) { return (d + 1) * (d + 2) / 2; }

// 1-based rank of the pair (i, k), 1 <= i <= k <= d+1.
inline int pair_index(int i, int k, int d) {
    if (i < 1 || k < i || k > d + 1) throw std::invalid_argument("pair_index: need 1 <= i <= k <= d+1");
    int before = (i - 1) * (d + 1) - (i - 1) * (i - 2) / 2;  // pairs in rows < i
    return before + (k - i + 1);
}

// Inverse of pair_index, returning the 1-based (i, k).
inline std::pair<int, int> pair_from_index(int r, int d) {
    int i = 1;
    int left = r;
    while (left > (d + 1) - (i - 1)) {
        left -= (d + 1) - (i - 1);
        ++i;
    }
    return {i, i + left - 1};
}

struct ReparamVector {
    int d = 0;
    Eigen::VectorXd x;  // length d * pair_count(d)

    int m() const { return pair_count(d); }
};

// X_{(j-1)m + pair_index(i,k)} = b_i A_{k,j} (i == k) or b_i A_{k,j} + b_k A_{i,j}.
inline ReparamVector reparam_map(const Eigen::VectorXd& b, const Eigen::MatrixXd& A) {
    const int dp1 = static_cast<int>(b.size());
    const int d = static_cast<int>(A.cols());
    if (A.rows() != dp1 || d != dp1 - 1)
        throw std::invalid_argument("reparam_map: b must be length d+1 and A (d+1) x d");
    const int m = pair_count(d);
    ReparamVector out;
    out.d = d;
    out.x.resize(d * m);
    for (int j = 0; j < d; ++j) {
        int at = j * m;
        for (int i = 0; i < dp1; ++i)
            for (int k = i; k < dp1; ++k)
                out.x[at++] = (i == k) ? b[i] * A(k, j) : b[i] * A(k, j) + b[k] * A(i, j);
    }
    return out;
}

// Feature vector x_{n+1} (x) g for the reparameterized linear model.
inline Eigen::VectorXd prompt_features(const Prompt& p) {
    GramStats gs = gram_stats(p);
    const int m = pair_count(p.d);
    Eigen::VectorXd out(p.d * m);
    for (int j = 0; j < p.d; ++j) out.segment(j * m, m) = p.z0(j, p.n) * gs.g_vector;
    return out;
}

// <features(p), X> without materializing the Kronecker product.
inline double linear_prediction(const ReparamVector& x, const Prompt& p) {
    if (x.d != p.d) throw std::invalid_argument("linear_prediction: dimension mismatch");
    GramStats gs = gram_stats(p);
    const int m = x.m();
    double out = 0.0;
    for (int j = 0; j < p.d; ++j) out += p.z0(j, p.n) * gs.g_vector.dot(x.x.segment(j * m, m));
    return out;
}

inline double reparam_loss(const ReparamVector& x, const std::vector<Prompt>& prompts) {
    if (prompts.empty()) throw std::invalid_argument("reparam_loss: empty batch");
    double acc = 0.0;
    for (const auto& p : prompts) {
        double r = linear_prediction(x, p) - p.query_label;
        acc += r * r;
    }
    return acc / static_cast<double>(prompts.size());
}

struct LstsqResult {
    ReparamVector x;
    bool ridge_used = false;  // rank-deficient normal equations were stabilized
    double ridge = 1e-10;
};

// Minimizer of the empirical reparameterized loss via normal equations.
inline LstsqResult lstsq_oracle(const std::vector<Prompt>& prompts) {
    if (prompts.empty()) throw std::invalid_argument("lstsq_oracle: empty batch");
    const int d = prompts.front().d;
    const int dim = d * pair_count(d);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (const auto& p : prompts) {
        Eigen::VectorXd f = prompt_features(p);
        h.selfadjointView<Eigen::Lower>().rankUpdate(f);
        rhs += p.query_label * f;
    }
    h = h.selfadjointView<Eigen::Lower>();
    const double scale = 1.0 / static_cast<double>(prompts.size());
    h *= scale;
    rhs *= scale;

    LstsqResult res;
    res.x.d = d;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    if (lo <= hi * 1e-12) {
        res.ridge_used = true;
        h.diagonal().array() += res.ridge;
    }
    res.x.x = Eigen::LDLT<Eigen::MatrixXd>(h).solve(rhs);
    return res;
}

struct HessianEstimate {
    Eigen::MatrixXd h;             // symmetric MC estimate of E[(x (x) g)(x (x) g)^T]
    double min_eigenvalue = 0.0;
    double bootstrap_se = 0.0;     // chunk-bootstrap standard error of min_eigenvalue
    int chunks = 0;
};

// Monte Carlo estimate of the reparameterized-loss Hessian, with a chunked
// bootstrap for the minimum-eigenvalue standard error.
inline HessianEstimate hessian_estimate(int d, int n, const KernelPrior& prior,
                                        const InitialDistribution& init, std::int64_t samples,
                                        std::uint64_t seed, int chunks = 100, int threads = 1,
                                        int bootstrap_reps = 200) {
    if (samples < 1000) throw std::invalid_argument("hessian_estimate: need >= 1e3 samples");
    const int dim = d * pair_count(d);
    std::vector<Eigen::MatrixXd> chunk_means(chunks, Eigen::MatrixXd::Zero(dim, dim));
    std::vector<std::int64_t> chunk_sizes(chunks, 0);
    parallel_chunks(samples, chunks, threads, [&](int c, std::int64_t lo, std::int64_t hi) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(c));
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
        for (std::int64_t i = lo; i < hi; ++i) {
            auto [p, k] = sample_prompt(prior, init, d, n, rng);
            Eigen::VectorXd f = prompt_features(p);
            acc.selfadjointView<Eigen::Lower>().rankUpdate(f);
        }
        chunk_means[c] = Eigen::MatrixXd(acc.selfadjointView<Eigen::Lower>()) / double(hi - lo);
        chunk_sizes[c] = hi - lo;
    });

    HessianEstimate out;
    out.chunks = chunks;
    out.h = Eigen::MatrixXd::Zero(dim, dim);
    std::int64_t total = 0;
    for (int c = 0; c < chunks; ++c) {
        out.h += chunk_means[c] * static_cast<double>(chunk_sizes[c]);
        total += chunk_sizes[c];
    }
    out.h /= static_cast<double>(total);
    out.h = 0.5 * (out.h + out.h.transpose());
    out.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out.h).eigenvalues().minCoeff();

    RngStream boot(splitmix64(seed) ^ 0xB007B007ULL);
    double sum = 0.0, sumsq = 0.0;
    for (int rep = 0; rep < bootstrap_reps; ++rep) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        for (int c = 0; c < chunks; ++c) {
            int pick = static_cast<int>(boot.uniform() * chunks);
            if (pick >= chunks) pick = chunks - 1;
            h += chunk_means[pick];
        }
        h /= static_cast<double>(chunks);
        double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().minCoeff();
        sum += ev;
        sumsq += ev * ev;
    }
    double mean = sum / bootstrap_reps;
    out.bootstrap_se = std::sqrt(std::max(0.0, sumsq / bootstrap_reps - mean * mean));
    return out;
}

// CSV dump as (j, i, k, value) quadruples, 1-based indices.
inline void write_reparam_csv(std::ostream& os, const ReparamVector& x) {
    os.precision(17);
    os << "j,i,k,value\n";
    const int m = x.m();
    for (int j = 1; j <= x.d; ++j)
        for (int r = 1; r <= m; ++r) {
            auto [i, k] = pair_from_index(r, x.d);
            os << j << ',' << i << ',' << k << ',' << x.x[(j - 1) * m + (r - 1)] << '\n';
        }
}

}  // namespace mlsa
