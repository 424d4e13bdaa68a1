#pragma once

// Markov-chain prompt generation and the Gram statistics consumed by the
// rest of the library. States are encoded as real values 0..|S|-1; the
// binary case uses {0,1}. The query label is held out of the embedding
// matrix, so evaluation never depends on re-masking.

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsa/rng.hpp"

namespace mlsa {

struct TransitionKernel {
    Eigen::MatrixXd probs;  // row-stochastic, |S| x |S|

    int size() const { return static_cast<int>(probs.rows()); }

    void validate(double tol = 1e-12) const {
        if (probs.rows() != probs.cols() || probs.rows() < 1)
            throw std::invalid_argument("TransitionKernel: matrix must be square and nonempty");
        for (int i = 0; i < probs.rows(); ++i) {
            double row = probs.row(i).sum();
            if (std::abs(row - 1.0) > tol)
                throw std::invalid_argument("TransitionKernel: row does not sum to 1");
            for (int j = 0; j < probs.cols(); ++j)
                if (probs(i, j) < -tol || probs(i, j) > 1.0 + tol)
                    throw std::invalid_argument("TransitionKernel: entry outside [0,1]");
        }
    }

    static TransitionKernel binary(double p01, double p10) {
        TransitionKernel k;
        k.probs.resize(2, 2);
        k.probs << 1.0 - p01, p01, p10, 1.0 - p10;
        return k;
    }

    static TransitionKernel identity(int s) {
        return TransitionKernel{Eigen::MatrixXd::Identity(s, s)};
    }
};

// Exact matrix power by repeated squaring; P^0 = I.
inline TransitionKernel kernel_power(const TransitionKernel& k, int t) {
    if (t < 0) throw std::invalid_argument("kernel_power: t must be >= 0");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(k.size(), k.size());
    Eigen::MatrixXd base = k.probs;
    int e = t;
    while (e > 0) {
        if (e & 1) acc = acc * base;
        base = base * base;
        e >>= 1;
    }
    return TransitionKernel{acc};
}

// E[y | x] for a binary kernel: p01 + (p11 - p01) x.
inline double conditional_next_mean(const TransitionKernel& k, double x) {
    if (k.size() != 2)
        throw std::invalid_argument("conditional_next_mean: binary kernels only");
    double p01 = k.probs(0, 1), p11 = k.probs(1, 1);
    return p01 + (p11 - p01) * x;
}

struct KernelPrior {
    enum class Variant { IndependentUniform, DirichletRows, Fixed };
    Variant variant = Variant::IndependentUniform;
    double alpha = 1.0;           // DirichletRows concentration
    int num_states = 2;           // DirichletRows state count
    TransitionKernel fixed_kernel;  // Fixed point-mass prior

    static KernelPrior independent_uniform() { return KernelPrior{}; }
    static KernelPrior dirichlet_rows(double alpha, int num_states) {
        if (alpha <= 0.0) throw std::invalid_argument("KernelPrior: alpha must be > 0");
        if (num_states < 2) throw std::invalid_argument("KernelPrior: need >= 2 states");
        KernelPrior p;
        p.variant = Variant::DirichletRows;
        p.alpha = alpha;
        p.num_states = num_states;
        return p;
    }
    static KernelPrior fixed(TransitionKernel k) {
        k.validate(1e-9);
        KernelPrior p;
        p.variant = Variant::Fixed;
        p.num_states = k.size();
        p.fixed_kernel = std::move(k);
        return p;
    }

    int states() const { return variant == Variant::IndependentUniform ? 2 : num_states; }
};

inline TransitionKernel sample_kernel(const KernelPrior& prior, RngStream& rng) {
    switch (prior.variant) {
        case KernelPrior::Variant::IndependentUniform: {
            double p01 = rng.uniform();
            double p10 = rng.uniform();
            return TransitionKernel::binary(p01, p10);
        }
        case KernelPrior::Variant::DirichletRows: {
            TransitionKernel k;
            k.probs.resize(prior.num_states, prior.num_states);
            for (int i = 0; i < prior.num_states; ++i)
                k.probs.row(i) = rng.dirichlet(prior.alpha, prior.num_states).transpose();
            return k;
        }
        case KernelPrior::Variant::Fixed:
            return prior.fixed_kernel;
    }
    throw std::logic_error("sample_kernel: unreachable");
}

struct InitialDistribution {
    Eigen::VectorXd pmf;

    static InitialDistribution binary(double p) {
        InitialDistribution d;
        d.pmf.resize(2);
        d.pmf << 1.0 - p, p;
        return d;
    }
    static InitialDistribution uniform(int s) {
        return InitialDistribution{Eigen::VectorXd::Constant(s, 1.0 / s)};
    }

    void validate(double tol = 1e-12) const {
        if (pmf.size() < 1 || pmf.minCoeff() < -tol || std::abs(pmf.sum() - 1.0) > tol)
            throw std::invalid_argument("InitialDistribution: not a pmf");
    }
};

// (d+1) x (n+1) embedding matrix of n labeled chains plus a masked query.
// z0(d, n) is always 0; the true query label lives in query_label.
struct Prompt {
    int d = 0;
    int n = 0;
    int num_states = 2;
    Eigen::MatrixXd z0;
    double query_label = 0.0;
};

// Optional joint sampler for the n+1 initial states (query initial last).
// The default is i.i.d. draws from the initial distribution; Theorem-2-style
// correlated initials plug in here.
using InitialStateSampler = std::function<Eigen::VectorXd(int n, RngStream& rng)>;

inline InitialStateSampler iid_initials(const InitialDistribution& init) {
    return [init](int n, RngStream& rng) {
        Eigen::VectorXd out(n + 1);
        for (int i = 0; i <= n; ++i) out[i] = static_cast<double>(rng.categorical(init.pmf));
        return out;
    };
}

// The worked correlated example: x_{n+1} ~ Bernoulli(p), then
// x_i | x_{n+1} ~ Bernoulli(g(x_{n+1})) i.i.d. with g(x) = (x - p)^2.
inline InitialStateSampler correlated_square_initials(double p) {
    return [p](int n, RngStream& rng) {
        Eigen::VectorXd out(n + 1);
        double xq = rng.bernoulli(p) ? 1.0 : 0.0;
        double g = (xq - p) * (xq - p);
        for (int i = 0; i < n; ++i) out[i] = rng.bernoulli(g) ? 1.0 : 0.0;
        out[n] = xq;
        return out;
    };
}

inline std::pair<Prompt, TransitionKernel> sample_prompt_with_initials(
    const KernelPrior& prior, const InitialStateSampler& initials, int d, int n, RngStream& rng) {
    if (d < 1 || n < 1) throw std::invalid_argument("sample_prompt: need d >= 1 and n >= 1");
    TransitionKernel kernel = sample_kernel(prior, rng);
    const int s = kernel.size();
    Prompt p;
    p.d = d;
    p.n = n;
    p.num_states = s;
    p.z0.setZero(d + 1, n + 1);
    Eigen::VectorXd first = initials(n, rng);
    for (int col = 0; col <= n; ++col) {
        int state = static_cast<int>(first[col]);
        p.z0(0, col) = first[col];
        for (int row = 1; row <= d; ++row) {
            state = rng.categorical(kernel.probs.row(state).transpose());
            p.z0(row, col) = static_cast<double>(state);
        }
    }
    p.query_label = p.z0(d, n);
    p.z0(d, n) = 0.0;  // mask
    return {p, kernel};
}

inline std::pair<Prompt, TransitionKernel> sample_prompt(const KernelPrior& prior,
                                                         const InitialDistribution& init,
                                                         int d, int n, RngStream& rng) {
    return sample_prompt_with_initials(prior, iid_initials(init), d, n, rng);
}

struct GramStats {
    Eigen::MatrixXd g_matrix;  // (d+1)x(d+1), query column excluded
    Eigen::VectorXd g_vector;  // unique upper-triangular entries, row-major
};

// G = (1/n) sum_i z_i z_i^T over the n in-context columns (mask M drops the
// query column); g collects the upper triangle in canonical pair order.
inline GramStats gram_stats(const Prompt& p) {
    const auto cols = p.z0.leftCols(p.n);
    GramStats out;
    out.g_matrix = (cols * cols.transpose()) / static_cast<double>(p.n);
    const int dp1 = p.d + 1;
    out.g_vector.resize(dp1 * (dp1 + 1) / 2);
    int at = 0;
    for (int i = 0; i < dp1; ++i)
        for (int k = i; k < dp1; ++k) out.g_vector[at++] = out.g_matrix(i, k);
    return out;
}

// ---------------------------------------------------------------------------
// Prompt batch serialization (CSV). One header line per prompt:
//   H,d,n,S,seed,k00,k01,...   then Z0 column-major and the held-out label:
//   Z,z11,z21,...  L,label
// ---------------------------------------------------------------------------

inline void write_prompt_batch_csv(std::ostream& os,
                                   const std::vector<std::pair<Prompt, TransitionKernel>>& batch,
                                   std::uint64_t seed) {
    os.precision(17);
    for (const auto& [p, k] : batch) {
        os << "H," << p.d << ',' << p.n << ',' << p.num_states << ',' << seed;
        for (int i = 0; i < k.size(); ++i)
            for (int j = 0; j < k.size(); ++j) os << ',' << k.probs(i, j);
        os << '\n' << "Z";
        for (int col = 0; col < p.z0.cols(); ++col)
            for (int row = 0; row < p.z0.rows(); ++row) os << ',' << p.z0(row, col);
        os << '\n' << "L," << p.query_label << '\n';
    }
}

inline std::vector<std::pair<Prompt, TransitionKernel>> read_prompt_batch_csv(std::istream& is) {
    std::vector<std::pair<Prompt, TransitionKernel>> out;
    std::string line;
    Prompt cur;
    TransitionKernel kernel;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tag;
        std::getline(ss, tag, ',');
        std::vector<double> vals;
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (tag == "H") {
            cur = Prompt{};
            cur.d = static_cast<int>(vals.at(0));
            cur.n = static_cast<int>(vals.at(1));
            cur.num_states = static_cast<int>(vals.at(2));
            const int s = cur.num_states;
            kernel.probs.resize(s, s);
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) kernel.probs(i, j) = vals.at(4 + i * s + j);
        } else if (tag == "Z") {
            cur.z0.resize(cur.d + 1, cur.n + 1);
            int at = 0;
            for (int col = 0; col <= cur.n; ++col)
                for (int row = 0; row <= cur.d; ++row) cur.z0(row, col) = vals.at(at++);
        } else if (tag == "L") {
            cur.query_label = vals.at(0);
            out.emplace_back(cur, kernel);
        }
    }
    return out;
}

}  // namespace mlsa
