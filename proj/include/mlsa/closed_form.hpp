#pragma once

// Closed-form global minimizers of the reparameterized objective:
//   - length-2 chains with i.i.d. Bernoulli(p) initials (exact 3x3 system)
//   - length-2 chains with correlated initials, via the moments c1, c2
//   - general length, binary or Dirichlet-prior kernels: H and the right-hand
//     side assembled from expectations of kernel-power chain moments, solved
//     as X* = H^{-1} rhs
// plus parameter recovery for d = 1 and the best-effort projection psi back
// to transformer parameters.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mlsa/bilinear.hpp"
#include "mlsa/lsa_core.hpp"
#include "mlsa/markov_data.hpp"
#include "mlsa/parallel.hpp"
#include "mlsa/reparam.hpp"

namespace mlsa {

struct LinearSystem {
    Eigen::MatrixXd h;
    Eigen::VectorXd rhs;
};

// H and right-hand side for length-2 chains, i.i.d. Bernoulli(p) initials,
// p01, p10 ~ U(0,1). rhs = (p^2/2, p^2/3, p^2/12 + p/4).
inline LinearSystem len2_iid_system(double p, int n) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("len2_iid_system: p must be in (0,1)");
    if (n < 1) throw std::invalid_argument("len2_iid_system: n >= 1");
    const double nn = static_cast<double>(n);
    Eigen::MatrixXd h(3, 3);
    h(0, 0) = p / nn + (nn - 1.0) * p * p / nn;
    h(0, 1) = p / (2 * nn) + (nn - 1.0) * p * p / (2 * nn);
    h(0, 2) = p / 2.0;
    h(1, 1) = p / (2 * nn) + (nn - 1.0) * p * p / (3 * nn);
    h(1, 2) = p / (2 * nn) + (nn - 1.0) / nn * (p / 4.0 + p * p / 12.0);
    h(2, 2) = 1.0 / (2 * nn) + (nn - 1.0) / nn * (1.0 / 3.0 - p / 6.0 + p * p / 6.0);
    h(1, 0) = h(0, 1);
    h(2, 0) = h(0, 2);
    h(2, 1) = h(1, 2);
    h *= p;
    Eigen::VectorXd rhs(3);
    rhs << p * p / 2.0, p * p / 3.0, p * p / 12.0 + p / 4.0;
    return {h, rhs};
}

inline ReparamVector len2_iid_minimizer(double p, int n) {
    auto sys = len2_iid_system(p, n);
    ReparamVector out;
    out.d = 1;
    out.x = sys.h.ldlt().solve(sys.rhs);
    if ((sys.h * out.x - sys.rhs).norm() > 1e-12)
        throw std::runtime_error("len2_iid_minimizer: solve residual too large");
    return out;
}

// Moments of the initial states: c1 = sum_i E[x_i x_{n+1}],
// c2 = sum_i sum_{j != i} E[x_i x_j x_{n+1}].
struct Len2Moments {
    double p = 0.5;
    int n = 1;
    double c1 = 0.0;
    double c2 = 0.0;

    static Len2Moments iid(double p, int n) {
        return {p, n, n * p * p, n * (n - 1.0) * p * p * p};
    }
    // the worked correlated law x_i | x_{n+1} ~ Bernoulli((x_{n+1} - p)^2)
    static Len2Moments correlated_square(double p, int n) {
        double e2 = p - 2 * p * p + p * p * p;
        double e3 = std::pow(p, 5) - 4 * std::pow(p, 4) + 6 * std::pow(p, 3) - 4 * p * p + p;
        return {p, n, n * e2, n * (n - 1.0) * e3};
    }
};

inline LinearSystem len2_correlated_system(const Len2Moments& m) {
    const double n = static_cast<double>(m.n), c1 = m.c1, c2 = m.c2, p = m.p;
    Eigen::MatrixXd h(3, 3);
    h(0, 0) = c1 / (n * n) + c2 / (n * n);
    h(0, 1) = c1 / (2 * n * n) + c2 / (2 * n * n);
    h(0, 2) = c1 / (2 * n);
    h(1, 1) = c1 / (2 * n * n) + c2 / (3 * n * n);
    h(1, 2) = (n + 1.0) * c1 / (4 * n * n) + c2 / (12 * n * n);
    h(2, 2) = (2 * n + 1.0) * p / (6 * n) - (n - 1.0) * c1 / (6 * n * n) + c2 / (6 * n * n);
    h(1, 0) = h(0, 1);
    h(2, 0) = h(0, 2);
    h(2, 1) = h(1, 2);
    Eigen::VectorXd rhs(3);
    rhs << c1 / (2 * n), c1 / (3 * n), p / 4.0 + c1 / (12 * n);
    return {h, rhs};
}

inline ReparamVector len2_correlated_minimizer(const Len2Moments& m) {
    auto sys = len2_correlated_system(m);
    ReparamVector out;
    out.d = 1;
    out.x = sys.h.ldlt().solve(sys.rhs);
    return out;
}

// ---------------------------------------------------------------------------
// General-length minimizer: binary kernels with U(0,1) transitions, or
// Dirichlet-row kernels over |S| states with uniform initials.
//
// Every needed moment is a chain moment of one realized kernel:
//   chain(positions t1 <= ... <= tk) =
//     pi^T P^(t1-1) Dv P^(t2-t1) Dv ... Dv P^(tk-t_{k-1}) v
// with v the state values and Dv = diag(v); H and rhs average products of
// chain moments over the kernel prior.
// ---------------------------------------------------------------------------

struct GeneralMinimizerSpec {
    int d = 1;
    int n = 10;
    KernelPrior prior = KernelPrior::independent_uniform();
    Eigen::VectorXd initial_pmf;   // defaults: binary(p) or uniform(|S|)
    double p = 0.5;                // binary initial probability
    std::int64_t mc_samples = 100000;
    std::uint64_t seed = 0;
    int chunks = 64;
    int threads = 1;
    bool exact_d1_quadrature = true;  // exact tensor quadrature when d == 1
                                      // and the prior is IndependentUniform
};

struct MinimizerEstimate {
    ReparamVector xstar;
    Eigen::MatrixXd h;
    Eigen::VectorXd rhs;
    Eigen::MatrixXd h_se;   // per-entry MC standard errors (0 for exact paths)
    Eigen::VectorXd rhs_se;
    double min_eigenvalue = 0.0;
    bool exact = false;
};

namespace detail {

// chain moment for sorted 1-based positions
inline double chain_moment(const std::vector<Eigen::MatrixXd>& powers, const Eigen::VectorXd& pi,
                           const Eigen::VectorXd& values, const int* pos, int count) {
    Eigen::RowVectorXd v = pi.transpose() * powers[pos[0] - 1];
    for (int t = 1; t < count; ++t)
        v = (v.transpose().cwiseProduct(values)).transpose() * powers[pos[t] - pos[t - 1]];
    return v.dot(values);
}

struct MomentTables {
    Eigen::VectorXd pair;          // chain({i,k}) for every canonical pair over [d+1]
    Eigen::MatrixXd quad;          // chain(sorted union) for pair x pair
};

inline MomentTables moment_tables(const TransitionKernel& kernel, const Eigen::VectorXd& pi, int d) {
    const int s = kernel.size();
    Eigen::VectorXd values(s);
    for (int i = 0; i < s; ++i) values[i] = static_cast<double>(i);
    std::vector<Eigen::MatrixXd> powers(d + 2);
    powers[0] = Eigen::MatrixXd::Identity(s, s);
    for (int t = 1; t <= d + 1; ++t) powers[t] = powers[t - 1] * kernel.probs;

    const int m = pair_count(d);
    MomentTables tbl;
    tbl.pair.resize(m);
    std::vector<std::pair<int, int>> pairs(m);
    for (int r = 1; r <= m; ++r) {
        pairs[r - 1] = pair_from_index(r, d);
        int pos[2] = {pairs[r - 1].first, pairs[r - 1].second};
        tbl.pair[r - 1] = chain_moment(powers, pi, values, pos, 2);
    }
    tbl.quad.resize(m, m);
    for (int a = 0; a < m; ++a)
        for (int c = a; c < m; ++c) {
            int pos[4] = {pairs[a].first, pairs[a].second, pairs[c].first, pairs[c].second};
            std::sort(pos, pos + 4);
            tbl.quad(a, c) = tbl.quad(c, a) = chain_moment(powers, pi, values, pos, 4);
        }
    return tbl;
}

// Accumulate one kernel's contribution to H and rhs (given weight).
inline void accumulate_system(const MomentTables& tbl, int d, int n, double weight,
                              Eigen::MatrixXd& h, Eigen::VectorXd& rhs) {
    const int m = pair_count(d);
    const double inv_n = 1.0 / static_cast<double>(n);
    // query coactivations reuse the pair table: positions in [d] (and (j, d+1)
    // for the label pair)
    for (int bi = 1; bi <= d; ++bi) {
        for (int bj = 1; bj <= d; ++bj) {
            double q = tbl.pair[pair_index(std::min(bi, bj), std::max(bi, bj), d) - 1];
            for (int a = 0; a < m; ++a) {
                const double pa = tbl.pair[a];
                for (int c = 0; c < m; ++c) {
                    double gg = inv_n * tbl.quad(a, c) + (1.0 - inv_n) * pa * tbl.pair[c];
                    h((bi - 1) * m + a, (bj - 1) * m + c) += weight * q * gg;
                }
            }
        }
        double qy = tbl.pair[pair_index(bi, d + 1, d) - 1];
        for (int a = 0; a < m; ++a) rhs[(bi - 1) * m + a] += weight * qy * tbl.pair[a];
    }
}

// Gauss-Legendre nodes/weights on [0,1]; exact for polynomials of degree
// <= 2k-1, which covers the d = 1 integrands with room to spare.
inline void gauss_legendre_01(int k, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(k);
    weights.resize(k);
    for (int i = 0; i < k; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (k + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= k; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double dp = k * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= k; ++j) {
            double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        double dp = k * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = 0.5 * (1.0 + x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
}

}  // namespace detail

// Assembles H, rhs and solves H X* = rhs. Monte Carlo over the kernel prior
// with chunked standard errors; the d = 1 uniform-prior case integrates the
// (polynomial) integrands exactly with tensor Gauss-Legendre quadrature.
inline MinimizerEstimate general_minimizer(const GeneralMinimizerSpec& spec) {
    if (spec.d < 1) throw std::invalid_argument("general_minimizer: d >= 1");
    const int d = spec.d, m = pair_count(d), dim = d * m;

    Eigen::VectorXd pi = spec.initial_pmf;
    if (pi.size() == 0) {
        pi = spec.prior.variant == KernelPrior::Variant::IndependentUniform
                 ? InitialDistribution::binary(spec.p).pmf
                 : InitialDistribution::uniform(spec.prior.states()).pmf;
    }

    MinimizerEstimate out;
    out.h = Eigen::MatrixXd::Zero(dim, dim);
    out.rhs = Eigen::VectorXd::Zero(dim);
    out.h_se = Eigen::MatrixXd::Zero(dim, dim);
    out.rhs_se = Eigen::VectorXd::Zero(dim);

    const bool fixed = spec.prior.variant == KernelPrior::Variant::Fixed;
    const bool exact_quad = spec.exact_d1_quadrature && d == 1 &&
                            spec.prior.variant == KernelPrior::Variant::IndependentUniform;
    if (fixed) {
        auto tbl = detail::moment_tables(spec.prior.fixed_kernel, pi, d);
        detail::accumulate_system(tbl, d, spec.n, 1.0, out.h, out.rhs);
        out.exact = true;
    } else if (exact_quad) {
        std::vector<double> nodes, weights;
        detail::gauss_legendre_01(16, nodes, weights);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                auto tbl = detail::moment_tables(TransitionKernel::binary(nodes[i], nodes[j]), pi, d);
                detail::accumulate_system(tbl, d, spec.n, weights[i] * weights[j], out.h, out.rhs);
            }
        out.exact = true;
    } else {
        if (spec.mc_samples < 1000)
            throw std::invalid_argument("general_minimizer: need >= 1e3 MC samples");
        const int chunks = spec.chunks;
        std::vector<Eigen::MatrixXd> h_chunk(chunks, Eigen::MatrixXd::Zero(dim, dim));
        std::vector<Eigen::VectorXd> r_chunk(chunks, Eigen::VectorXd::Zero(dim));
        std::vector<std::int64_t> sizes(chunks, 0);
        parallel_chunks(spec.mc_samples, chunks, spec.threads,
                        [&](int c, std::int64_t lo, std::int64_t hi) {
                            RngStream rng = RngStream::substream(spec.seed, c);
                            for (std::int64_t i = lo; i < hi; ++i) {
                                auto kernel = sample_kernel(spec.prior, rng);
                                auto tbl = detail::moment_tables(kernel, pi, d);
                                detail::accumulate_system(tbl, d, spec.n, 1.0, h_chunk[c], r_chunk[c]);
                            }
                            sizes[c] = hi - lo;
                        });
        std::int64_t total = 0;
        for (int c = 0; c < chunks; ++c) {
            out.h += h_chunk[c];
            out.rhs += r_chunk[c];
            total += sizes[c];
        }
        out.h /= static_cast<double>(total);
        out.rhs /= static_cast<double>(total);
        // chunk-scatter standard errors of the means
        Eigen::MatrixXd h2 = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd r2 = Eigen::VectorXd::Zero(dim);
        for (int c = 0; c < chunks; ++c) {
            Eigen::MatrixXd dh = h_chunk[c] / static_cast<double>(sizes[c]) - out.h;
            Eigen::VectorXd dr = r_chunk[c] / static_cast<double>(sizes[c]) - out.rhs;
            h2 += dh.cwiseProduct(dh);
            r2 += dr.cwiseProduct(dr);
        }
        out.h_se = (h2 / (chunks * (chunks - 1.0))).cwiseSqrt();
        out.rhs_se = (r2 / (chunks * (chunks - 1.0))).cwiseSqrt();
    }

    out.h = 0.5 * (out.h + out.h.transpose());  // remove MC asymmetry
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.h);
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
    double noise = 5.0 * out.h_se.maxCoeff() + 1e-10 * out.h.cwiseAbs().maxCoeff();
    if (out.min_eigenvalue < -noise)
        throw std::runtime_error("general_minimizer: estimated H is not PSD beyond MC noise");
    out.xstar.d = d;
    out.xstar.x = out.h.ldlt().solve(out.rhs);
    return out;
}

// ---------------------------------------------------------------------------
// Recovering transformer parameters
// ---------------------------------------------------------------------------

// d = 1 recovery: b = (1, t), A = (X1, X2 - t X1) with t a real root of
// X1 t^2 - X2 t + X3 = 0. Returns nothing when the discriminant is negative
// (no real preimage with b1 != 0); the X1 = 0 branch uses b = (0, 1).
inline std::optional<LayerParams> recover_params_len2(const ReparamVector& x) {
    if (x.d != 1 || x.x.size() != 3) throw std::invalid_argument("recover_params_len2: d must be 1");
    const double x1 = x.x[0], x2 = x.x[1], x3 = x.x[2];
    Eigen::VectorXd b(2);
    Eigen::MatrixXd a(2, 1);
    if (x1 == 0.0) {
        b << 0.0, 1.0;
        a << x2, x3;
    } else {
        const double disc = x2 * x2 - 4.0 * x1 * x3;
        if (disc < 0.0) return std::nullopt;
        // stable quadratic root, then b2 a2 = X3 follows from Vieta
        const double s = std::sqrt(disc);
        const double t = (x2 >= 0.0) ? (x2 + s) / (2.0 * x1) : (x2 - s) / (2.0 * x1);
        b << 1.0, t;
        a << x1, x2 - t * x1;
    }
    auto params = LayerParams::sparse(b, a);
    if ((reparam_map(params.b, params.A).x - x.x).cwiseAbs().maxCoeff() > 1e-10)
        throw std::runtime_error("recover_params_len2: phi verification failed");
    return params;
}

struct ProjectionResult {
    LayerParams params;  // Sparse
    double residual = 0.0;
};

// psi: best-effort projection of X onto the parameter manifold by
// alternating least squares with restarts. residual <= 1e-10 certifies a
// preimage; larger residuals are best-effort bounds.
inline ProjectionResult project_to_params(const ReparamVector& x, int restarts = 32,
                                          int iters = 1000, std::uint64_t seed = 0) {
    auto inst = reparam_structure(x.d);
    inst.target = x.x;
    auto res = als_solve(inst, restarts, iters, seed);
    ProjectionResult out{LayerParams::sparse(res.b, res.a), res.residual_norm};
    return out;
}

inline void write_system_csv(std::ostream& os, const MinimizerEstimate& est) {
    os.precision(17);
    const int d = est.xstar.d, m = pair_count(d);
    os << "kind,i,j,ip,jp,kp,lp,value,se\n";
    for (int bi = 1; bi <= d; ++bi)
        for (int a = 1; a <= m; ++a) {
            auto [ip, jp] = pair_from_index(a, d);
            int r = (bi - 1) * m + a - 1;
            os << "rhs," << bi << ",0," << ip << ',' << jp << ",0,0," << est.rhs[r] << ','
               << est.rhs_se[r] << '\n';
            os << "xstar," << bi << ",0," << ip << ',' << jp << ",0,0," << est.xstar.x[r] << ",0\n";
        }
    for (int bi = 1; bi <= d; ++bi)
        for (int a = 1; a <= m; ++a)
            for (int bj = 1; bj <= d; ++bj)
                for (int c = 1; c <= m; ++c) {
                    auto [ip, jp] = pair_from_index(a, d);
                    auto [kp, lp] = pair_from_index(c, d);
                    int r = (bi - 1) * m + a - 1, cc = (bj - 1) * m + c - 1;
                    os << "h," << bi << ',' << bj << ',' << ip << ',' << jp << ',' << kp << ','
                       << lp << ',' << est.h(r, cc) << ',' << est.h_se(r, cc) << '\n';
                }
}

}  // namespace mlsa
