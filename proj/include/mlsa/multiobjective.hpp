#pragma once

// The multi-objective reading of the restricted multilayer forward pass:
// objective stacks R1, R2 and their Jacobians, the preconditioned weight
// update that reproduces the forward trace exactly, and Generational
// Distance against a sampled Pareto front.
//
// Convention: the weight vector w satisfies y^(l) = <w_l, x_{n+1}> exactly
// (this is what forward_equiv_check certifies). The update preconditions the
// matrices
//   G1(w) = (1/n) sum_j [x_j x_j^T; (y_j + w.x_j) x_j^T]        ((d+1) x d)
//   g2(w) = (1/n) sum_j [(y_j + w.x_j) x_j; (y_j + w.x_j)^2]    (d+1)
// as w' = w - b^T (G1(w) A_bar + g2(w) a^T). r1_eval/r2_eval evaluate the
// objective stacks in their published w-form, whose last components are the
// plain square losses used for logging.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mlsa/lsa_core.hpp"
#include "mlsa/markov_data.hpp"
#include "mlsa/parallel.hpp"

namespace mlsa {

// In-context views of a prompt for the weight-space computations.
struct PromptView {
    Eigen::MatrixXd x;   // d x n inputs
    Eigen::VectorXd y;   // n labels
    Eigen::VectorXd xq;  // query input

    static PromptView of(const Prompt& p) {
        PromptView v;
        v.x = p.z0.topLeftCorner(p.d, p.n);
        v.y = p.z0.row(p.d).head(p.n).transpose();
        v.xq = p.z0.col(p.n).head(p.d);
        return v;
    }
};

// R1(w): first d entries -(1/n) sum_j x_{j,k} <w, x_j>, last entry the mean
// squared loss (1/n) sum_j (<w, x_j> - y_j)^2.
inline Eigen::VectorXd r1_objectives(const Eigen::VectorXd& w, const PromptView& v) {
    const int d = static_cast<int>(v.x.rows());
    const int n = static_cast<int>(v.x.cols());
    if (w.size() != d) throw std::invalid_argument("r1_objectives: weight dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d + 1);
    for (int j = 0; j < n; ++j) {
        double pred = w.dot(v.x.col(j));
        out.head(d) -= pred * v.x.col(j);
        double r = pred - v.y[j];
        out[d] += r * r;
    }
    return out / static_cast<double>(n);
}

// R2(w): per example, branch on x_{j,d}. First d entries
// -(w_d (y_j - <w_{:d-1}, x_{j,:d-1}>) + w_d^2/2 x_{j,d}) x_j; last entry the
// cubic penalty (y_j - w.x_j)^3 / (3 x_{j,d}) or, when x_{j,d} = 0, the
// quadratic -(y_j - <w_{:d-1}, x_{j,:d-1}>)^2 w_d.
inline Eigen::VectorXd r2_objectives(const Eigen::VectorXd& w, const PromptView& v) {
    const int d = static_cast<int>(v.x.rows());
    const int n = static_cast<int>(v.x.cols());
    if (w.size() != d) throw std::invalid_argument("r2_objectives: weight dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d + 1);
    const double wd = w[d - 1];
    for (int j = 0; j < n; ++j) {
        const auto xj = v.x.col(j);
        const double xjd = xj[d - 1];
        const double partial = v.y[j] - w.head(d - 1).dot(xj.head(d - 1));
        out.head(d) -= (wd * partial + 0.5 * wd * wd * xjd) * xj;
        if (xjd != 0.0) {  // states are integers, exact comparison intended
            double r = v.y[j] - w.dot(xj);
            out[d] += r * r * r / (3.0 * xjd);
        } else {
            out[d] -= partial * partial * wd;
        }
    }
    return out / static_cast<double>(n);
}

// Analytic Jacobians of the two stacks with respect to w; rows follow the
// objective components.
inline Eigen::MatrixXd r1_jacobian(const Eigen::VectorXd& w, const PromptView& v) {
    const int d = static_cast<int>(v.x.rows());
    const int n = static_cast<int>(v.x.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d + 1, d);
    for (int j = 0; j < n; ++j) {
        const auto xj = v.x.col(j);
        out.topRows(d) -= xj * xj.transpose();
        out.row(d) += 2.0 * (w.dot(xj) - v.y[j]) * xj.transpose();
    }
    return out / static_cast<double>(n);
}

inline Eigen::MatrixXd r2_jacobian(const Eigen::VectorXd& w, const PromptView& v) {
    const int d = static_cast<int>(v.x.rows());
    const int n = static_cast<int>(v.x.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d + 1, d);
    const double wd = w[d - 1];
    for (int j = 0; j < n; ++j) {
        const auto xj = v.x.col(j);
        const double xjd = xj[d - 1];
        const double partial = v.y[j] - w.head(d - 1).dot(xj.head(d - 1));
        // d/dw_k of -(wd*partial + wd^2/2 xjd) x_{j,i}:
        //   k < d: +wd x_{j,k} x_{j,i};  k = d: -(partial + wd xjd) x_{j,i}
        for (int k = 0; k < d - 1; ++k) out.col(k).head(d) += wd * xj[k] * xj;
        out.col(d - 1).head(d) -= (partial + wd * xjd) * xj;
        if (xjd != 0.0) {
            double r = v.y[j] - w.dot(xj);
            out.row(d) -= (r * r / xjd) * xj.transpose();
        } else {
            out.row(d).head(d - 1) += 2.0 * partial * wd * xj.head(d - 1).transpose();
            out(d, d - 1) -= partial * partial;
        }
    }
    return out / static_cast<double>(n);
}

// One preconditioned step of the forward-pass-equivalent weight recursion.
inline Eigen::VectorXd precond_step(const Eigen::VectorXd& w, const LayerParams& layer,
                                    const PromptView& v) {
    if (layer.form != ParamForm::Restricted)
        throw std::invalid_argument("precond_step: layer must be in restricted form");
    const int d = static_cast<int>(v.x.rows());
    const int n = static_cast<int>(v.x.cols());
    Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(d + 1, d);
    Eigen::VectorXd g2 = Eigen::VectorXd::Zero(d + 1);
    for (int j = 0; j < n; ++j) {
        const auto xj = v.x.col(j);
        const double u = v.y[j] + w.dot(xj);
        g1.topRows(d) += xj * xj.transpose();
        g1.row(d) += u * xj.transpose();
        g2.head(d) += u * xj;
        g2[d] += u * u;
    }
    g1 /= static_cast<double>(n);
    g2 /= static_cast<double>(n);
    return w - (layer.b.transpose() * (g1 * layer.A_bar + g2 * layer.a.transpose())).transpose();
}

// Weight trajectory w_0 = 0, w_{l+1} = precond_step(w_l, layer_l).
inline std::vector<Eigen::VectorXd> weight_trajectory(const LsaModel& model, const PromptView& v) {
    std::vector<Eigen::VectorXd> ws;
    ws.push_back(Eigen::VectorXd::Zero(model.d));
    for (const auto& layer : model.layers) ws.push_back(precond_step(ws.back(), layer, v));
    return ws;
}

// Max over layers of |y^(l) - <w_l, x_{n+1}>|, the dual-computation check.
inline double forward_equivalence_gap(const LsaModel& model, const Prompt& p) {
    for (const auto& layer : model.layers)
        if (layer.form != ParamForm::Restricted)
            throw std::invalid_argument("forward_equivalence_gap: restricted model required");
    PromptView v = PromptView::of(p);
    auto ws = weight_trajectory(model, v);
    double gap = 0.0;
    Eigen::MatrixXd z = p.z0;
    gap = std::max(gap, std::abs(z(p.d, p.n) - ws[0].dot(v.xq)));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        z = forward_layer(z, model.layers[l]);
        gap = std::max(gap, std::abs(z(p.d, p.n) - ws[l + 1].dot(v.xq)));
    }
    return gap;
}

// GD(points, front) = mean over points of the minimum Euclidean distance to
// the front.
inline double generational_distance(const std::vector<Eigen::VectorXd>& points,
                                    const std::vector<Eigen::VectorXd>& front) {
    if (front.empty()) throw std::invalid_argument("generational_distance: empty front");
    if (points.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& p : points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : front) best = std::min(best, (p - f).squaredNorm());
        acc += std::sqrt(best);
    }
    return acc / static_cast<double>(points.size());
}

struct ParetoFrontSpec {
    double box_halfwidth = 1.0;  // w sampled uniformly in [-B, B]^d
    int samples = 100000;
    std::uint64_t seed = 0;
    int threads = 1;
};

// Stacked objective vector (R1; R2) in R^{2(d+1)}.
inline Eigen::VectorXd stacked_objectives(const Eigen::VectorXd& w, const PromptView& v) {
    const int d = static_cast<int>(v.x.rows());
    Eigen::VectorXd out(2 * (d + 1));
    out.head(d + 1) = r1_objectives(w, v);
    out.tail(d + 1) = r2_objectives(w, v);
    return out;
}

// Samples w in the box, evaluates the stacked objectives, and filters to the
// non-dominated set under componentwise <= (minimization).
inline std::vector<Eigen::VectorXd> pareto_front(const PromptView& v, const ParetoFrontSpec& spec) {
    const int d = static_cast<int>(v.x.rows());
    std::vector<Eigen::VectorXd> vals(spec.samples);
    const int chunks = 64;
    parallel_chunks(spec.samples, chunks, spec.threads, [&](int c, std::int64_t lo, std::int64_t hi) {
        RngStream rng = RngStream::substream(spec.seed, c);
        Eigen::VectorXd w(d);
        for (std::int64_t i = lo; i < hi; ++i) {
            for (int k = 0; k < d; ++k) w[k] = rng.uniform(-spec.box_halfwidth, spec.box_halfwidth);
            vals[i] = stacked_objectives(w, v);
        }
    });

    // a dominator has strictly smaller coordinate sum, so sorting by sum lets
    // each point scan only its prefix
    std::vector<int> order(vals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[a].sum() < vals[b].sum(); });
    const int dim = 2 * (d + 1);
    std::vector<char> dominated(vals.size(), 0);
    parallel_chunks(static_cast<std::int64_t>(order.size()), 64, spec.threads,
                    [&](int, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t oi = lo; oi < hi; ++oi) {
                            const Eigen::VectorXd& cand = vals[order[oi]];
                            for (std::int64_t oj = 0; oj < oi; ++oj) {
                                const Eigen::VectorXd& other = vals[order[oj]];
                                bool dominates = true;
                                bool strict = false;
                                for (int k = 0; k < dim; ++k) {
                                    if (other[k] > cand[k]) {
                                        dominates = false;
                                        break;
                                    }
                                    if (other[k] < cand[k]) strict = true;
                                }
                                if (dominates && strict) {
                                    dominated[order[oi]] = 1;
                                    break;
                                }
                            }
                        }
                    });
    std::vector<Eigen::VectorXd> front;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (!dominated[i]) front.push_back(std::move(vals[i]));
    return front;
}

}  // namespace mlsa
