#pragma once

// Linear self-attention: forward pass, analytic reverse-mode gradients, and
// training on the in-context objective. Three parameter forms share one
// dense embedding:
//   Sparse:     P = [0_{d x (d+1)}; b^T],  Q = [A | 0]
//   Restricted: P = [0_{d x (d+1)}; b^T],  Q = -[[A_bar, 0]; [a^T, 0]]
// The layer map is Z <- Z + (1/n) P (Z M Z^T) Q Z with M = diag(I_n, 0).

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsa/markov_data.hpp"
#include "mlsa/parallel.hpp"
#include "mlsa/rng.hpp"

namespace mlsa {

enum class ParamForm { Dense, Sparse, Restricted };

inline const char* to_string(ParamForm f) {
    switch (f) {
        case ParamForm::Dense: return "dense";
        case ParamForm::Sparse: return "sparse";
        case ParamForm::Restricted: return "restricted";
    }
    return "?";
}

struct LayerParams {
    ParamForm form = ParamForm::Sparse;
    // Dense storage
    Eigen::MatrixXd P, Q;
    // Sparse: b, A; Restricted: b, A_bar, a
    Eigen::VectorXd b;
    Eigen::MatrixXd A;
    Eigen::MatrixXd A_bar;
    Eigen::VectorXd a;

    static LayerParams dense(Eigen::MatrixXd P, Eigen::MatrixXd Q) {
        LayerParams l;
        l.form = ParamForm::Dense;
        l.P = std::move(P);
        l.Q = std::move(Q);
        if (l.P.rows() != l.P.cols() || l.Q.rows() != l.Q.cols() || l.P.rows() != l.Q.rows())
            throw std::invalid_argument("LayerParams::dense: P, Q must be square and same size");
        return l;
    }
    static LayerParams sparse(Eigen::VectorXd b, Eigen::MatrixXd A) {
        LayerParams l;
        l.form = ParamForm::Sparse;
        if (A.rows() != b.size() || A.cols() != b.size() - 1)
            throw std::invalid_argument("LayerParams::sparse: A must be (d+1) x d");
        l.b = std::move(b);
        l.A = std::move(A);
        return l;
    }
    static LayerParams restricted(Eigen::VectorXd b, Eigen::MatrixXd A_bar, Eigen::VectorXd a) {
        LayerParams l;
        l.form = ParamForm::Restricted;
        const int d = static_cast<int>(a.size());
        if (b.size() != d + 1 || A_bar.rows() != d || A_bar.cols() != d)
            throw std::invalid_argument("LayerParams::restricted: shapes must be b:(d+1), A_bar:dxd, a:d");
        l.b = std::move(b);
        l.A_bar = std::move(A_bar);
        l.a = std::move(a);
        return l;
    }

    int dim() const {  // d+1
        switch (form) {
            case ParamForm::Dense: return static_cast<int>(P.rows());
            case ParamForm::Sparse: return static_cast<int>(b.size());
            case ParamForm::Restricted: return static_cast<int>(b.size());
        }
        return 0;
    }

    Eigen::MatrixXd dense_p() const {
        if (form == ParamForm::Dense) return P;
        const int dp1 = dim();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dp1, dp1);
        out.row(dp1 - 1) = b.transpose();
        return out;
    }
    Eigen::MatrixXd dense_q() const {
        const int dp1 = dim();
        const int d = dp1 - 1;
        if (form == ParamForm::Dense) return Q;
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dp1, dp1);
        if (form == ParamForm::Sparse) {
            out.leftCols(d) = A;
        } else {
            out.topLeftCorner(d, d) = -A_bar;
            out.row(d).head(d) = -a.transpose();
        }
        return out;
    }

    // Inverse of the embeddings; exact by construction.
    static LayerParams sparse_from_dense(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
        const int dp1 = static_cast<int>(P.rows());
        return sparse(P.row(dp1 - 1).transpose(), Q.leftCols(dp1 - 1));
    }
    static LayerParams restricted_from_dense(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
        const int dp1 = static_cast<int>(P.rows());
        const int d = dp1 - 1;
        return restricted(P.row(d).transpose(), -Q.topLeftCorner(d, d),
                          -Q.row(d).head(d).transpose());
    }
};

struct LsaModel {
    int d = 0;
    int n = 0;
    std::vector<LayerParams> layers;

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("LsaModel: need at least one layer");
        for (const auto& l : layers)
            if (l.dim() != d + 1) throw std::invalid_argument("LsaModel: layer dimension mismatch");
    }
};

inline Eigen::MatrixXd forward_layer(const Eigen::MatrixXd& z, const LayerParams& layer) {
    const int dp1 = layer.dim();
    if (z.rows() != dp1 || z.cols() < 2)
        throw std::invalid_argument("forward_layer: z must be (d+1) x (n+1)");
    const int n = static_cast<int>(z.cols()) - 1;
    const auto zc = z.leftCols(n);  // mask drops the query column
    Eigen::MatrixXd s = zc * zc.transpose();
    return z + (layer.dense_p() * s) * (layer.dense_q() * z) / static_cast<double>(n);
}

inline double predict(const LsaModel& model, const Prompt& p) {
    if (model.d != p.d) throw std::invalid_argument("predict: model/prompt dimension mismatch");
    Eigen::MatrixXd z = p.z0;
    for (const auto& layer : model.layers) z = forward_layer(z, layer);
    return z(p.d, p.n);
}

inline double mse_loss(const LsaModel& model, const std::vector<Prompt>& prompts) {
    if (prompts.empty()) throw std::invalid_argument("mse_loss: empty batch");
    double acc = 0.0;
    for (const auto& p : prompts) {
        double r = predict(model, p) - p.query_label;
        acc += r * r;
    }
    return acc / static_cast<double>(prompts.size());
}

// Fraction of prompts whose prediction rounds to the held-out label.
// Ties round toward the smaller state.
inline double accuracy(const LsaModel& model, const std::vector<Prompt>& prompts) {
    if (prompts.empty()) return 0.0;
    int correct = 0;
    for (const auto& p : prompts) {
        double pred = predict(model, p);
        double guess = std::ceil(pred - 0.5);
        guess = std::min(std::max(guess, 0.0), static_cast<double>(p.num_states - 1));
        if (guess == p.query_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(prompts.size());
}

// Gradients carried in the same shape as their layer's parameter form.
struct LayerGrad {
    Eigen::MatrixXd dP, dQ;  // dense
    Eigen::VectorXd db;
    Eigen::MatrixXd dA, dA_bar;
    Eigen::VectorXd da;
};

namespace detail {

// Dense reverse pass for one prompt; accumulates dense dP/dQ into grads.
inline double backprop_prompt(const LsaModel& model, const Prompt& p, double weight,
                              std::vector<Eigen::MatrixXd>& dPs, std::vector<Eigen::MatrixXd>& dQs) {
    const int L = static_cast<int>(model.layers.size());
    const double inv_n = 1.0 / static_cast<double>(p.n);
    std::vector<Eigen::MatrixXd> zs(L + 1);
    zs[0] = p.z0;
    for (int l = 0; l < L; ++l) zs[l + 1] = forward_layer(zs[l], model.layers[l]);
    const double pred = zs[L](p.d, p.n);
    const double res = pred - p.query_label;

    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(p.d + 1, p.n + 1);
    dz(p.d, p.n) = 2.0 * res * weight;
    for (int l = L - 1; l >= 0; --l) {
        const Eigen::MatrixXd& z = zs[l];
        const auto zc = z.leftCols(p.n);
        const Eigen::MatrixXd denseP = model.layers[l].dense_p();
        const Eigen::MatrixXd denseQ = model.layers[l].dense_q();
        Eigen::MatrixXd s = zc * zc.transpose();
        Eigen::MatrixXd qz = denseQ * z;
        Eigen::MatrixXd ps = denseP * s;

        dPs[l].noalias() += inv_n * dz * (s * qz).transpose();
        dQs[l].noalias() += inv_n * (ps.transpose() * dz) * z.transpose();

        Eigen::MatrixXd ds = inv_n * (denseP.transpose() * dz) * qz.transpose();
        Eigen::MatrixXd dz_next = dz;
        dz_next.leftCols(p.n).noalias() += (ds + ds.transpose()) * zc;
        dz_next.noalias() += denseQ.transpose() * (inv_n * ps.transpose() * dz);
        dz = std::move(dz_next);
    }
    return res * res;
}

inline void project_grad(const LayerParams& layer, LayerGrad& g) {
    const int dp1 = layer.dim();
    const int d = dp1 - 1;
    switch (layer.form) {
        case ParamForm::Dense:
            break;
        case ParamForm::Sparse:
            g.db = g.dP.row(d).transpose();
            g.dA = g.dQ.leftCols(d);
            break;
        case ParamForm::Restricted:
            g.db = g.dP.row(d).transpose();
            g.dA_bar = -g.dQ.topLeftCorner(d, d);
            g.da = -g.dQ.row(d).head(d).transpose();
            break;
    }
}

}  // namespace detail

// Exact reverse-mode gradient of mse_loss; entries frozen to zero by the
// Sparse/Restricted patterns are dropped. Also returns the loss.
inline double gradients(const LsaModel& model, const std::vector<Prompt>& prompts,
                        std::vector<LayerGrad>& out, int threads = 1) {
    if (prompts.empty()) throw std::invalid_argument("gradients: empty batch");
    const int L = static_cast<int>(model.layers.size());
    const int dp1 = model.d + 1;
    const double weight = 1.0 / static_cast<double>(prompts.size());

    const int chunks = static_cast<int>(std::min<std::size_t>(prompts.size(), 16));
    std::vector<std::vector<Eigen::MatrixXd>> dPs(chunks), dQs(chunks);
    std::vector<double> losses(chunks, 0.0);
    parallel_chunks(static_cast<std::int64_t>(prompts.size()), chunks, threads,
                    [&](int c, std::int64_t lo, std::int64_t hi) {
                        dPs[c].assign(L, Eigen::MatrixXd::Zero(dp1, dp1));
                        dQs[c].assign(L, Eigen::MatrixXd::Zero(dp1, dp1));
                        for (std::int64_t i = lo; i < hi; ++i)
                            losses[c] += detail::backprop_prompt(model, prompts[i], weight, dPs[c], dQs[c]);
                    });

    out.assign(L, LayerGrad{});
    double loss = 0.0;
    for (int l = 0; l < L; ++l) {
        out[l].dP = Eigen::MatrixXd::Zero(dp1, dp1);
        out[l].dQ = Eigen::MatrixXd::Zero(dp1, dp1);
        for (int c = 0; c < chunks; ++c) {
            out[l].dP += dPs[c][l];
            out[l].dQ += dQs[c][l];
        }
        detail::project_grad(model.layers[l], out[l]);
    }
    for (int c = 0; c < chunks; ++c) loss += losses[c];
    return loss * weight;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    enum class Optimizer { GradientDescent, Adam };
    Optimizer optimizer = Optimizer::Adam;
    double learning_rate = 0.01;
    int iterations = 1000;
    int batch_size = 100;
    std::uint64_t seed = 0;
    ParamForm parameter_form = ParamForm::Sparse;
    double init_scale = 0.1;          // zero-mean uniform init half-width
    double beta1 = 0.9;               // Adam moments pinned for reproducibility
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double divergence_threshold = 1e6;
    double grad_clip = 0.0;           // global-norm clip; 0 disables
    int threads = 1;

    void validate() const {
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
        if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
};

// Per-iteration batch supplier. Streaming sources draw a fresh i.i.d. batch
// every iteration; fixed sources return the same batch each time.
class PromptSource {
public:
    virtual ~PromptSource() = default;
    virtual const std::vector<Prompt>& batch(int iteration) = 0;
};

class FixedPromptSource : public PromptSource {
public:
    explicit FixedPromptSource(std::vector<Prompt> prompts) : prompts_(std::move(prompts)) {}
    const std::vector<Prompt>& batch(int) override { return prompts_; }

private:
    std::vector<Prompt> prompts_;
};

class StreamingPromptSource : public PromptSource {
public:
    StreamingPromptSource(KernelPrior prior, InitialStateSampler initials, int d, int n,
                          int batch_size, std::uint64_t seed)
        : prior_(std::move(prior)), initials_(std::move(initials)), d_(d), n_(n),
          batch_size_(batch_size), seed_(seed) {}

    const std::vector<Prompt>& batch(int iteration) override {
        current_.clear();
        current_.reserve(batch_size_);
        for (int i = 0; i < batch_size_; ++i) {
            auto sub = RngStream::substream(seed_, static_cast<std::uint64_t>(iteration) * batch_size_ + i);
            current_.push_back(sample_prompt_with_initials(prior_, initials_, d_, n_, sub).first);
        }
        return current_;
    }

private:
    KernelPrior prior_;
    InitialStateSampler initials_;
    int d_, n_, batch_size_;
    std::uint64_t seed_;
    std::vector<Prompt> current_;
};

inline std::vector<Prompt> sample_prompt_batch(const KernelPrior& prior,
                                               const InitialStateSampler& initials, int d, int n,
                                               int count, std::uint64_t seed) {
    std::vector<Prompt> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        auto sub = RngStream::substream(seed, static_cast<std::uint64_t>(i));
        out.push_back(sample_prompt_with_initials(prior, initials, d, n, sub).first);
    }
    return out;
}

inline LsaModel init_model(int d, int n, int layers, ParamForm form, double init_scale,
                           std::uint64_t seed) {
    RngStream rng(splitmix64(seed) ^ 0x1715A11ULL);
    const int dp1 = d + 1;
    auto u = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-init_scale, init_scale);
        return m;
    };
    LsaModel model;
    model.d = d;
    model.n = n;
    for (int l = 0; l < layers; ++l) {
        // draws are sequenced through named locals; argument order is unspecified
        switch (form) {
            case ParamForm::Dense: {
                Eigen::MatrixXd p = u(dp1, dp1);
                Eigen::MatrixXd q = u(dp1, dp1);
                model.layers.push_back(LayerParams::dense(std::move(p), std::move(q)));
                break;
            }
            case ParamForm::Sparse: {
                Eigen::MatrixXd b = u(dp1, 1);
                Eigen::MatrixXd a = u(dp1, d);
                model.layers.push_back(LayerParams::sparse(b, std::move(a)));
                break;
            }
            case ParamForm::Restricted: {
                Eigen::MatrixXd b = u(dp1, 1);
                Eigen::MatrixXd abar = u(d, d);
                Eigen::MatrixXd a = u(d, 1);
                model.layers.push_back(LayerParams::restricted(b, std::move(abar), a));
                break;
            }
        }
    }
    return model;
}

struct TrainResult {
    LsaModel model;
    std::vector<double> trace;  // per-iteration training loss
    bool diverged = false;
    int diverged_at = -1;
};

namespace detail {

// Flattened view over the trainable coordinates of one layer.
inline std::vector<Eigen::Map<Eigen::VectorXd>> param_views(LayerParams& l) {
    std::vector<Eigen::Map<Eigen::VectorXd>> v;
    switch (l.form) {
        case ParamForm::Dense:
            v.emplace_back(l.P.data(), l.P.size());
            v.emplace_back(l.Q.data(), l.Q.size());
            break;
        case ParamForm::Sparse:
            v.emplace_back(l.b.data(), l.b.size());
            v.emplace_back(l.A.data(), l.A.size());
            break;
        case ParamForm::Restricted:
            v.emplace_back(l.b.data(), l.b.size());
            v.emplace_back(l.A_bar.data(), l.A_bar.size());
            v.emplace_back(l.a.data(), l.a.size());
            break;
    }
    return v;
}

inline std::vector<Eigen::VectorXd> grad_blocks(const LayerParams& l, const LayerGrad& g) {
    std::vector<Eigen::VectorXd> v;
    switch (l.form) {
        case ParamForm::Dense:
            v.push_back(Eigen::Map<const Eigen::VectorXd>(g.dP.data(), g.dP.size()));
            v.push_back(Eigen::Map<const Eigen::VectorXd>(g.dQ.data(), g.dQ.size()));
            break;
        case ParamForm::Sparse:
            v.push_back(g.db);
            v.push_back(Eigen::Map<const Eigen::VectorXd>(g.dA.data(), g.dA.size()));
            break;
        case ParamForm::Restricted:
            v.push_back(g.db);
            v.push_back(Eigen::Map<const Eigen::VectorXd>(g.dA_bar.data(), g.dA_bar.size()));
            v.push_back(g.da);
            break;
    }
    return v;
}

}  // namespace detail

inline TrainResult train(LsaModel model, PromptSource& source, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    const int L = static_cast<int>(model.layers.size());

    // Adam state per parameter block
    std::vector<std::vector<Eigen::VectorXd>> m1(L), m2(L);
    for (int l = 0; l < L; ++l) {
        auto views = detail::param_views(model.layers[l]);
        for (auto& v : views) {
            m1[l].push_back(Eigen::VectorXd::Zero(v.size()));
            m2[l].push_back(Eigen::VectorXd::Zero(v.size()));
        }
    }

    TrainResult out;
    out.trace.reserve(cfg.iterations);
    std::vector<LayerGrad> grads;
    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto& prompts = source.batch(it - 1);
        double loss = gradients(model, prompts, grads, cfg.threads);
        out.trace.push_back(loss);
        if (!(loss < cfg.divergence_threshold)) {
            out.diverged = true;
            out.diverged_at = it - 1;
            break;
        }

        double gnorm2 = 0.0;
        std::vector<std::vector<Eigen::VectorXd>> blocks(L);
        for (int l = 0; l < L; ++l) {
            blocks[l] = detail::grad_blocks(model.layers[l], grads[l]);
            for (const auto& g : blocks[l]) gnorm2 += g.squaredNorm();
        }
        double scale = 1.0;
        if (cfg.grad_clip > 0.0 && gnorm2 > cfg.grad_clip * cfg.grad_clip)
            scale = cfg.grad_clip / std::sqrt(gnorm2);

        for (int l = 0; l < L; ++l) {
            auto views = detail::param_views(model.layers[l]);
            for (std::size_t k = 0; k < views.size(); ++k) {
                Eigen::VectorXd g = blocks[l][k] * scale;
                if (cfg.optimizer == TrainConfig::Optimizer::GradientDescent) {
                    views[k] -= cfg.learning_rate * g;
                } else {
                    m1[l][k] = cfg.beta1 * m1[l][k] + (1.0 - cfg.beta1) * g;
                    m2[l][k] = cfg.beta2 * m2[l][k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
                    double bc1 = 1.0 - std::pow(cfg.beta1, it);
                    double bc2 = 1.0 - std::pow(cfg.beta2, it);
                    views[k] -= cfg.learning_rate *
                                ((m1[l][k] / bc1).array() /
                                 ((m2[l][k] / bc2).array().sqrt() + cfg.adam_eps))
                                    .matrix();
                }
            }
        }
    }
    out.model = std::move(model);
    return out;
}

// ---------------------------------------------------------------------------
// One-layer fast path. The prediction of a single layer reads only the
// prompt's second-moment matrix S = Z_c Z_c^T and the query input, so both
// can be cached across iterations:
//   pred = (1/n) * p_last^T S (Q_left x_q)
// ---------------------------------------------------------------------------

struct CachedPromptStats {
    Eigen::MatrixXd s;   // Z_c Z_c^T, unnormalized
    Eigen::VectorXd xq;  // query input (length d)
    double y = 0.0;
    int n = 1;
    int num_states = 2;
};

inline CachedPromptStats cache_stats(const Prompt& p) {
    CachedPromptStats c;
    const auto zc = p.z0.leftCols(p.n);
    c.s = zc * zc.transpose();
    c.xq = p.z0.col(p.n).head(p.d);
    c.y = p.query_label;
    c.n = p.n;
    c.num_states = p.num_states;
    return c;
}

inline double predict_one_layer(const LsaModel& model, const CachedPromptStats& c) {
    const Eigen::VectorXd p_last = model.layers[0].dense_p().row(model.d).transpose();
    const Eigen::MatrixXd q_left = model.layers[0].dense_q().leftCols(model.d);
    return p_last.dot(c.s * (q_left * c.xq)) / static_cast<double>(c.n);
}

// Loss and gradient over a cached batch; exactly the 1-layer specialization
// of gradients() (the other dense entries have zero gradient).
inline double one_layer_loss_grad(const LsaModel& model, const std::vector<CachedPromptStats>& batch,
                                  LayerGrad& out) {
    const int dp1 = model.d + 1;
    const Eigen::VectorXd p_last = model.layers[0].dense_p().row(model.d).transpose();
    const Eigen::MatrixXd q_left = model.layers[0].dense_q().leftCols(model.d);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(dp1);
    Eigen::MatrixXd dqa = Eigen::MatrixXd::Zero(dp1, model.d);
    double loss = 0.0;
    const double w = 1.0 / static_cast<double>(batch.size());
    for (const auto& c : batch) {
        const double inv_n = 1.0 / static_cast<double>(c.n);
        Eigen::VectorXd sqx = c.s * (q_left * c.xq) * inv_n;
        double res = p_last.dot(sqx) - c.y;
        loss += res * res;
        double rho = 2.0 * res * w;
        db.noalias() += rho * sqx;
        dqa.noalias() += (rho * inv_n) * (c.s * p_last) * c.xq.transpose();
    }
    out = LayerGrad{};
    out.dP = Eigen::MatrixXd::Zero(dp1, dp1);
    out.dP.row(model.d) = db.transpose();
    out.dQ = Eigen::MatrixXd::Zero(dp1, dp1);
    out.dQ.leftCols(model.d) = dqa;
    detail::project_grad(model.layers[0], out);
    return loss * w;
}

inline TrainResult train_one_layer(LsaModel model, const std::vector<Prompt>& fixed_batch,
                                   const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (model.layers.size() != 1) throw std::invalid_argument("train_one_layer: one layer only");
    std::vector<CachedPromptStats> cached;
    cached.reserve(fixed_batch.size());
    for (const auto& p : fixed_batch) cached.push_back(cache_stats(p));

    std::vector<Eigen::VectorXd> m1, m2;
    {
        auto views = detail::param_views(model.layers[0]);
        for (auto& v : views) {
            m1.push_back(Eigen::VectorXd::Zero(v.size()));
            m2.push_back(Eigen::VectorXd::Zero(v.size()));
        }
    }
    TrainResult out;
    out.trace.reserve(cfg.iterations);
    LayerGrad grad;
    for (int it = 1; it <= cfg.iterations; ++it) {
        double loss = one_layer_loss_grad(model, cached, grad);
        out.trace.push_back(loss);
        if (!(loss < cfg.divergence_threshold)) {
            out.diverged = true;
            out.diverged_at = it - 1;
            break;
        }
        auto blocks = detail::grad_blocks(model.layers[0], grad);
        double gnorm2 = 0.0;
        for (const auto& g : blocks) gnorm2 += g.squaredNorm();
        double scale = 1.0;
        if (cfg.grad_clip > 0.0 && gnorm2 > cfg.grad_clip * cfg.grad_clip)
            scale = cfg.grad_clip / std::sqrt(gnorm2);
        auto views = detail::param_views(model.layers[0]);
        for (std::size_t k = 0; k < views.size(); ++k) {
            Eigen::VectorXd g = blocks[k] * scale;
            if (cfg.optimizer == TrainConfig::Optimizer::GradientDescent) {
                views[k] -= cfg.learning_rate * g;
            } else {
                m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * g;
                m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
                double bc1 = 1.0 - std::pow(cfg.beta1, it);
                double bc2 = 1.0 - std::pow(cfg.beta2, it);
                views[k] -= cfg.learning_rate *
                            ((m1[k] / bc1).array() / ((m2[k] / bc2).array().sqrt() + cfg.adam_eps))
                                .matrix();
            }
        }
    }
    out.model = std::move(model);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints and traces
// ---------------------------------------------------------------------------

inline void save_checkpoint(std::ostream& os, const LsaModel& model) {
    auto put_u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_mat = [&](const Eigen::MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                double v = m(i, j);
                os.write(reinterpret_cast<const char*>(&v), 8);
            }
    };
    os.write("MLSA", 4);
    put_u32(static_cast<std::uint32_t>(model.layers.size()));
    put_u32(static_cast<std::uint32_t>(model.d));
    put_u32(static_cast<std::uint32_t>(model.n));
    put_u32(static_cast<std::uint32_t>(model.layers.front().form));
    for (const auto& l : model.layers) {
        switch (l.form) {
            case ParamForm::Dense:
                put_mat(l.P);
                put_mat(l.Q);
                break;
            case ParamForm::Sparse:
                put_mat(l.b);
                put_mat(l.A);
                break;
            case ParamForm::Restricted:
                put_mat(l.b);
                put_mat(l.A_bar);
                put_mat(l.a);
                break;
        }
    }
}

inline LsaModel load_checkpoint(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (std::string(magic, 4) != "MLSA") throw std::runtime_error("load_checkpoint: bad magic");
    auto get_u32 = [&] {
        std::uint32_t v;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_mat = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                double v;
                is.read(reinterpret_cast<char*>(&v), 8);
                m(i, j) = v;
            }
        return m;
    };
    LsaModel model;
    std::uint32_t L = get_u32();
    model.d = static_cast<int>(get_u32());
    model.n = static_cast<int>(get_u32());
    ParamForm form = static_cast<ParamForm>(get_u32());
    const int dp1 = model.d + 1;
    for (std::uint32_t l = 0; l < L; ++l) {
        // reads are sequenced through named locals; argument order is unspecified
        switch (form) {
            case ParamForm::Dense: {
                Eigen::MatrixXd p = get_mat(dp1, dp1);
                Eigen::MatrixXd q = get_mat(dp1, dp1);
                model.layers.push_back(LayerParams::dense(std::move(p), std::move(q)));
                break;
            }
            case ParamForm::Sparse: {
                Eigen::MatrixXd b = get_mat(dp1, 1);
                Eigen::MatrixXd a = get_mat(dp1, model.d);
                model.layers.push_back(LayerParams::sparse(b, std::move(a)));
                break;
            }
            case ParamForm::Restricted: {
                Eigen::MatrixXd b = get_mat(dp1, 1);
                Eigen::MatrixXd abar = get_mat(model.d, model.d);
                Eigen::MatrixXd a = get_mat(model.d, 1);
                model.layers.push_back(LayerParams::restricted(b, std::move(abar), a));
                break;
            }
        }
    }
    return model;
}

inline void write_loss_trace_csv(std::ostream& os, const std::vector<double>& trace) {
    os.precision(17);
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << trace[i] << '\n';
}

}  // namespace mlsa
