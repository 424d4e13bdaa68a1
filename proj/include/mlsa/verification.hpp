#pragma once

// The acceptance property suites: twelve numbered criteria, each returning a
// pass/fail check with measured detail. Tolerances and sample sizes are
// pinned here; the CLI `verify` subcommand and the acceptance binary both run
// through this header.

#include <cstdint>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "mlsa/closed_form.hpp"
#include "mlsa/experiments.hpp"
#include "mlsa/multiobjective.hpp"

namespace mlsa {

struct VerificationConfig {
    std::uint64_t master_seed = 2026;
    int threads = 4;
    std::int64_t mc_scale = 1000000;  // prompts/samples for the heavy MC criteria
    int gap_seeds = 5;
    std::vector<int> gap_dims{1, 4, 8};
    std::filesystem::path scratch_dir = "verify_out";

    static VerificationConfig from_json(const nlohmann::json& j) {
        VerificationConfig c;
        c.master_seed = j.value("master_seed", c.master_seed);
        c.mc_scale = j.value("mc_scale", c.mc_scale);
        c.gap_seeds = j.value("gap_seeds", c.gap_seeds);
        if (j.contains("gap_dims")) c.gap_dims = j["gap_dims"].get<std::vector<int>>();
        return c;
    }
};

namespace verification {

// ---- shared helpers --------------------------------------------------------

struct MomentMc {
    Eigen::MatrixXd h, h_se;
    Eigen::VectorXd rhs, rhs_se;
};

inline MomentMc prompt_moments_mc(double p, int d, int n, std::int64_t count, std::uint64_t seed,
                                  int threads) {
    const int dim = d * pair_count(d);
    const int chunks = 64;
    std::vector<Eigen::MatrixXd> h(chunks, Eigen::MatrixXd::Zero(dim, dim));
    std::vector<Eigen::MatrixXd> h2(chunks, Eigen::MatrixXd::Zero(dim, dim));
    std::vector<Eigen::VectorXd> r(chunks, Eigen::VectorXd::Zero(dim));
    std::vector<Eigen::VectorXd> r2(chunks, Eigen::VectorXd::Zero(dim));
    auto prior = KernelPrior::independent_uniform();
    auto init = InitialDistribution::binary(p);
    parallel_chunks(count, chunks, threads, [&](int c, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            auto rng = RngStream::substream(seed, i);
            auto [prompt, kernel] = sample_prompt(prior, init, d, n, rng);
            Eigen::VectorXd f = prompt_features(prompt);
            Eigen::MatrixXd ff = f * f.transpose();
            Eigen::VectorXd yf = prompt.query_label * f;
            h[c] += ff;
            h2[c] += ff.cwiseProduct(ff);
            r[c] += yf;
            r2[c] += yf.cwiseProduct(yf);
        }
    });
    for (int c = 1; c < chunks; ++c) {
        h[0] += h[c];
        h2[0] += h2[c];
        r[0] += r[c];
        r2[0] += r2[c];
    }
    MomentMc out;
    const double nd = static_cast<double>(count);
    out.h = h[0] / nd;
    out.rhs = r[0] / nd;
    out.h_se = ((h2[0] / nd - out.h.cwiseProduct(out.h)) / (nd - 1.0)).cwiseMax(0.0).cwiseSqrt();
    out.rhs_se =
        ((r2[0] / nd - out.rhs.cwiseProduct(out.rhs)) / (nd - 1.0)).cwiseMax(0.0).cwiseSqrt();
    return out;
}

// dense 1-d oracle for the d = 1 projection: gauge-fix b on the half circle,
// the inner problem in A is linear
inline double projection_grid_oracle(const Eigen::Vector3d& target, int grid = 20000) {
    double best = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
        double t = M_PI * g / grid;
        Eigen::Matrix<double, 3, 2> mtx;
        mtx << std::cos(t), 0, std::sin(t), std::cos(t), 0, std::sin(t);
        Eigen::Vector2d sol = (mtx.transpose() * mtx).ldlt().solve(mtx.transpose() * target);
        best = std::min(best, (mtx * sol - target).norm());
    }
    return best;
}

// ---- criteria --------------------------------------------------------------

// 1. per-prompt identity between the forward pass and the linear model
inline Check criterion_reparam_identity(const VerificationConfig& cfg) {
    RngStream rng(splitmix64(cfg.master_seed ^ 1));
    double worst = 0.0;
    int cases = 0;
    for (int d = 1; d <= 6 && cases < 1000; ++d) {
        for (int rep = 0; rep < 167 && cases < 1000; ++rep, ++cases) {
            int n = 2 + static_cast<int>(rng.uniform() * 20);
            auto [p, k] = sample_prompt(KernelPrior::independent_uniform(),
                                        InitialDistribution::binary(0.5), d, n, rng);
            Eigen::VectorXd b(d + 1);
            Eigen::MatrixXd a(d + 1, d);
            for (int i = 0; i <= d; ++i) b[i] = rng.uniform(-1, 1);
            for (int i = 0; i <= d; ++i)
                for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1, 1);
            LsaModel m;
            m.d = d;
            m.n = n;
            m.layers.push_back(LayerParams::sparse(b, a));
            double lhs = predict(m, p);
            double rhs = prompt_features(p).dot(reparam_map(b, a).x);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    std::ostringstream det;
    det << "max |predict - <features, phi>| = " << worst << " over " << cases << " cases";
    return {"1 reparam identity (<= 1e-12)", worst <= 1e-12, det.str()};
}

// 2. Theorem-1 H and rhs vs prompt-level Monte Carlo at 4 standard errors
inline Check criterion_theorem1_moments(const VerificationConfig& cfg) {
    bool pass = true;
    std::ostringstream det;
    int config_idx = 0;
    for (auto [p, n] : std::vector<std::pair<double, int>>{{0.3, 10}, {0.5, 2}}) {
        auto sys = len2_iid_system(p, n);
        auto mc = prompt_moments_mc(p, 1, n, cfg.mc_scale,
                                    splitmix64(cfg.master_seed ^ (2 + config_idx)), cfg.threads);
        double worst_z = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j)
                worst_z = std::max(worst_z,
                                   std::abs(sys.h(i, j) - mc.h(i, j)) / std::max(mc.h_se(i, j), 1e-300));
            worst_z = std::max(worst_z, std::abs(sys.rhs[i] - mc.rhs[i]) / std::max(mc.rhs_se[i], 1e-300));
        }
        pass = pass && worst_z <= 4.0;
        det << "(p=" << p << ",n=" << n << "): max z = " << worst_z << "; ";
        ++config_idx;
    }
    return {"2 Theorem-1 moments vs prompt MC (4 sigma, 1e6 prompts)", pass, det.str()};
}

// 3. closed form vs the empirical least-squares oracle at the stated scale
inline Check criterion_closed_form_vs_empirical(const VerificationConfig& cfg) {
    auto xstar = len2_iid_minimizer(0.3, 10);
    auto prompts = sample_prompt_batch(KernelPrior::independent_uniform(),
                                       iid_initials(InitialDistribution::binary(0.3)), 1, 10,
                                       100000, splitmix64(cfg.master_seed ^ 3));
    auto ls = lstsq_oracle(prompts);
    double worst_rel = 0.0;
    for (int i = 0; i < 3; ++i)
        worst_rel = std::max(worst_rel, std::abs(ls.x.x[i] - xstar.x[i]) / std::abs(xstar.x[i]));
    bool pass = worst_rel <= 0.02;
    std::ostringstream det;
    det << "per-entry rel dev at 1e5 prompts = (";
    for (int i = 0; i < 3; ++i)
        det << std::abs(ls.x.x[i] - xstar.x[i]) / std::abs(xstar.x[i]) << (i < 2 ? ", " : ")");
    // supplementary context: the same comparison at 100x the prompts
    auto big = sample_prompt_batch(KernelPrior::independent_uniform(),
                                   iid_initials(InitialDistribution::binary(0.3)), 1, 10, 10000000,
                                   splitmix64(cfg.master_seed ^ 0x33));
    auto ls_big = lstsq_oracle(big);
    double worst_big = 0.0;
    for (int i = 0; i < 3; ++i)
        worst_big = std::max(worst_big, std::abs(ls_big.x.x[i] - xstar.x[i]) / std::abs(xstar.x[i]));
    det << "; at 1e7 prompts max rel dev = " << worst_big
        << " (first-entry sampling noise at 1e5 is ~10x the 2% tolerance; see ledger)";
    return {"3 closed form vs lstsq oracle (2% per entry, 1e5 prompts)", pass, det.str()};
}

// 4. recovery correctness across the (p, n) grid plus the infeasible branch
inline Check criterion_recovery(const VerificationConfig& cfg) {
    bool pass = true;
    std::ostringstream det;
    int recovered = 0, no_preimage = 0;
    for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})
        for (int n : {1, 10, 100}) {
            auto x = len2_iid_minimizer(p, n);
            double disc = x.x[1] * x.x[1] - 4.0 * x.x[0] * x.x[2];
            auto rec = recover_params_len2(x);
            if (disc >= 0.0) {
                if (!rec ||
                    (reparam_map(rec->b, rec->A).x - x.x).cwiseAbs().maxCoeff() > 1e-10) {
                    pass = false;
                    det << "recovery failed at p=" << p << " n=" << n << "; ";
                } else {
                    ++recovered;
                }
            } else {
                if (rec) {
                    pass = false;
                    det << "expected NoRealPreimage at p=" << p << " n=" << n << "; ";
                } else {
                    ++no_preimage;
                }
            }
        }
    // negative-discriminant inputs: NoRealPreimage and psi within 1e-3 of the
    // dense grid-search optimum
    RngStream rng(splitmix64(cfg.master_seed ^ 4));
    int checked_infeasible = 0;
    double worst_gap = 0.0;
    while (checked_infeasible < 10) {
        Eigen::Vector3d t(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (t[1] * t[1] - 4.0 * t[0] * t[2] >= -1e-3) continue;
        ReparamVector x;
        x.d = 1;
        x.x = t;
        if (recover_params_len2(x)) {
            pass = false;
            det << "spurious preimage; ";
        }
        auto proj = project_to_params(x, 32, 1000, splitmix64(cfg.master_seed ^ (40 + checked_infeasible)));
        double oracle = projection_grid_oracle(t);
        worst_gap = std::max(worst_gap, std::abs(proj.residual - oracle));
        ++checked_infeasible;
    }
    if (worst_gap > 1e-3) {
        pass = false;
        det << "psi-vs-grid gap " << worst_gap << "; ";
    }
    det << recovered << " grid points recovered exactly, " << no_preimage
        << " had no real preimage, " << checked_infeasible
        << " infeasible targets projected (max |psi residual - grid| = " << worst_gap << ")";
    return {"4 recovery correctness (1e-10 / psi within 1e-3 of grid)", pass, det.str()};
}

// 5. forward-pass equivalence over 500 random restricted models
inline Check criterion_forward_equivalence(const VerificationConfig& cfg) {
    RngStream rng(splitmix64(cfg.master_seed ^ 5));
    double worst_gap = 0.0, worst_additivity = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
        int d = 1 + static_cast<int>(rng.uniform() * 5);
        int L = 1 + static_cast<int>(rng.uniform() * 10);
        int n = 2 + static_cast<int>(rng.uniform() * 99);
        LsaModel m;
        m.d = d;
        m.n = n;
        for (int l = 0; l < L; ++l) {
            Eigen::VectorXd b(d + 1), a(d);
            Eigen::MatrixXd abar(d, d);
            for (int i = 0; i <= d; ++i) b[i] = rng.uniform(-0.3, 0.3);
            for (int i = 0; i < d; ++i) a[i] = rng.uniform(-0.3, 0.3);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) abar(i, j) = rng.uniform(-0.3, 0.3);
            m.layers.push_back(LayerParams::restricted(b, abar, a));
        }
        auto [p, kern] = sample_prompt(KernelPrior::independent_uniform(),
                                       InitialDistribution::binary(0.5), d, n, rng);
        worst_gap = std::max(worst_gap, forward_equivalence_gap(m, p));
        // Claim-1 additivity
        double y = rng.uniform(-2, 2);
        Eigen::MatrixXd z0 = p.z0, z1 = p.z0;
        z1(d, n) = y;
        for (const auto& layer : m.layers) {
            z0 = forward_layer(z0, layer);
            z1 = forward_layer(z1, layer);
        }
        worst_additivity = std::max(worst_additivity, std::abs((z1(d, n) - z0(d, n)) - y));
    }
    std::ostringstream det;
    det << "max equivalence gap = " << worst_gap << ", max additivity dev = " << worst_additivity;
    return {"5 Theorem-4 equivalence (gap <= 1e-9, additivity <= 1e-12)",
            worst_gap <= 1e-9 && worst_additivity <= 1e-12, det.str()};
}

// 6. analytic gradients and Jacobians against central finite differences
inline Check criterion_gradients(const VerificationConfig& cfg) {
    RngStream rng(splitmix64(cfg.master_seed ^ 6));
    double worst = 0.0;
    const double h = 1e-5;
    for (int rep = 0; rep < 100; ++rep) {
        int d = 1 + static_cast<int>(rng.uniform() * 5);
        int L = 1 + static_cast<int>(rng.uniform() * 5);
        ParamForm form = static_cast<ParamForm>(static_cast<int>(rng.uniform() * 3));
        LsaModel m = init_model(d, 4, L, form, 0.3, rng.next_u64());
        std::vector<Prompt> prompts;
        for (int i = 0; i < 3; ++i)
            prompts.push_back(sample_prompt(KernelPrior::independent_uniform(),
                                            InitialDistribution::binary(0.5), d, 4, rng)
                                  .first);
        std::vector<LayerGrad> grads;
        gradients(m, prompts, grads);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            auto views = detail::param_views(m.layers[l]);
            auto blocks = detail::grad_blocks(m.layers[l], grads[l]);
            for (std::size_t k = 0; k < views.size(); ++k)
                for (int i = 0; i < views[k].size(); ++i) {
                    double keep = views[k][i];
                    views[k][i] = keep + h;
                    double up = mse_loss(m, prompts);
                    views[k][i] = keep - h;
                    double dn = mse_loss(m, prompts);
                    views[k][i] = keep;
                    double fd = (up - dn) / (2 * h);
                    double denom = std::max({std::abs(fd), std::abs(blocks[k][i]), 1e-4});
                    worst = std::max(worst, std::abs(fd - blocks[k][i]) / denom);
                }
        }
    }
    double worst_jac = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        int d = 2 + static_cast<int>(rng.uniform() * 4);
        int n = 3 + static_cast<int>(rng.uniform() * 8);
        PromptView v;
        v.x.resize(d, n);
        v.y.resize(n);
        v.xq.resize(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < n; ++j) v.x(i, j) = rng.uniform(-1, 1);
        if (rep % 2 == 0)
            for (int j = 0; j < n; j += 2) v.x(d - 1, j) = 0.0;
        for (int j = 0; j < n; ++j) v.y[j] = rng.uniform(-1, 1);
        Eigen::VectorXd w(d);
        for (int i = 0; i < d; ++i) w[i] = rng.uniform(-1, 1);
        Eigen::MatrixXd j1 = r1_jacobian(w, v), j2 = r2_jacobian(w, v);
        for (int k = 0; k < d; ++k) {
            Eigen::VectorXd wp = w, wm = w;
            wp[k] += h;
            wm[k] -= h;
            Eigen::VectorXd fd1 = (r1_objectives(wp, v) - r1_objectives(wm, v)) / (2 * h);
            Eigen::VectorXd fd2 = (r2_objectives(wp, v) - r2_objectives(wm, v)) / (2 * h);
            for (int i = 0; i <= d; ++i) {
                worst_jac = std::max(worst_jac, std::abs(fd1[i] - j1(i, k)) /
                                                    std::max({std::abs(fd1[i]), std::abs(j1(i, k)), 1e-3}));
                worst_jac = std::max(worst_jac, std::abs(fd2[i] - j2(i, k)) /
                                                    std::max({std::abs(fd2[i]), std::abs(j2(i, k)), 1e-3}));
            }
        }
    }
    std::ostringstream det;
    det << "max rel err: model grads " << worst << ", objective jacobians " << worst_jac;
    return {"6 gradients vs finite differences (rel err < 1e-5, 100 cases each)",
            worst < 1e-5 && worst_jac < 1e-5, det.str()};
}

// 7. strict-convexity evidence from the Monte Carlo Hessian
inline Check criterion_convexity(const VerificationConfig& cfg) {
    bool pass = true;
    std::ostringstream det;
    for (int d = 1; d <= 3; ++d) {
        auto est = hessian_estimate(d, 5, KernelPrior::independent_uniform(),
                                    InitialDistribution::binary(0.5), cfg.mc_scale,
                                    splitmix64(cfg.master_seed ^ (70 + d)), 100, cfg.threads);
        bool ok = est.min_eigenvalue > 5.0 * est.bootstrap_se;
        pass = pass && ok;
        det << "d=" << d << ": min eig " << est.min_eigenvalue << " vs 5*se "
            << 5.0 * est.bootstrap_se << "; ";
    }
    return {"7 convexity evidence (min eig > 5x bootstrap se, 1e6 samples)", pass, det.str()};
}

// 8. the oracle-vs-LSA gap experiment
inline Check criterion_gap_experiment(const VerificationConfig& cfg) {
    GapConfig gc;
    gc.dims = cfg.gap_dims;
    gc.seeds = cfg.gap_seeds;
    gc.master_seed = splitmix64(cfg.master_seed ^ 8);
    gc.threads = cfg.threads;
    ExperimentReport rep;
    run_gap(gc, cfg.scratch_dir / "gap", &rep);
    bool pass = rep.all_pass();
    std::ostringstream det;
    for (const auto& c : rep.checks) det << c.name << "=" << (c.pass ? "pass" : "fail") << " " << c.detail << "; ";
    return {"8 gap experiment (gap grows with d, oracle >= LSA)", pass, det.str()};
}

// 9. the layers experiment
inline Check criterion_layers_experiment(const VerificationConfig& cfg) {
    LayersConfig lc;
    lc.master_seed = splitmix64(cfg.master_seed ^ 9);
    lc.threads = cfg.threads;
    ExperimentReport rep;
    run_layers(lc, cfg.scratch_dir / "layers", &rep);
    bool pass = rep.all_pass();
    std::ostringstream det;
    for (const auto& c : rep.checks) det << c.name << "=" << (c.pass ? "pass" : "fail") << " " << c.detail << "; ";
    return {"9 layers experiment (jump >= 0.15 at |S|=3, monotone in depth)", pass, det.str()};
}

// 10. the reduction demo plus the dimension formula
inline Check criterion_reduction(const VerificationConfig& cfg) {
    ReductionDemoConfig rc;
    rc.master_seed = splitmix64(cfg.master_seed ^ 10);
    ExperimentReport rep;
    bool demo_ok = true;
    std::ostringstream det;
    try {
        auto verdict = run_reduction_demo(rc, cfg.scratch_dir / "reduce", &rep);
        det << "max deviation " << verdict.max_deviation << " over 100 samples; ";
    } catch (const std::exception& e) {
        demo_ok = false;
        det << "demo failed: " << e.what() << "; ";
    }
    // worked-example indices
    {
        SeparabilityInstance sep;
        sep.a_mat = Eigen::MatrixXd::Zero(2, 2);
        sep.b_mat = Eigen::MatrixXd::Zero(2, 2);
        auto red = reduce_separability(sep);
        std::vector<int> expected{1, 46, 47, 48, 49, 91, 92, 93, 94};
        if (red.constructed_indices() != expected || red.inst.d != 8) {
            demo_ok = false;
            det << "worked-example indices wrong; ";
        }
    }
    RngStream rng(splitmix64(cfg.master_seed ^ 0x44));
    bool dims_ok = true;
    for (int rep2 = 0; rep2 < 50; ++rep2) {
        int mp = 1 + static_cast<int>(rng.uniform() * 6);
        int kp = 1 + static_cast<int>(rng.uniform() * 6);
        int np = 1 + static_cast<int>(rng.uniform() * 6);
        int d = reduction_dimension(mp, kp, np);
        if (d < kp + 2 * np + 2 || d < 1 + std::max(mp, kp)) dims_ok = false;
    }
    det << "dimension formula checked on 50 random triples: " << (dims_ok ? "ok" : "violated");
    return {"10 reduction demo (9 matrices at documented indices, <= 1e-12)", demo_ok && dims_ok,
            det.str()};
}

// 11. the bound chain f~(X*) <= f(psi(X*)) on a shared batch
inline Check criterion_bound_chain(const VerificationConfig& cfg) {
    GeneralMinimizerSpec spec;
    spec.d = 2;
    spec.n = 10;
    spec.p = 0.3;
    spec.mc_samples = 200000;
    spec.seed = splitmix64(cfg.master_seed ^ 11);
    spec.threads = cfg.threads;
    auto est = general_minimizer(spec);
    auto proj = project_to_params(est.xstar, 32, 1000, splitmix64(cfg.master_seed ^ 0x1111));

    auto prompts = sample_prompt_batch(KernelPrior::independent_uniform(),
                                       iid_initials(InitialDistribution::binary(spec.p)), spec.d,
                                       spec.n, 100000, splitmix64(cfg.master_seed ^ 0x1112));
    LsaModel psi_model;
    psi_model.d = spec.d;
    psi_model.n = spec.n;
    psi_model.layers.push_back(proj.params);

    // paired per-prompt differences: (psi residual)^2 - (X* residual)^2
    double mean = 0.0, m2 = 0.0;
    std::int64_t cnt = 0;
    for (const auto& p : prompts) {
        double rx = linear_prediction(est.xstar, p) - p.query_label;
        double rp = predict(psi_model, p) - p.query_label;
        double diff = rp * rp - rx * rx;
        ++cnt;
        double delta = diff - mean;
        mean += delta / cnt;
        m2 += delta * (diff - mean);
    }
    double se = std::sqrt(m2 / (cnt - 1.0) / cnt);
    bool pass = mean >= -3.0 * se;
    std::ostringstream det;
    det << "mean[f(psi) - f~(X*)] per prompt = " << mean << " (se " << se
        << "), psi residual = " << proj.residual;
    return {"11 bound chain f~(X*) <= f(psi(X*)) + 3 sigma (1e5 prompts, d=2)", pass, det.str()};
}

// 12. the multi-objective trajectory of the trained deep model
inline Check criterion_moo_trajectory(const VerificationConfig& cfg) {
    MooConfig mc;
    mc.master_seed = splitmix64(cfg.master_seed ^ 12);
    mc.threads = cfg.threads;
    ExperimentReport rep;
    run_moo(mc, cfg.scratch_dir / "moo", &rep);
    bool pass = rep.all_pass();
    std::ostringstream det;
    for (const auto& c : rep.checks) det << c.name << "=" << (c.pass ? "pass" : "fail") << " " << c.detail << "; ";
    return {"12 multi-objective trajectory (GD strictly decreases to its min)", pass, det.str()};
}

}  // namespace verification

inline ExperimentReport run_verification(const VerificationConfig& cfg) {
    ExperimentReport report;
    report.experiment = "verify";
    report.seed = cfg.master_seed;
    report.config_hash = fnv1a(std::to_string(cfg.master_seed) + ":" + std::to_string(cfg.mc_scale));
    report.checks.push_back(verification::criterion_reparam_identity(cfg));
    report.checks.push_back(verification::criterion_theorem1_moments(cfg));
    report.checks.push_back(verification::criterion_closed_form_vs_empirical(cfg));
    report.checks.push_back(verification::criterion_recovery(cfg));
    report.checks.push_back(verification::criterion_forward_equivalence(cfg));
    report.checks.push_back(verification::criterion_gradients(cfg));
    report.checks.push_back(verification::criterion_convexity(cfg));
    report.checks.push_back(verification::criterion_gap_experiment(cfg));
    report.checks.push_back(verification::criterion_layers_experiment(cfg));
    report.checks.push_back(verification::criterion_reduction(cfg));
    report.checks.push_back(verification::criterion_bound_chain(cfg));
    report.checks.push_back(verification::criterion_moo_trajectory(cfg));
    return report;
}

}  // namespace mlsa
