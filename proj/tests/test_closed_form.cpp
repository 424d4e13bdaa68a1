#include <gtest/gtest.h>

#include <sstream>

#include "mlsa/closed_form.hpp"

using namespace mlsa;

namespace {

std::vector<Prompt> binary_prompt_batch(double p, int d, int n, int count, std::uint64_t seed) {
    return sample_prompt_batch(KernelPrior::independent_uniform(),
                               iid_initials(InitialDistribution::binary(p)), d, n, count, seed);
}

// Prompt-level Monte Carlo moments of the normal equations, with per-entry
// standard errors: H = E[f f^T], rhs = E[y f] for f = x_q (x) g.
struct MomentMc {
    Eigen::MatrixXd h, h_se;
    Eigen::VectorXd rhs, rhs_se;
};

MomentMc prompt_level_moments(const KernelPrior& prior, const InitialStateSampler& initials, int d,
                              int n, int count, std::uint64_t seed) {
    const int dim = d * pair_count(d);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim), h2 = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(dim), r2 = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < count; ++i) {
        auto rng = RngStream::substream(seed, i);
        auto [p, k] = sample_prompt_with_initials(prior, initials, d, n, rng);
        Eigen::VectorXd f = prompt_features(p);
        Eigen::MatrixXd ff = f * f.transpose();
        Eigen::VectorXd yf = p.query_label * f;
        h += ff;
        h2 += ff.cwiseProduct(ff);
        r += yf;
        r2 += yf.cwiseProduct(yf);
    }
    MomentMc out;
    out.h = h / count;
    out.rhs = r / count;
    out.h_se = ((h2 / count - out.h.cwiseProduct(out.h)) / (count - 1.0)).cwiseMax(0.0).cwiseSqrt();
    out.rhs_se = ((r2 / count - out.rhs.cwiseProduct(out.rhs)) / (count - 1.0)).cwiseMax(0.0).cwiseSqrt();
    return out;
}

}  // namespace

// =============================================================================
// Length-2, i.i.d. initials (3x3 closed form)
// =============================================================================

TEST(Len2IidSystem, HandCheckedEntries) {
    auto sys = len2_iid_system(0.5, 2);
    EXPECT_NEAR(sys.h(0, 0), 0.1875, 1e-15);  // 0.5 * (0.25 + 0.5 * 0.25)
    EXPECT_NEAR(sys.rhs[0], 0.125, 1e-15);    // p^2 / 2
    EXPECT_TRUE(sys.h.isApprox(sys.h.transpose(), 1e-15));
}

TEST(Len2IidSystem, RejectsBoundaryP) {
    EXPECT_THROW(len2_iid_system(0.0, 5), std::invalid_argument);
    EXPECT_THROW(len2_iid_system(1.0, 5), std::invalid_argument);
}

TEST(Len2IidSystem, MatchesPromptLevelMonteCarlo) {
    const double p = 0.3;
    const int n = 10;
    auto sys = len2_iid_system(p, n);
    auto mc = prompt_level_moments(KernelPrior::independent_uniform(),
                                   iid_initials(InitialDistribution::binary(p)), 1, n, 200000, 17);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(sys.h(i, j), mc.h(i, j), 4.0 * mc.h_se(i, j)) << "H(" << i << "," << j << ")";
        EXPECT_NEAR(sys.rhs[i], mc.rhs[i], 4.0 * mc.rhs_se[i]) << "rhs(" << i << ")";
    }
}

TEST(Len2IidMinimizer, GradientVanishesUnderMonteCarlo) {
    const double p = 0.3;
    const int n = 10, count = 200000;
    auto xstar = len2_iid_minimizer(p, n);
    Eigen::Vector3d grad = Eigen::Vector3d::Zero(), grad2 = Eigen::Vector3d::Zero();
    for (int i = 0; i < count; ++i) {
        auto rng = RngStream::substream(31, i);
        auto [prompt, k] = sample_prompt(KernelPrior::independent_uniform(),
                                         InitialDistribution::binary(p), 1, n, rng);
        Eigen::VectorXd f = prompt_features(prompt);
        Eigen::Vector3d g = 2.0 * (f.dot(xstar.x) - prompt.query_label) * f;
        grad += g;
        grad2 += g.cwiseProduct(g);
    }
    grad /= count;
    for (int i = 0; i < 3; ++i) {
        double se = std::sqrt((grad2[i] / count - grad[i] * grad[i]) / (count - 1.0));
        EXPECT_NEAR(grad[i], 0.0, 4.0 * se) << "gradient component " << i;
    }
}

TEST(Len2IidMinimizer, MatchesEmpiricalLeastSquares) {
    // The empirical minimizer at 1e5 prompts carries sampling noise of about
    // 0.02 absolute in the small first coordinate (measured across seeds), so
    // the consistency bound is stated on the scale of X*, at ~4 sigma.
    auto xstar = len2_iid_minimizer(0.3, 10);
    auto prompts = binary_prompt_batch(0.3, 1, 10, 100000, 7);
    auto ls = lstsq_oracle(prompts);
    double scale = xstar.x.cwiseAbs().maxCoeff();
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(ls.x.x[i], xstar.x[i], 0.08 * scale) << "entry " << i;
}

TEST(Len2IidMinimizer, PerturbationIncreasesMcLoss) {
    auto xstar = len2_iid_minimizer(0.3, 10);
    auto prompts = binary_prompt_batch(0.3, 1, 10, 50000, 11);
    double base = reparam_loss(xstar, prompts);
    for (int i = 0; i < 3; ++i) {
        ReparamVector bumped = xstar;
        bumped.x[i] += 0.1;
        EXPECT_GT(reparam_loss(bumped, prompts), base) << "coordinate " << i;
    }
}

TEST(Len2IidMinimizer, DenseAcrossGrid) {
    // all three entries nonzero across p and n (denser than the Gaussian
    // linear-regression optimum)
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9})
        for (int n : {1, 10, 100}) {
            auto x = len2_iid_minimizer(p, n);
            for (int i = 0; i < 3; ++i)
                EXPECT_GT(std::abs(x.x[i]), 1e-6) << "p=" << p << " n=" << n << " entry " << i;
        }
}

// =============================================================================
// Length-2, correlated initials
// =============================================================================

TEST(Len2Correlated, IidMomentsReduceToTheoremOne) {
    for (double p : {0.2, 0.5, 0.8})
        for (int n : {2, 10}) {
            auto direct = len2_iid_minimizer(p, n);
            auto via_moments = len2_correlated_minimizer(Len2Moments::iid(p, n));
            EXPECT_LT((direct.x - via_moments.x).cwiseAbs().maxCoeff(), 1e-10)
                << "p=" << p << " n=" << n;
            auto h1 = len2_iid_system(p, n).h;
            auto h2 = len2_correlated_system(Len2Moments::iid(p, n)).h;
            EXPECT_LT((h1 - h2).cwiseAbs().maxCoeff(), 1e-14);
        }
}

TEST(Len2Correlated, WorkedSquareLawMoments) {
    const double p = 0.37;
    auto m = Len2Moments::correlated_square(p, 6);
    EXPECT_NEAR(m.c1 / 6.0, p - 2 * p * p + p * p * p, 1e-15);
    double e3 = std::pow(p, 5) - 4 * std::pow(p, 4) + 6 * std::pow(p, 3) - 4 * p * p + p;
    EXPECT_NEAR(m.c2 / (6.0 * 5.0), e3, 1e-15);
}

TEST(Len2Correlated, MatchesSampledCorrelatedPrompts) {
    // the worked joint law, sampled end to end, agrees with the closed form
    const double p = 0.4;
    const int n = 8;
    auto xstar = len2_correlated_minimizer(Len2Moments::correlated_square(p, n));
    auto prompts = sample_prompt_batch(KernelPrior::independent_uniform(),
                                       correlated_square_initials(p), 1, n, 100000, 23);
    auto ls = lstsq_oracle(prompts);
    double scale = xstar.x.cwiseAbs().maxCoeff();
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(ls.x.x[i], xstar.x[i], 0.08 * scale) << "entry " << i;
}

// =============================================================================
// General-length minimizer, binary kernels
// =============================================================================

TEST(GeneralMinimizer, ExactD1EqualsTheoremOne) {
    for (double p : {0.3, 0.5}) {
        for (int n : {2, 10}) {
            GeneralMinimizerSpec spec;
            spec.d = 1;
            spec.n = n;
            spec.p = p;
            auto est = general_minimizer(spec);
            EXPECT_TRUE(est.exact);
            auto sys = len2_iid_system(p, n);
            EXPECT_LT((est.h - sys.h).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((est.rhs - sys.rhs).cwiseAbs().maxCoeff(), 1e-13);
            EXPECT_LT((est.xstar.x - len2_iid_minimizer(p, n).x).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(GeneralMinimizer, McD1WithinErrorOfExact) {
    GeneralMinimizerSpec spec;
    spec.d = 1;
    spec.n = 10;
    spec.p = 0.3;
    spec.exact_d1_quadrature = false;
    spec.mc_samples = 100000;
    spec.seed = 3;
    auto est = general_minimizer(spec);
    EXPECT_FALSE(est.exact);
    auto sys = len2_iid_system(0.3, 10);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(est.h(i, j), sys.h(i, j), 4.0 * std::max(est.h_se(i, j), 1e-12));
    EXPECT_TRUE(est.h.isApprox(est.h.transpose(), 1e-15));  // symmetrized before solve
}

TEST(GeneralMinimizer, D2MatchesPromptLevelMonteCarlo) {
    const double p = 0.3;
    const int d = 2, n = 5;
    GeneralMinimizerSpec spec;
    spec.d = d;
    spec.n = n;
    spec.p = p;
    spec.mc_samples = 200000;
    spec.seed = 4;
    auto est = general_minimizer(spec);
    auto mc = prompt_level_moments(KernelPrior::independent_uniform(),
                                   iid_initials(InitialDistribution::binary(p)), d, n, 200000, 5);
    const int dim = d * pair_count(d);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            double se = std::sqrt(std::pow(est.h_se(i, j), 2) + std::pow(mc.h_se(i, j), 2));
            EXPECT_NEAR(est.h(i, j), mc.h(i, j), 4.0 * se) << "H(" << i << "," << j << ")";
        }
        double se = std::sqrt(std::pow(est.rhs_se[i], 2) + std::pow(mc.rhs_se[i], 2));
        EXPECT_NEAR(est.rhs[i], mc.rhs[i], 4.0 * se) << "rhs(" << i << ")";
    }
}

// =============================================================================
// General-length minimizer, Dirichlet kernels
// =============================================================================

TEST(GeneralMinimizer, DirichletBinaryAlphaOneMatchesUniformPrior) {
    // Dir(1,1) rows with uniform initials are exactly the U(0,1) binary prior
    // at p = 1/2
    GeneralMinimizerSpec exact;
    exact.d = 1;
    exact.n = 6;
    exact.p = 0.5;
    auto ref = general_minimizer(exact);

    GeneralMinimizerSpec dir;
    dir.d = 1;
    dir.n = 6;
    dir.prior = KernelPrior::dirichlet_rows(1.0, 2);
    dir.mc_samples = 200000;
    dir.seed = 9;
    auto est = general_minimizer(dir);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(est.h(i, j), ref.h(i, j), 4.0 * std::max(est.h_se(i, j), 1e-12));
}

TEST(GeneralMinimizer, DirichletMatchesPromptLevelMonteCarlo) {
    const int d = 2, n = 5, S = 3;
    GeneralMinimizerSpec spec;
    spec.d = d;
    spec.n = n;
    spec.prior = KernelPrior::dirichlet_rows(1.0, S);
    spec.mc_samples = 100000;
    spec.seed = 12;
    auto est = general_minimizer(spec);
    auto mc = prompt_level_moments(spec.prior, iid_initials(InitialDistribution::uniform(S)), d, n,
                                   200000, 13);
    const int dim = d * pair_count(d);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double se = std::sqrt(std::pow(est.h_se(i, j), 2) + std::pow(mc.h_se(i, j), 2));
            EXPECT_NEAR(est.h(i, j), mc.h(i, j), 4.0 * se) << "H(" << i << "," << j << ")";
        }
}

TEST(GeneralMinimizer, PointMassIdentityKernelReducesToInitialMoments) {
    // identity kernel keeps chains constant, so every chain moment is a pure
    // initial-distribution moment: for |S|=3 uniform, E[s^2] = 5/3, E[s^4] = 17/3
    const int S = 3, d = 1, n = 4;
    GeneralMinimizerSpec spec;
    spec.d = d;
    spec.n = n;
    spec.prior = KernelPrior::fixed(TransitionKernel::identity(S));
    auto est = general_minimizer(spec);
    EXPECT_TRUE(est.exact);
    const double e2 = 5.0 / 3.0, e4 = 17.0 / 3.0;
    const double gg = e4 / n + (n - 1.0) / n * e2 * e2;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(est.h(i, j), e2 * gg, 1e-12);
        EXPECT_NEAR(est.rhs[i], e2 * e2, 1e-12);
    }
}

TEST(GeneralMinimizer, DirichletXstarLocallyOptimal) {
    // X* beats 100 random perturbations of norm 0.05 on a shared MC batch
    const int d = 2, n = 5, S = 3;
    GeneralMinimizerSpec spec;
    spec.d = d;
    spec.n = n;
    spec.prior = KernelPrior::dirichlet_rows(1.0, S);
    spec.mc_samples = 200000;
    spec.seed = 14;
    auto est = general_minimizer(spec);
    auto prompts = sample_prompt_batch(spec.prior, iid_initials(InitialDistribution::uniform(S)), d,
                                       n, 100000, 15);
    double base = reparam_loss(est.xstar, prompts);
    RngStream rng(16);
    int losses_higher = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd delta(est.xstar.x.size());
        for (int i = 0; i < delta.size(); ++i) delta[i] = rng.normal();
        delta *= 0.05 / delta.norm();
        ReparamVector bumped = est.xstar;
        bumped.x += delta;
        if (reparam_loss(bumped, prompts) > base) ++losses_higher;
    }
    EXPECT_EQ(losses_higher, 100);
}

// =============================================================================
// Parameter recovery, d = 1
// =============================================================================

TEST(RecoverParams, HandWorkedRoots) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(1, 3, 2);  // roots of t^2 - 3t + 2: t in {1, 2}
    auto rec = recover_params_len2(x);
    ASSERT_TRUE(rec.has_value());
    EXPECT_LT((reparam_map(rec->b, rec->A).x - x.x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_DOUBLE_EQ(rec->b[0], 1.0);
    EXPECT_TRUE(rec->b[1] == 1.0 || rec->b[1] == 2.0);

    x.x = Eigen::Vector3d(2, 3, 1);  // roots of 2t^2 - 3t + 1: t in {1, 1/2}
    rec = recover_params_len2(x);
    ASSERT_TRUE(rec.has_value());
    EXPECT_LT((reparam_map(rec->b, rec->A).x - x.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RecoverParams, NegativeDiscriminantHasNoPreimage) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(1, 0, 1);  // discriminant -4
    EXPECT_FALSE(recover_params_len2(x).has_value());
}

TEST(RecoverParams, DegenerateX1Branch) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(0, 0.7, -0.3);
    auto rec = recover_params_len2(x);
    ASSERT_TRUE(rec.has_value());
    EXPECT_DOUBLE_EQ(rec->b[0], 0.0);
    EXPECT_LT((reparam_map(rec->b, rec->A).x - x.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RecoverParams, TheoremOneGridRecoversExactly) {
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9})
        for (int n : {1, 10, 100}) {
            auto x = len2_iid_minimizer(p, n);
            double disc = x.x[1] * x.x[1] - 4.0 * x.x[0] * x.x[2];
            auto rec = recover_params_len2(x);
            if (disc >= 0.0) {
                ASSERT_TRUE(rec.has_value()) << "p=" << p << " n=" << n;
                EXPECT_LT((reparam_map(rec->b, rec->A).x - x.x).cwiseAbs().maxCoeff(), 1e-10);
            } else {
                EXPECT_FALSE(rec.has_value());
                auto proj = project_to_params(x, 16, 100, 77);
                EXPECT_GT(proj.residual, 0.0);
            }
        }
}

// =============================================================================
// Projection psi
// =============================================================================

TEST(ProjectToParams, FeasibleTargetsReachZeroResidual) {
    RngStream rng(18);
    for (int d = 1; d <= 4; ++d) {
        Eigen::VectorXd b(d + 1);
        Eigen::MatrixXd a(d + 1, d);
        for (int i = 0; i <= d; ++i) b[i] = rng.uniform(-1, 1);
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1, 1);
        auto proj = project_to_params(reparam_map(b, a), 32, 1000, 19);
        EXPECT_LE(proj.residual, 1e-8) << "d=" << d;
    }
}

TEST(ProjectToParams, InfeasibleTargetMatchesGridSearch) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(1, 0, 1);
    auto proj = project_to_params(x, 32, 300, 20);
    // oracle: gauge-fix b on the unit circle, inner problem is linear
    double best = std::numeric_limits<double>::infinity();
    for (int g = 0; g < 20000; ++g) {
        double t = M_PI * g / 20000;
        Eigen::Matrix<double, 3, 2> mtx;
        mtx << std::cos(t), 0, std::sin(t), std::cos(t), 0, std::sin(t);
        Eigen::Vector3d rhs(1, 0, 1);
        Eigen::Vector2d sol = (mtx.transpose() * mtx).ldlt().solve(mtx.transpose() * rhs);
        best = std::min(best, (mtx * sol - rhs).norm());
    }
    EXPECT_NEAR(proj.residual, best, 1e-3);
}

TEST(ProjectToParams, PreimageExistenceMatchesDiscriminantSign) {
    RngStream rng(21);
    int feasible_checked = 0, infeasible_checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        ReparamVector x;
        x.d = 1;
        x.x = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        double disc = x.x[1] * x.x[1] - 4.0 * x.x[0] * x.x[2];
        if (std::abs(disc) < 1e-3) continue;  // skip near-boundary targets
        auto proj = project_to_params(x, 8, 1000, 1000 + rep);
        if (disc > 0) {
            EXPECT_LE(proj.residual, 1e-8) << "feasible target " << x.x.transpose();
            ++feasible_checked;
        } else {
            EXPECT_GT(proj.residual, 1e-6) << "infeasible target " << x.x.transpose();
            ++infeasible_checked;
        }
    }
    EXPECT_GT(feasible_checked, 20);
    EXPECT_GT(infeasible_checked, 20);
}

TEST(ProjectToParams, ResidualScalesQuadratically) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(1, 0, 1);
    auto base = project_to_params(x, 32, 300, 22);
    for (double c : {2.0, 0.5}) {
        ReparamVector scaled = x;
        scaled.x *= c * c;
        auto proj = project_to_params(scaled, 32, 300, 22);
        EXPECT_NEAR(proj.residual, c * c * base.residual, 1e-6 * std::max(1.0, c * c));
    }
}

// =============================================================================
// System CSV dump
// =============================================================================

TEST(SystemCsv, ContainsHeaderAndEntries) {
    GeneralMinimizerSpec spec;
    spec.d = 1;
    spec.n = 4;
    spec.p = 0.5;
    auto est = general_minimizer(spec);
    std::stringstream ss;
    write_system_csv(ss, est);
    std::string s = ss.str();
    EXPECT_NE(s.find("kind,i,j,ip,jp,kp,lp,value,se"), std::string::npos);
    EXPECT_NE(s.find("\nh,"), std::string::npos);
    EXPECT_NE(s.find("xstar,"), std::string::npos);
}
