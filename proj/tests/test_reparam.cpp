#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mlsa/reparam.hpp"

using namespace mlsa;

// =============================================================================
// Pair indexing
// =============================================================================

TEST(PairIndex, D1Enumeration) {
    EXPECT_EQ(pair_index(1, 1, 1), 1);
    EXPECT_EQ(pair_index(1, 2, 1), 2);
    EXPECT_EQ(pair_index(2, 2, 1), 3);
}

TEST(PairIndex, D2SpotCheck) {
    // (1,1),(1,2),(1,3),(2,2),(2,3),(3,3)
    EXPECT_EQ(pair_index(2, 3, 2), 5);
    EXPECT_EQ(pair_index(3, 3, 2), 6);
}

TEST(PairIndex, BijectiveUpToD10) {
    for (int d = 1; d <= 10; ++d) {
        std::set<int> seen;
        for (int i = 1; i <= d + 1; ++i)
            for (int k = i; k <= d + 1; ++k) {
                int r = pair_index(i, k, d);
                EXPECT_GE(r, 1);
                EXPECT_LE(r, pair_count(d));
                EXPECT_TRUE(seen.insert(r).second) << "duplicate rank at (" << i << "," << k << ")";
                auto [ii, kk] = pair_from_index(r, d);
                EXPECT_EQ(ii, i);
                EXPECT_EQ(kk, k);
            }
        EXPECT_EQ(static_cast<int>(seen.size()), pair_count(d));
    }
}

TEST(PairIndex, RejectsLowerTriangle) {
    EXPECT_THROW(pair_index(2, 1, 1), std::invalid_argument);
}

// =============================================================================
// The map phi
// =============================================================================

TEST(ReparamMap, D1Basis) {
    Eigen::VectorXd b(2);
    b << 1, 0;
    Eigen::MatrixXd A(2, 1);
    A << 1, 0;
    auto x = reparam_map(b, A);
    EXPECT_TRUE(x.x.isApprox(Eigen::Vector3d(1, 0, 0), 0.0));
}

TEST(ReparamMap, D1CrossTerm) {
    // b=(2,3), A=(5,7): X = (10, 2*7 + 3*5, 21) = (10, 29, 21)
    Eigen::VectorXd b(2);
    b << 2, 3;
    Eigen::MatrixXd A(2, 1);
    A << 5, 7;
    auto x = reparam_map(b, A);
    EXPECT_TRUE(x.x.isApprox(Eigen::Vector3d(10, 29, 21), 1e-15));
}

TEST(ReparamMap, InnerProductEqualsBilinearForm) {
    // <x_q (x) g, phi(b,A)> == b^T G (sum_j A_{:,j} x_{q,j}) on random prompts
    RngStream rng(17);
    const int d = 3;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd b(d + 1);
        Eigen::MatrixXd A(d + 1, d);
        for (int i = 0; i <= d; ++i) b[i] = rng.uniform(-1, 1);
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j < d; ++j) A(i, j) = rng.uniform(-1, 1);
        auto [p, k] = sample_prompt(KernelPrior::independent_uniform(),
                                    InitialDistribution::binary(0.5), d, 7, rng);
        auto gs = gram_stats(p);
        Eigen::VectorXd xq = p.z0.col(p.n).head(d);
        double direct = b.dot(gs.g_matrix * (A * xq));
        double via_phi = prompt_features(p).dot(reparam_map(b, A).x);
        EXPECT_NEAR(via_phi, direct, 1e-12);
    }
}

TEST(ReparamMap, TwoHomogeneousGaugeInvariance) {
    RngStream rng(18);
    const int d = 2;
    Eigen::VectorXd b(d + 1);
    Eigen::MatrixXd A(d + 1, d);
    for (int i = 0; i <= d; ++i) b[i] = rng.uniform(-1, 1);
    for (int i = 0; i <= d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = rng.uniform(-1, 1);
    auto base = reparam_map(b, A);
    for (double c : {2.0, -0.5, 10.0}) {
        auto scaled = reparam_map(c * b, A / c);
        EXPECT_TRUE(scaled.x.isApprox(base.x, 1e-13));
    }
}

// =============================================================================
// Features and the reparameterized loss
// =============================================================================

TEST(Features, ZeroQueryGivesZeroFeatures) {
    Prompt p;
    p.d = 2;
    p.n = 2;
    p.z0.setZero(3, 3);
    p.z0(0, 0) = 1.0;  // nonzero in-context entry, zero query input
    EXPECT_DOUBLE_EQ(prompt_features(p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Features, D1UnitQueryCopiesGram) {
    Prompt p;
    p.d = 1;
    p.n = 2;
    p.z0.setZero(2, 3);
    p.z0 << 1, 0, 1,
            1, 1, 0;
    auto f = prompt_features(p);
    auto g = gram_stats(p).g_vector;
    EXPECT_TRUE(f.isApprox(g, 0.0));  // x_q = 1l
}

TEST(ReparamLoss, ZeroModelZeroLabels) {
    Prompt p;
    p.d = 1;
    p.n = 2;
    p.z0.setZero(2, 3);
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::VectorXd::Zero(3);
    EXPECT_DOUBLE_EQ(reparam_loss(x, {p}), 0.0);
}

TEST(ReparamLoss, PerturbationIncreasesLeastSquaresLoss) {
    RngStream rng(19);
    std::vector<Prompt> prompts;
    for (int i = 0; i < 400; ++i)
        prompts.push_back(sample_prompt(KernelPrior::independent_uniform(),
                                        InitialDistribution::binary(0.5), 1, 8, rng)
                              .first);
    auto sol = lstsq_oracle(prompts);
    double base = reparam_loss(sol.x, prompts);
    for (int i = 0; i < 3; ++i) {
        ReparamVector bumped = sol.x;
        bumped.x[i] += 0.1;
        EXPECT_GT(reparam_loss(bumped, prompts), base);
    }
}

// =============================================================================
// Least-squares oracle
// =============================================================================

TEST(LstsqOracle, RecoversNoiselessTarget) {
    RngStream rng(20);
    ReparamVector x0;
    x0.d = 2;
    x0.x.resize(2 * pair_count(2));
    for (int i = 0; i < x0.x.size(); ++i) x0.x[i] = rng.uniform(-1, 1);
    std::vector<Prompt> prompts;
    for (int i = 0; i < 500; ++i) {
        auto p = sample_prompt(KernelPrior::independent_uniform(),
                               InitialDistribution::binary(0.5), 2, 6, rng)
                     .first;
        p.query_label = prompt_features(p).dot(x0.x);  // exact linear labels
        prompts.push_back(p);
    }
    auto sol = lstsq_oracle(prompts);
    EXPECT_FALSE(sol.ridge_used);
    EXPECT_LT((sol.x.x - x0.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LstsqOracle, DuplicatedBatchGivesIdenticalSolution) {
    RngStream rng(24);
    std::vector<Prompt> prompts;
    for (int i = 0; i < 200; ++i)
        prompts.push_back(sample_prompt(KernelPrior::independent_uniform(),
                                        InitialDistribution::binary(0.4), 1, 5, rng)
                              .first);
    auto sol1 = lstsq_oracle(prompts);
    std::vector<Prompt> doubled = prompts;
    doubled.insert(doubled.end(), prompts.begin(), prompts.end());
    auto sol2 = lstsq_oracle(doubled);
    EXPECT_LT((sol1.x.x - sol2.x.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LstsqOracle, FlagsRankDeficiency) {
    // all-identical degenerate prompts span a rank-1 feature space
    Prompt p;
    p.d = 1;
    p.n = 2;
    p.z0.setOnes(2, 3);
    p.z0(1, 2) = 0.0;
    p.query_label = 1.0;
    std::vector<Prompt> prompts(10, p);
    auto sol = lstsq_oracle(prompts);
    EXPECT_TRUE(sol.ridge_used);
}

// =============================================================================
// Hessian estimate
// =============================================================================

TEST(HessianEstimate, DegenerateAllOnesIsRankOne) {
    // p = 1 initials with an absorbing kernel: every feature is (1,...,1)
    auto prior = KernelPrior::fixed(TransitionKernel::binary(1.0, 0.0));  // p01=1, p11=1
    auto est = hessian_estimate(1, 4, prior, InitialDistribution::binary(1.0), 2000, 5, 10, 1, 50);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.h);
    EXPECT_NEAR(est.min_eigenvalue, 0.0, 1e-12);
    int nonzero = 0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i)
        if (eig.eigenvalues()[i] > 1e-10) ++nonzero;
    EXPECT_EQ(nonzero, 1);
}

TEST(HessianEstimate, PositiveDefiniteWithMargin) {
    auto est = hessian_estimate(1, 5, KernelPrior::independent_uniform(),
                                InitialDistribution::binary(0.5), 200000, 6, 100, 2);
    EXPECT_GT(est.min_eigenvalue, 5.0 * est.bootstrap_se);
    EXPECT_LT((est.h - est.h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HessianEstimate, ThreadCountDoesNotChangeResult) {
    auto a = hessian_estimate(1, 4, KernelPrior::independent_uniform(),
                              InitialDistribution::binary(0.5), 10000, 9, 20, 1, 10);
    auto b = hessian_estimate(1, 4, KernelPrior::independent_uniform(),
                              InitialDistribution::binary(0.5), 10000, 9, 20, 4, 10);
    EXPECT_TRUE(a.h.isApprox(b.h, 0.0));
}

// =============================================================================
// Serialization
// =============================================================================

TEST(ReparamCsv, EmitsIndexedQuadruples) {
    ReparamVector x;
    x.d = 1;
    x.x = Eigen::Vector3d(1.5, -2.0, 0.25);
    std::stringstream ss;
    write_reparam_csv(ss, x);
    EXPECT_EQ(ss.str(), "j,i,k,value\n1,1,1,1.5\n1,1,2,-2\n1,2,2,0.25\n");
}
