#pragma once

// Bilinear feasibility machinery: the constraint system b^T D^(r) A_{:,j} = X_r,
// an alternating-least-squares heuristic (each half-problem is linear), and
// the constructive reduction from bilinear separability. Exact solution of
// the system is NP-hard in d, so ALS promises best effort only.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsa/reparam.hpp"
#include "mlsa/rng.hpp"

namespace mlsa {

// One structure matrix D^(r), stored sparsely as (row, col, value), 1-based.
struct StructureMatrix {
    std::vector<std::tuple<int, int, double>> entries;
};

struct BilinearInstance {
    int d = 0;
    int m = 0;                                  // pair_count(d)
    std::map<int, StructureMatrix> structure;   // r -> D^(r); only constructed r's
    Eigen::VectorXd target;                     // X, length d*m
    std::map<int, double> fixed_b;              // 1-based index -> pinned value
    std::map<std::pair<int, int>, double> fixed_a;  // (row, col) 1-based -> pinned value
    std::vector<int> split_b;                   // metadata: entries split into z+ - z-
    std::vector<int> split_a_col1;

    int block_of(int r) const { return (r - 1) / m + 1; }  // 1-based column of A

    double evaluate(int r, const Eigen::VectorXd& b, const Eigen::MatrixXd& a) const {
        const int j = block_of(r);
        double s = 0.0;
        for (const auto& [row, col, v] : structure.at(r).entries)
            s += v * b[row - 1] * a(col - 1, j - 1);
        return s;
    }

    void check_fixed(const Eigen::VectorXd& b, const Eigen::MatrixXd& a) const {
        for (const auto& [i, v] : fixed_b)
            if (b[i - 1] != v) throw std::invalid_argument("BilinearInstance: fixed b entry violated");
        for (const auto& [rc, v] : fixed_a)
            if (a(rc.first - 1, rc.second - 1) != v)
                throw std::invalid_argument("BilinearInstance: fixed A entry violated");
    }
};

// The structure matrices that reproduce phi exactly: for pair (i, k) in
// block j, D has a 1 at (i, k) and, when i != k, at (k, i).
inline BilinearInstance reparam_structure(int d) {
    if (d < 1) throw std::invalid_argument("reparam_structure: d >= 1");
    BilinearInstance inst;
    inst.d = d;
    inst.m = pair_count(d);
    inst.target = Eigen::VectorXd::Zero(d * inst.m);
    for (int j = 1; j <= d; ++j)
        for (int i = 1; i <= d + 1; ++i)
            for (int k = i; k <= d + 1; ++k) {
                int r = (j - 1) * inst.m + pair_index(i, k, d);
                StructureMatrix s;
                s.entries.emplace_back(i, k, 1.0);
                if (i != k) s.entries.emplace_back(k, i, 1.0);
                inst.structure[r] = std::move(s);
            }
    return inst;
}

// Per-constraint residuals b^T D^(r) A_{:,j(r)} - X_r over constructed r's,
// in increasing r order.
inline Eigen::VectorXd constraint_residuals(const BilinearInstance& inst, const Eigen::VectorXd& b,
                                            const Eigen::MatrixXd& a) {
    inst.check_fixed(b, a);
    Eigen::VectorXd out(inst.structure.size());
    int at = 0;
    for (const auto& [r, s] : inst.structure) out[at++] = inst.evaluate(r, b, a) - inst.target[r - 1];
    return out;
}

struct AlsResult {
    Eigen::VectorXd b;
    Eigen::MatrixXd a;
    double residual_norm = 0.0;
    std::vector<double> per_iteration;  // residual norms of the winning run
    int restarts_used = 0;
};

namespace detail {

inline double bilinear_residual_norm(const BilinearInstance& inst, const Eigen::VectorXd& b,
                                     const Eigen::MatrixXd& a) {
    double s = 0.0;
    for (const auto& [r, st] : inst.structure) {
        double v = inst.evaluate(r, b, a) - inst.target[r - 1];
        s += v * v;
    }
    return std::sqrt(s);
}

}  // namespace detail

// Alternating least squares on (b, A): with b fixed, each column of A solves
// a linear system and vice versa, so the residual is nonincreasing within a
// run. Fixed entries are held at their pins; ridge 1e-12 keeps the normal
// equations rank-safe.
inline AlsResult als_solve(const BilinearInstance& inst, int restarts = 32, int iters = 1000,
                           std::uint64_t seed = 0) {
    if (restarts < 1) throw std::invalid_argument("als_solve: restarts >= 1");
    const int dp1 = inst.d + 1;
    const double ridge = 1e-12;

    // constraints grouped per block
    std::vector<std::vector<int>> by_block(inst.d + 1);
    for (const auto& [r, s] : inst.structure) by_block[inst.block_of(r)].push_back(r);

    AlsResult best;
    best.residual_norm = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < restarts; ++restart) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(restart));
        Eigen::VectorXd b(dp1);
        Eigen::MatrixXd a(dp1, inst.d);
        for (int i = 0; i < dp1; ++i) b[i] = rng.normal();
        for (int i = 0; i < dp1; ++i)
            for (int j = 0; j < inst.d; ++j) a(i, j) = rng.normal();
        for (const auto& [i, v] : inst.fixed_b) b[i - 1] = v;
        for (const auto& [rc, v] : inst.fixed_a) a(rc.first - 1, rc.second - 1) = v;

        // phi is invariant under (b, A) -> (cb, A/c); rebalancing the gauge
        // keeps both half-problems well conditioned. Pins break the freedom.
        const bool can_rebalance = inst.fixed_b.empty() && inst.fixed_a.empty();
        std::vector<double> run;
        run.push_back(detail::bilinear_residual_norm(inst, b, a));
        for (int it = 0; it < iters; ++it) {
            if (can_rebalance) {
                double nb = b.norm(), na = a.norm();
                if (nb > 0.0 && na > 0.0) {
                    double c = std::sqrt(na / nb);
                    b *= c;
                    a /= c;
                }
            }
            // A-step, per block
            for (int j = 1; j <= inst.d; ++j) {
                if (by_block[j].empty()) continue;
                std::vector<int> free_rows;
                for (int k = 1; k <= dp1; ++k)
                    if (!inst.fixed_a.count({k, j})) free_rows.push_back(k);
                if (free_rows.empty()) continue;
                const int nf = static_cast<int>(free_rows.size());
                Eigen::MatrixXd mtx(by_block[j].size(), nf);
                Eigen::VectorXd rhs(by_block[j].size());
                for (std::size_t ri = 0; ri < by_block[j].size(); ++ri) {
                    int r = by_block[j][ri];
                    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(dp1);
                    for (const auto& [row, col, v] : inst.structure.at(r).entries)
                        coeff[col - 1] += v * b[row - 1];
                    double moved = inst.target[r - 1];
                    for (const auto& [rc, v] : inst.fixed_a)
                        if (rc.second == j) moved -= coeff[rc.first - 1] * v;
                    for (int k = 0; k < nf; ++k) mtx(ri, k) = coeff[free_rows[k] - 1];
                    rhs[ri] = moved;
                }
                Eigen::MatrixXd gram = mtx.transpose() * mtx;
                gram.diagonal().array() += ridge;
                Eigen::VectorXd sol = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(mtx.transpose() * rhs);
                for (int k = 0; k < nf; ++k) a(free_rows[k] - 1, j - 1) = sol[k];
            }
            // b-step, all constraints at once
            {
                std::vector<int> free_idx;
                for (int k = 1; k <= dp1; ++k)
                    if (!inst.fixed_b.count(k)) free_idx.push_back(k);
                if (!free_idx.empty()) {
                    const int nf = static_cast<int>(free_idx.size());
                    Eigen::MatrixXd mtx(inst.structure.size(), nf);
                    Eigen::VectorXd rhs(inst.structure.size());
                    int ri = 0;
                    for (const auto& [r, st] : inst.structure) {
                        const int j = inst.block_of(r);
                        Eigen::VectorXd coeff = Eigen::VectorXd::Zero(dp1);
                        for (const auto& [row, col, v] : st.entries)
                            coeff[row - 1] += v * a(col - 1, j - 1);
                        double moved = inst.target[r - 1];
                        for (const auto& [i, v] : inst.fixed_b) moved -= coeff[i - 1] * v;
                        for (int k = 0; k < nf; ++k) mtx(ri, k) = coeff[free_idx[k] - 1];
                        rhs[ri] = moved;
                        ++ri;
                    }
                    Eigen::MatrixXd gram = mtx.transpose() * mtx;
                    gram.diagonal().array() += ridge;
                    Eigen::VectorXd sol =
                        Eigen::LDLT<Eigen::MatrixXd>(gram).solve(mtx.transpose() * rhs);
                    for (int k = 0; k < nf; ++k) b[free_idx[k] - 1] = sol[k];
                }
            }
            run.push_back(detail::bilinear_residual_norm(inst, b, a));
            if (run[run.size() - 2] - run.back() < 1e-14 * (1.0 + run.back())) break;
        }
        double score = run.back();
        double norm = b.squaredNorm() + a.squaredNorm();
        double best_norm = best.b.size() ? best.b.squaredNorm() + best.a.squaredNorm() : 0.0;
        bool better = score < best.residual_norm - 1e-15 ||
                      (std::abs(score - best.residual_norm) <= 1e-15 && norm < best_norm);
        if (better) {
            best.b = b;
            best.a = a;
            best.residual_norm = score;
            best.per_iteration = run;
        }
    }
    best.restarts_used = restarts;
    return best;
}

// ---------------------------------------------------------------------------
// Reduction from bilinear separability
// ---------------------------------------------------------------------------

struct SeparabilityInstance {
    Eigen::MatrixXd a_mat;  // A', m' x n'
    Eigen::MatrixXd b_mat;  // B,  k' x n'

    int m_prime() const { return static_cast<int>(a_mat.rows()); }
    int k_prime() const { return static_cast<int>(b_mat.rows()); }
    int n_prime() const { return static_cast<int>(a_mat.cols()); }

    void validate() const {
        if (m_prime() < 1 || k_prime() < 1 || n_prime() < 1 || b_mat.cols() != a_mat.cols())
            throw std::invalid_argument("SeparabilityInstance: bad shapes");
    }
};

inline int reduction_dimension(int m_prime, int k_prime, int n_prime) {
    return std::max(k_prime + 2 * n_prime + 2, 1 + std::max(m_prime, k_prime));
}

// Variable map of the reduction: decision variables z^1 -> b_{1:k'} and
// z^2 -> A_{1:k',1} (both split into nonnegative parts), auxiliaries
// w^1, w^2, gamma^1, gamma^2 -> later entries of b, constants A', B pinned
// into columns 2.. of A along with the ones/zeros entries.
struct ReductionResult {
    SeparabilityInstance sep;
    BilinearInstance inst;
    int m_prime = 0, k_prime = 0, n_prime = 0;

    // Fill (b, A) from separability variables; unassigned entries keep the
    // values already present in b/A (callers may randomize them).
    void assemble(Eigen::VectorXd& b, Eigen::MatrixXd& a, const Eigen::VectorXd& z1,
                  const Eigen::VectorXd& z2, const Eigen::VectorXd& w1, const Eigen::VectorXd& w2,
                  double gamma1, double gamma2) const {
        b.segment(0, k_prime) = z1;
        a.col(0).segment(0, k_prime) = z2;
        b.segment(k_prime, n_prime) = w1;
        b.segment(k_prime + n_prime, n_prime) = w2;
        b[k_prime + 2 * n_prime] = gamma1;
        b[k_prime + 2 * n_prime + 1] = gamma2;
        for (const auto& [i, v] : inst.fixed_b) b[i - 1] = v;
        for (const auto& [rc, v] : inst.fixed_a) a(rc.first - 1, rc.second - 1) = v;
    }

    // Expression each constructed r encodes, given the separability variables.
    // Families 3 and 4 are in moved-over <= 0 form. Note: at the printed
    // indices the family-4 rows re-subtract z^1; see reduction_report().
    double encoded_lhs(int r, const Eigen::VectorXd& z1, const Eigen::VectorXd& z2,
                       const Eigen::VectorXd& w1, const Eigen::VectorXd& w2, double gamma1,
                       double gamma2) const {
        const int m = inst.m;
        if (r == 1) return z1.dot(z2);
        int rho = (r - 1) / m;   // proof row index
        int fam = r - rho * m;   // 1..4
        switch (fam) {
            case 1: return -sep.a_mat.row(rho - 1).dot(w1) + gamma1 + 1.0;
            case 2: return -sep.a_mat.row(rho - 1).dot(w2) + gamma2 + 1.0;
            case 3: return sep.b_mat.row(rho - 1).dot(w1) - gamma1 + 1.0 - z1[rho - 1];
            case 4: return sep.b_mat.row(rho - 1).dot(w2) - gamma2 + 1.0 - z1[rho - 1];
        }
        throw std::invalid_argument("encoded_lhs: r is not a constructed constraint");
    }

    std::vector<int> constructed_indices() const {
        std::vector<int> out;
        for (const auto& [r, s] : inst.structure) out.push_back(r);
        return out;
    }
};

// Builds the reduction instance. Deterministic; independent of any RNG.
inline ReductionResult reduce_separability(const SeparabilityInstance& sep) {
    sep.validate();
    const int mp = sep.m_prime(), kp = sep.k_prime(), np = sep.n_prime();
    ReductionResult red;
    red.sep = sep;
    red.m_prime = mp;
    red.k_prime = kp;
    red.n_prime = np;

    BilinearInstance& inst = red.inst;
    inst.d = reduction_dimension(mp, kp, np);
    inst.m = pair_count(inst.d);
    inst.target = Eigen::VectorXd::Zero(inst.d * inst.m);

    // objective: D^(1) couples b_{1:k'} with A_{1:k',1}
    {
        StructureMatrix s;
        for (int i = 1; i <= kp; ++i) s.entries.emplace_back(i, i, 1.0);
        inst.structure[1] = std::move(s);
    }
    const int g1 = kp + 2 * np + 1;   // gamma^1 slot in b
    const int g2 = kp + 2 * np + 2;   // gamma^2 slot in b
    const int one = kp + 2 * np + 3;  // pinned-to-1 slot in b
    const int row_ones = 2 * np + 1;  // pinned-to-1 row of A
    const int row_zeros = 2 * np + 2; // pinned-to-0 row of A

    for (int rho = 1; rho <= mp; ++rho) {
        StructureMatrix s1, s2;
        for (int k = 1; k <= np; ++k) {
            s1.entries.emplace_back(kp + k, k, 1.0);
            s2.entries.emplace_back(kp + np + k, k, 1.0);
        }
        s1.entries.emplace_back(g1, row_ones, 1.0);
        s1.entries.emplace_back(one, row_ones, 1.0);
        s1.entries.emplace_back(one, row_zeros, 1.0);
        s2.entries.emplace_back(g2, row_ones, 1.0);
        s2.entries.emplace_back(one, row_ones, 1.0);
        s2.entries.emplace_back(one, row_zeros, 1.0);
        inst.structure[rho * inst.m + 1] = std::move(s1);
        inst.structure[rho * inst.m + 2] = std::move(s2);
    }
    for (int rho = 1; rho <= kp; ++rho) {
        StructureMatrix s3, s4;
        for (int k = 1; k <= np; ++k) {
            s3.entries.emplace_back(kp + k, np + k, 1.0);
            s4.entries.emplace_back(kp + np + k, np + k, 1.0);
        }
        s3.entries.emplace_back(one, row_ones, 1.0);
        s3.entries.emplace_back(g1, row_ones, -1.0);
        s3.entries.emplace_back(rho, row_ones, -1.0);
        s4.entries.emplace_back(one, row_ones, 1.0);
        s4.entries.emplace_back(g2, row_ones, -1.0);
        s4.entries.emplace_back(rho, row_ones, -1.0);
        inst.structure[rho * inst.m + 3] = std::move(s3);
        inst.structure[rho * inst.m + 4] = std::move(s4);
    }

    // pins: the +1 slot of b, the constants A' and B, and the 1/0 rows of A
    inst.fixed_b[one] = 1.0;
    for (int rho = 1; rho <= mp; ++rho)
        for (int k = 1; k <= np; ++k) inst.fixed_a[{k, 1 + rho}] = -sep.a_mat(rho - 1, k - 1);
    for (int rho = 1; rho <= kp; ++rho)
        for (int k = 1; k <= np; ++k) inst.fixed_a[{np + k, 1 + rho}] = sep.b_mat(rho - 1, k - 1);
    for (int c = 2; c <= 1 + std::max(mp, kp); ++c) {
        inst.fixed_a[{row_ones, c}] = 1.0;
        inst.fixed_a[{row_zeros, c}] = 0.0;
    }

    inst.split_b.resize(kp);
    inst.split_a_col1.resize(kp);
    for (int i = 0; i < kp; ++i) inst.split_b[i] = inst.split_a_col1[i] = i + 1;
    return red;
}

struct VerifyResult {
    bool pass = true;
    double max_deviation = 0.0;
    int worst_r = 0;
};

// Draws random separability variables (and random fillers for unassigned
// entries), assembles (b, A), and checks that every constructed constraint's
// bilinear form equals its encoded expression.
inline VerifyResult verify_reduction(const ReductionResult& red, int samples, std::uint64_t seed,
                                     double tol = 1e-12) {
    const int dp1 = red.inst.d + 1;
    VerifyResult out;
    for (int s = 0; s < samples; ++s) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(s));
        Eigen::VectorXd b(dp1);
        Eigen::MatrixXd a(dp1, red.inst.d);
        for (int i = 0; i < dp1; ++i) b[i] = rng.normal();
        for (int i = 0; i < dp1; ++i)
            for (int j = 0; j < red.inst.d; ++j) a(i, j) = rng.normal();
        Eigen::VectorXd z1(red.k_prime), z2(red.k_prime), w1(red.n_prime), w2(red.n_prime);
        for (int i = 0; i < red.k_prime; ++i) z1[i] = rng.normal();
        for (int i = 0; i < red.k_prime; ++i) z2[i] = rng.normal();
        for (int i = 0; i < red.n_prime; ++i) w1[i] = rng.normal();
        for (int i = 0; i < red.n_prime; ++i) w2[i] = rng.normal();
        double gamma1 = rng.normal(), gamma2 = rng.normal();
        red.assemble(b, a, z1, z2, w1, w2, gamma1, gamma2);
        for (const auto& [r, st] : red.inst.structure) {
            double got = red.inst.evaluate(r, b, a);
            double want = red.encoded_lhs(r, z1, z2, w1, w2, gamma1, gamma2);
            double dev = std::abs(got - want);
            if (dev > out.max_deviation) {
                out.max_deviation = dev;
                out.worst_r = r;
            }
        }
    }
    out.pass = out.max_deviation <= tol;
    return out;
}

// Human-auditable dump: dimensions, variable map, pins, and per-constraint
// nonzeros.
inline std::string reduction_report(const ReductionResult& red) {
    std::ostringstream os;
    const int mp = red.m_prime, kp = red.k_prime, np = red.n_prime;
    os << "bilinear separability reduction\n"
       << "  m'=" << mp << " k'=" << kp << " n'=" << np << "  ->  d=" << red.inst.d
       << ", m=" << red.inst.m << ", dm=" << red.inst.d * red.inst.m << "\n"
       << "variable map\n"
       << "  z1 -> b[1.." << kp << "]     (split +/-)\n"
       << "  z2 -> A[1.." << kp << ",1]   (split +/-)\n"
       << "  w1 -> b[" << kp + 1 << ".." << kp + np << "]\n"
       << "  w2 -> b[" << kp + np + 1 << ".." << kp + 2 * np << "]\n"
       << "  gamma1 -> b[" << kp + 2 * np + 1 << "], gamma2 -> b[" << kp + 2 * np + 2 << "]\n"
       << "pins\n"
       << "  b[" << kp + 2 * np + 3 << "] = 1\n"
       << "  A[" << 2 * np + 1 << ", 2.." << 1 + std::max(mp, kp) << "] = 1,  A[" << 2 * np + 2
       << ", 2.." << 1 + std::max(mp, kp) << "] = 0\n"
       << "  A' -> -A[1.." << np << ", 2.." << 1 + mp << "]^T,  B -> A[" << np + 1 << ".." << 2 * np
       << ", 2.." << 1 + kp << "]^T\n"
       << "constraints (r: block j, nonzeros as (row,col)=v)\n";
    for (const auto& [r, st] : red.inst.structure) {
        os << "  r=" << r << " (j=" << red.inst.block_of(r) << "): ";
        for (const auto& [row, col, v] : st.entries)
            os << "(" << row << "," << col << ")=" << v << " ";
        os << "\n";
    }
    os << "note: rows r = rho*m+4 re-subtract z1 (as printed in the source\n"
       << "construction); z2 lives in column 1 of A and is only reachable from\n"
       << "block-1 constraints, so the z2-side inequality cannot be encoded at\n"
       << "these indices. Verification checks the encoded expressions.\n";
    return os.str();
}

}  // namespace mlsa
