#pragma once

// Deterministic RNG streams. All samplers are hand-rolled on top of a
// mersenne-twister core so results are identical across standard libraries
// (std::uniform_real_distribution et al. are implementation-defined).
//
// Substream scheme: substream(master, i) seeds a fresh engine with
// splitmix64(splitmix64(master) ^ (i + 1) * 0x9E3779B97F4A7C15). Parallel
// and serial generation of substream i therefore produce identical draws.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mlsa {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    static RngStream substream(std::uint64_t master, std::uint64_t index) {
        return RngStream(splitmix64(master) ^ (index + 1) * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // index into a probability vector by inverse CDF
    int categorical(const Eigen::VectorXd& pmf) {
        double u = uniform();
        double acc = 0.0;
        for (int i = 0; i < pmf.size(); ++i) {
            acc += pmf[i];
            if (u < acc) return i;
        }
        return static_cast<int>(pmf.size()) - 1;
    }

    double normal() {
        // polar Box-Muller; caches the second variate
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Marsaglia-Tsang, boosted for alpha < 1
    double gamma(double alpha) {
        if (alpha <= 0.0) throw std::invalid_argument("gamma: alpha must be > 0");
        if (alpha < 1.0) {
            double u = uniform();
            while (u == 0.0) u = uniform();
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    Eigen::VectorXd dirichlet(double alpha, int k) {
        Eigen::VectorXd out(k);
        for (int i = 0; i < k; ++i) out[i] = gamma(alpha);
        double s = out.sum();
        if (s <= 0.0) return Eigen::VectorXd::Constant(k, 1.0 / k);
        return out / s;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mlsa
