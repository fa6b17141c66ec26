#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "levyexit/drift_expr.hpp"
#include "levyexit/nonlocal_solver.hpp"
#include "levyexit/stable_math.hpp"

#if defined(LEVYEXIT_VECTOR_MATH) && defined(__GNUC__) && !defined(__clang__) && \
    defined(__x86_64__) && defined(__GLIBC__)
// Redeclare the libm entry points used by the block transforms with the
// vector ABI attribute, so the loops below autovectorize against glibc's
// libmvec (the build must link -lmvec). Scalar semantics are unchanged.
extern "C" {
double sin(double) __attribute__((simd("notinbranch")));
double cos(double) __attribute__((simd("notinbranch")));
double log(double) __attribute__((simd("notinbranch")));
double exp(double) __attribute__((simd("notinbranch")));
}
#endif

namespace levyexit {

/// Path simulation settings. threads = 0 means one worker per logical
/// processor.
struct SimConfig {
    double dt = 1e-4;
    double max_time = 100.0;
    long n_paths = 1;
    std::uint64_t seed = 0;
    int threads = 0;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("simulation dt must be positive");
        if (!(dt <= max_time)) throw std::invalid_argument("dt must not exceed max_time");
        if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
    }
};

/// Outcome of a single simulated path: first time and place the path left the
/// domain. censored marks paths still inside at max_time (their exit_time is
/// then the horizon, a lower bound).
struct ExitRecord {
    double exit_time = 0.0;
    double exit_point = 0.0;
    bool landed_in_target = false;
    bool censored = false;
};

/// xoshiro256++ with independent streams: state is derived from (seed,
/// stream), so path i of a run always sees the same draws regardless of how
/// paths are scheduled across threads.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        for (auto& w : s_) {
            x += 0x9E3779B97F4A7C15ULL;
            w = mix(x);
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform draw strictly inside (0, 1).
    double uniform01() noexcept { return ((next() >> 11) + 0.5) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) noexcept {
        return (v << k) | (v >> (64 - k));
    }
    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t s_[4];
};

namespace detail {

// Chambers-Mallows-Stuck transform for the symmetric case, written on blocks
// so the loop vectorizes: V = pi (u1 - 1/2), W = -log u2,
//   X = sin(alpha V) (cos V)^{-1/alpha} (cos((1-alpha)V) / W)^{(1-alpha)/alpha}
// evaluated through exp/log to avoid pow.
inline void stable_transform_block(double alpha, const double* u1, const double* u2,
                                   double* out, int n) {
    const double inv_a = 1.0 / alpha;
    const double one_m_a = 1.0 - alpha;
    const double q = inv_a - 1.0;
    for (int i = 0; i < n; ++i) {
        const double v = std::numbers::pi * (u1[i] - 0.5);
        const double lw = ::log(-::log(u2[i]));
        out[i] = ::sin(alpha * v) *
                 ::exp(-inv_a * ::log(::cos(v)) + q * (::log(::cos(one_m_a * v)) - lw));
    }
}

inline void cauchy_transform_block(const double* u1, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = std::tan(std::numbers::pi * (u1[i] - 0.5));
}

inline void normal_transform_block(const double* u1, const double* u2, double* out, int n) {
    for (int i = 0; i < n; ++i)
        out[i] = std::sqrt(-2.0 * ::log(u1[i])) * ::cos(2.0 * std::numbers::pi * u2[i]);
}

// Dense polynomial coefficients of a drift expression under a fixed binding,
// lowest degree first; nullopt when the expression is not polynomial in x
// (e.g. division by something containing x).
inline std::optional<std::vector<double>> polynomial_coefficients(const ExprNode& n,
                                                                  const ParamEnv& env) {
    using Poly = std::vector<double>;
    constexpr std::size_t max_degree = 64;
    switch (n.kind) {
    case ExprNode::Kind::literal: return Poly{n.value};
    case ExprNode::Kind::var_x: return Poly{0.0, 1.0};
    case ExprNode::Kind::param: {
        const auto it = env.find(n.name);
        if (it == env.end()) throw UnboundParameterError(n.name);
        return Poly{it->second};
    }
    case ExprNode::Kind::neg: {
        auto p = polynomial_coefficients(*n.lhs, env);
        if (!p) return std::nullopt;
        for (double& c : *p) c = -c;
        return p;
    }
    case ExprNode::Kind::add:
    case ExprNode::Kind::sub: {
        auto a = polynomial_coefficients(*n.lhs, env);
        auto b = polynomial_coefficients(*n.rhs, env);
        if (!a || !b) return std::nullopt;
        if (a->size() < b->size()) a->resize(b->size(), 0.0);
        const double sign = n.kind == ExprNode::Kind::add ? 1.0 : -1.0;
        for (std::size_t i = 0; i < b->size(); ++i) (*a)[i] += sign * (*b)[i];
        return a;
    }
    case ExprNode::Kind::mul: {
        auto a = polynomial_coefficients(*n.lhs, env);
        auto b = polynomial_coefficients(*n.rhs, env);
        if (!a || !b) return std::nullopt;
        if (a->size() + b->size() > max_degree + 2) return std::nullopt;
        Poly prod(a->size() + b->size() - 1, 0.0);
        for (std::size_t i = 0; i < a->size(); ++i)
            for (std::size_t j = 0; j < b->size(); ++j) prod[i + j] += (*a)[i] * (*b)[j];
        return prod;
    }
    case ExprNode::Kind::div: {
        auto a = polynomial_coefficients(*n.lhs, env);
        auto b = polynomial_coefficients(*n.rhs, env);
        if (!a || !b) return std::nullopt;
        if (b->size() != 1 || (*b)[0] == 0.0) return std::nullopt;
        for (double& c : *a) c /= (*b)[0];
        return a;
    }
    case ExprNode::Kind::pow: {
        auto base = polynomial_coefficients(*n.lhs, env);
        if (!base) return std::nullopt;
        Poly acc{1.0};
        for (int e = 0; e < n.exponent; ++e) {
            if (acc.size() + base->size() > max_degree + 2) return std::nullopt;
            Poly prod(acc.size() + base->size() - 1, 0.0);
            for (std::size_t i = 0; i < acc.size(); ++i)
                for (std::size_t j = 0; j < base->size(); ++j)
                    prod[i + j] += acc[i] * (*base)[j];
            acc = std::move(prod);
        }
        return acc;
    }
    }
    return std::nullopt;
}

// Euler-Maruyama stepper for one parameter set. Holds the scratch blocks of
// pre-generated increments; one instance per worker thread.
class PathSimulator {
public:
    static constexpr int block = 1024;

    PathSimulator(const SystemParams& params, const DriftExpr& drift, const Domain& domain,
                  const std::optional<TargetSet>& target, const SimConfig& config)
        : alpha_(params.alpha.value()), domain_(domain), target_(target), dt_(config.dt),
          noise_scale_(params.epsilon * std::pow(config.dt, 1.0 / params.alpha.value())),
          gauss_scale_(params.d > 0.0 ? std::sqrt(params.d * config.dt) : 0.0),
          max_steps_(static_cast<long>(config.max_time / config.dt + 1e-9)),
          max_time_(config.max_time) {
        u1_.resize(block);
        u2_.resize(block);
        xi_.resize(block);
        if (gauss_scale_ > 0.0) gauss_.resize(block);
        auto poly = polynomial_coefficients(drift.root(), params.drift_env);
        if (poly) {
            coeffs_dt_ = std::move(*poly);
            for (double& c : coeffs_dt_) c *= dt_;
        } else {
            drift_expr_ = drift;
            env_ = params.drift_env;
        }
    }

    ExitRecord run(double x0, PathRng& rng) const {
        double x = x0;
        long steps = 0;
        while (steps < max_steps_) {
            const int chunk = static_cast<int>(std::min<long>(block, max_steps_ - steps));
            fill_increments(rng, chunk);
            for (int i = 0; i < chunk; ++i) {
                x += drift_dt(x) + noise_scale_ * xi_[i];
                if (gauss_scale_ > 0.0) x += gauss_scale_ * gauss_[i];
                ++steps;
                if (!(x > domain_.a && x < domain_.b)) {
                    ExitRecord rec;
                    rec.exit_time = static_cast<double>(steps) * dt_;
                    rec.exit_point = x;
                    rec.landed_in_target = target_ && target_->contains(x);
                    return rec;
                }
            }
        }
        ExitRecord rec;
        rec.exit_time = max_time_;
        rec.exit_point = x;
        rec.censored = true;
        return rec;
    }

private:
    double drift_dt(double x) const {
        if (!coeffs_dt_.empty()) {
            double acc = coeffs_dt_.back();
            for (std::size_t i = coeffs_dt_.size() - 1; i-- > 0;) acc = acc * x + coeffs_dt_[i];
            return acc;
        }
        return eval_drift(drift_expr_, env_, x) * dt_;
    }

    void fill_increments(PathRng& rng, int n) const {
        if (alpha_ == 1.0) {
            for (int i = 0; i < n; ++i) u1_[i] = rng.uniform01();
            cauchy_transform_block(u1_.data(), xi_.data(), n);
        } else {
            for (int i = 0; i < n; ++i) {
                u1_[i] = rng.uniform01();
                u2_[i] = rng.uniform01();
            }
            stable_transform_block(alpha_, u1_.data(), u2_.data(), xi_.data(), n);
        }
        if (gauss_scale_ > 0.0) {
            for (int i = 0; i < n; ++i) {
                u1_[i] = rng.uniform01();
                u2_[i] = rng.uniform01();
            }
            normal_transform_block(u1_.data(), u2_.data(), gauss_.data(), n);
        }
    }

    double alpha_;
    Domain domain_;
    std::optional<TargetSet> target_;
    double dt_;
    double noise_scale_;
    double gauss_scale_;
    long max_steps_;
    double max_time_;
    std::vector<double> coeffs_dt_;
    DriftExpr drift_expr_;
    ParamEnv env_;
    mutable std::vector<double> u1_, u2_, xi_, gauss_;
};

inline void parallel_tasks(long task_count, int threads, const std::function<void(long)>& body) {
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, task_count));
    if (workers <= 1) {
        for (long t = 0; t < task_count; ++t) body(t);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (long t = next.fetch_add(1); t < task_count; t = next.fetch_add(1)) body(t);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(task_count);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

/// One draw from the standard symmetric alpha-stable law (characteristic
/// function exp(-|theta|^alpha)) via the Chambers-Mallows-Stuck construction;
/// alpha = 1 uses the exact Cauchy form tan(pi (U - 1/2)).
inline double sample_standard_stable(StabilityIndex alpha, PathRng& rng) {
    const double a = alpha.value();
    const double u1 = rng.uniform01();
    if (a == 1.0) return std::tan(std::numbers::pi * (u1 - 0.5));
    const double u2 = rng.uniform01();
    double out;
    detail::stable_transform_block(a, &u1, &u2, &out, 1);
    return out;
}

/// Simulate one Euler-Maruyama path from x0 until it leaves the domain:
/// X_{n+1} = X_n + f(X_n) dt + epsilon dt^{1/alpha} xi_n (plus a Gaussian
/// term sqrt(d dt) Z_n when d > 0). Paths alive at max_time come back with
/// censored set instead of being dropped.
inline ExitRecord simulate_exit(const SystemParams& params, const DriftExpr& drift,
                                const Domain& domain, double x0,
                                const std::optional<TargetSet>& target, const SimConfig& config,
                                PathRng& rng) {
    config.validate();
    if (!domain.contains(x0))
        throw std::invalid_argument("simulate_exit: x0 = " + std::to_string(x0) +
                                    " is outside the open domain");
    if (target) target->validate(domain);
    detail::PathSimulator sim(params, drift, domain, target, config);
    return sim.run(x0, rng);
}

/// Empirical mean exit time (no target) or landing frequency (with target)
/// over n_paths paths per starting point, with standard errors when
/// n_paths >= 2 and the censored fraction per point. Paths are distributed
/// over worker threads; results are bitwise independent of the thread count
/// because every path owns the RNG stream (seed, point * n_paths + path) and
/// partial sums are reduced in fixed chunk order.
inline Profile empirical_statistics(const SystemParams& params, const DriftExpr& drift,
                                    const Domain& domain, std::vector<double> xs,
                                    const std::optional<TargetSet>& target,
                                    const SimConfig& config) {
    config.validate();
    if (xs.empty()) throw std::invalid_argument("empirical_statistics: no starting points");
    for (double x : xs)
        if (!domain.contains(x))
            throw std::invalid_argument("empirical_statistics: starting point " +
                                        std::to_string(x) + " is outside the domain");
    if (target) target->validate(domain);
    std::sort(xs.begin(), xs.end());

    const long n = config.n_paths;
    constexpr long chunk_size = 4096;
    const long chunks_per_point = (n + chunk_size - 1) / chunk_size;
    const long points = static_cast<long>(xs.size());

    struct ChunkStats {
        double sum = 0.0, sum_sq = 0.0;
        long landed = 0, exited = 0, censored = 0;
    };
    std::vector<ChunkStats> stats(static_cast<std::size_t>(points * chunks_per_point));

    detail::parallel_tasks(points * chunks_per_point, config.threads, [&](long task) {
        const long p = task / chunks_per_point;
        const long c = task % chunks_per_point;
        const long first = c * chunk_size;
        const long last = std::min(n, first + chunk_size);
        detail::PathSimulator sim(params, drift, domain, target, config);
        ChunkStats& out = stats[static_cast<std::size_t>(task)];
        for (long i = first; i < last; ++i) {
            PathRng rng(config.seed, static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(n) +
                                         static_cast<std::uint64_t>(i));
            const ExitRecord rec = sim.run(xs[static_cast<std::size_t>(p)], rng);
            out.sum += rec.exit_time;
            out.sum_sq += rec.exit_time * rec.exit_time;
            if (rec.censored) {
                ++out.censored;
            } else {
                ++out.exited;
                if (rec.landed_in_target) ++out.landed;
            }
        }
    });

    Profile profile;
    profile.kind = target ? ProfileKind::escape_probability : ProfileKind::mean_exit_time;
    profile.xs = xs;
    profile.values.resize(xs.size());
    profile.censored_fraction.resize(xs.size());
    if (n >= 2) profile.stderrs.resize(xs.size());

    for (long p = 0; p < points; ++p) {
        ChunkStats total;
        for (long c = 0; c < chunks_per_point; ++c) {
            const ChunkStats& s = stats[static_cast<std::size_t>(p * chunks_per_point + c)];
            total.sum += s.sum;
            total.sum_sq += s.sum_sq;
            total.landed += s.landed;
            total.exited += s.exited;
            total.censored += s.censored;
        }
        const auto idx = static_cast<std::size_t>(p);
        profile.censored_fraction[idx] = static_cast<double>(total.censored) / static_cast<double>(n);
        if (target) {
            const long m = total.exited;
            const double freq = m > 0 ? static_cast<double>(total.landed) / static_cast<double>(m) : 0.0;
            profile.values[idx] = freq;
            if (n >= 2)
                profile.stderrs[idx] =
                    m >= 2 ? std::sqrt(freq * (1.0 - freq) / static_cast<double>(m)) : 0.0;
            if (m == 0)
                profile.warnings.push_back("x = " + std::to_string(xs[idx]) +
                                           ": no path exited before max_time");
        } else {
            const double mean = total.sum / static_cast<double>(n);
            profile.values[idx] = mean;
            if (n >= 2) {
                const double var =
                    std::max(0.0, (total.sum_sq - static_cast<double>(n) * mean * mean) /
                                      static_cast<double>(n - 1));
                profile.stderrs[idx] = std::sqrt(var / static_cast<double>(n));
            }
        }
        if (total.censored > 0)
            profile.warnings.push_back(
                "x = " + std::to_string(xs[idx]) + ": " + std::to_string(total.censored) +
                " of " + std::to_string(n) +
                " paths censored at max_time" +
                (target ? " (excluded from the landing frequency)"
                        : " (mean exit time is a lower bound)"));
    }
    return profile;
}

} // namespace levyexit
