#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levyexit/drift_expr.hpp"
#include "levyexit/linalg.hpp"
#include "levyexit/stable_math.hpp"

namespace levyexit {

/// Bounded open interval D = (a, b) the process exits from.
struct Domain {
    double a;
    double b;
    Domain(double a_, double b_) : a(a_), b(b_) {
        if (!(std::isfinite(a) && std::isfinite(b) && a < b))
            throw std::invalid_argument("domain requires finite a < b");
    }
    double radius() const noexcept { return 0.5 * (b - a); }
    double center() const noexcept { return 0.5 * (a + b); }
    bool contains(double x) const noexcept { return x > a && x < b; }
};

/// System parameters of dX = f(beta, X) dt + epsilon dL^alpha (+ Gaussian
/// component with diffusion coefficient d contributing (d/2) u'' to the
/// generator).
struct SystemParams {
    StabilityIndex alpha;
    double epsilon;
    double d;
    ParamEnv drift_env;

    SystemParams(StabilityIndex alpha_, double epsilon_, double d_ = 0.0, ParamEnv env = {})
        : alpha(alpha_), epsilon(epsilon_), d(d_), drift_env(std::move(env)) {
        if (!(std::isfinite(epsilon) && epsilon > 0.0))
            throw std::invalid_argument("epsilon must be positive and finite");
        if (!(std::isfinite(d) && d >= 0.0))
            throw std::invalid_argument("diffusion coefficient d must be non-negative");
    }
};

/// Union of closed intervals in the exterior of D where first-exit landings
/// count. Endpoints may be infinite.
struct TargetSet {
    struct Interval {
        double lo;
        double hi;
    };
    std::vector<Interval> intervals;

    static TargetSet left_exterior(const Domain& d) {
        return {{{-std::numeric_limits<double>::infinity(), d.a}}};
    }
    static TargetSet right_exterior(const Domain& d) {
        return {{{d.b, std::numeric_limits<double>::infinity()}}};
    }
    static TargetSet both_exteriors(const Domain& d) {
        return {{{-std::numeric_limits<double>::infinity(), d.a},
                 {d.b, std::numeric_limits<double>::infinity()}}};
    }
    static TargetSet interval(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("target interval requires lo < hi");
        return {{{lo, hi}}};
    }

    bool contains(double x) const noexcept {
        for (const auto& iv : intervals)
            if (x >= iv.lo && x <= iv.hi) return true;
        return false;
    }

    void validate(const Domain& d) const {
        if (intervals.empty()) throw std::invalid_argument("target set must be non-empty");
        for (const auto& iv : intervals) {
            if (!(iv.lo < iv.hi))
                throw std::invalid_argument("target interval requires lo < hi");
            if (!(iv.hi <= d.a || iv.lo >= d.b))
                throw std::invalid_argument("target set must lie outside the open domain (" +
                                            std::to_string(d.a) + ", " + std::to_string(d.b) + ")");
        }
    }
};

/// Uniform grid on the doubled canonical interval [-2, 2]: nodes x_j = j h for
/// -2J <= j <= 2J with h = 1/J; unknowns sit at |j| < J. Carries the affine
/// map between original and canonical coordinates.
struct Grid {
    Domain domain;
    int J;
    double h;

    double to_canonical(double x) const noexcept { return (x - domain.center()) / domain.radius(); }
    double from_canonical(double z) const noexcept { return domain.center() + domain.radius() * z; }
    double canonical_node(int j) const noexcept { return j * h; }
    int interior_count() const noexcept { return 2 * J - 1; }

    std::vector<double> interior_canonical() const {
        std::vector<double> zs;
        zs.reserve(interior_count());
        for (int j = -J + 1; j <= J - 1; ++j) zs.push_back(canonical_node(j));
        return zs;
    }
    std::vector<double> interior_original() const {
        std::vector<double> xs;
        xs.reserve(interior_count());
        for (int j = -J + 1; j <= J - 1; ++j) xs.push_back(from_canonical(canonical_node(j)));
        return xs;
    }
};

inline Grid build_grid(const Domain& domain, int J) {
    if (J < 2) throw std::invalid_argument("grid resolution J must be at least 2");
    return Grid{domain, J, 1.0 / J};
}

/// The problem transformed to the canonical domain (-1, 1) via x = c + r z:
/// d' = d / r^2, drift'(z) = f(c + r z) / r, epsilon' = epsilon / r^alpha.
/// Solution values are invariant under the map (u(x) = v(z)).
struct CanonicalSystem {
    double alpha;
    double epsilon;
    double d;
    std::function<double(double)> drift;
};

inline CanonicalSystem canonicalize_params(const SystemParams& params, const DriftExpr& drift,
                                           const Domain& domain) {
    const double r = domain.radius();
    const double c = domain.center();
    CanonicalSystem sys;
    sys.alpha = params.alpha.value();
    sys.epsilon = params.epsilon * std::pow(r, -sys.alpha);
    sys.d = params.d / (r * r);
    sys.drift = [drift, env = params.drift_env, r, c](double z) {
        return eval_drift(drift, env, c + r * z) / r;
    };
    return sys;
}

/// epsilon C_alpha * integral of |y|^{-1-alpha} over {y : x + y in (lo, hi)},
/// in closed form. Endpoints may be infinite; x must lie strictly outside
/// [lo, hi].
inline double exterior_mass(double x, double lo, double hi, StabilityIndex alpha,
                            double epsilon) {
    if (!(lo < hi)) throw std::invalid_argument("exterior_mass: requires lo < hi");
    if (x >= lo && x <= hi)
        throw std::domain_error("exterior_mass: x = " + std::to_string(x) +
                                " lies inside the interval");
    const double a = alpha.value();
    const double scale = epsilon * stable_intensity_constant(alpha) / a;
    // pow(inf, -a) = 0, so infinite endpoints drop out on their own
    if (lo > x) return scale * (std::pow(lo - x, -a) - std::pow(hi - x, -a));
    return scale * (std::pow(x - hi, -a) - std::pow(x - lo, -a));
}

enum class ProfileKind { mean_exit_time, escape_probability };

/// A function of the starting point x: solved or observed mean exit times or
/// escape probabilities. stderrs / censored_fraction are filled only by the
/// Monte Carlo estimator.
struct Profile {
    std::vector<double> xs;
    std::vector<double> values;
    std::vector<double> stderrs;
    std::vector<double> censored_fraction;
    ProfileKind kind = ProfileKind::mean_exit_time;
    std::vector<std::string> warnings;
};

enum class Scheme { simplified, split };

struct SolveOptions {
    Scheme scheme = Scheme::simplified;
    LinearMethod method{};
};

namespace detail {

// Shared assembly of the discrete nonlocal operator on the canonical grid.
//
// Each interior row j implements
//   C_h (U_{j-1} - 2U_j + U_{j+1}) / h^2  +  f(x_j) (U_{j+1} - U_{j-1}) / (2h)
//   - (eps C/alpha) [(1+x_j)^{-alpha} + (1-x_j)^{-alpha}] U_j
//   + eps C h * punched-hole trapezoidal sum over the band
// with C_h = d/2 - eps C zeta(alpha-1) h^{2-alpha}. The simplified scheme
// takes one principal-value sum over k in [-J-j, J-j]; the split scheme
// separates a desingularized symmetric sum over |k| <= J-|j| (carrying the
// y u'(x) compensator) from the plain boundary-side sum. References to nodes
// with |index| = J are known exterior data and move to the right-hand side.
//
// exterior_value(s) supplies that data at the band edges: s = -1 for the node
// at canonical -1, s = +1 for the node at +1.
inline LinearSystem assemble_system(const CanonicalSystem& sys, const Grid& grid, Scheme scheme,
                                    const std::function<double(int)>& exterior_value,
                                    const std::function<double(double)>& rhs_at) {
    const int J = grid.J;
    const double h = grid.h;
    const double a = sys.alpha;
    const double eps = sys.epsilon;
    const double C = stable_intensity_constant(StabilityIndex(a));
    const double Ch = 0.5 * sys.d - eps * C * riemann_zeta(a - 1.0) * std::pow(h, 2.0 - a);
    const double cnl = eps * C * h;
    const int n = grid.interior_count();

    // |x_k|^{-1-alpha} for k = 1 .. 2J-1
    std::vector<double> kw(2 * J, 0.0);
    for (int k = 1; k < 2 * J; ++k) kw[k] = std::pow(k * h, -1.0 - a);

    LinearSystem out{DenseMatrix(static_cast<std::size_t>(n)),
                     std::vector<double>(static_cast<std::size_t>(n), 0.0)};

    for (int j = -J + 1; j <= J - 1; ++j) {
        const std::size_t row = static_cast<std::size_t>(j + J - 1);
        const auto add = [&](int t, double coef) {
            if (std::abs(t) < J)
                out.matrix(row, static_cast<std::size_t>(t + J - 1)) += coef;
            else
                out.rhs[row] -= coef * exterior_value(t > 0 ? 1 : -1);
        };

        const double zj = grid.canonical_node(j);
        const double fj = sys.drift(zj);
        if (!std::isfinite(fj))
            throw std::runtime_error("assembly: drift is not finite at node x = " +
                                     std::to_string(grid.from_canonical(zj)));

        add(j - 1, Ch / (h * h) - fj / (2.0 * h));
        add(j, -2.0 * Ch / (h * h));
        add(j + 1, Ch / (h * h) + fj / (2.0 * h));
        add(j, -(eps * C / a) * (std::pow(1.0 + zj, -a) + std::pow(1.0 - zj, -a)));

        const auto punched_sum = [&](int lo, int hi, bool desingularize) {
            if (lo >= hi) return;
            for (int k = lo; k <= hi; ++k) {
                if (k == 0) continue;
                const double w = (k == lo || k == hi) ? 0.5 : 1.0;
                const double c = cnl * w * kw[std::abs(k)];
                add(j + k, c);
                add(j, -c);
                if (desingularize) {
                    const double dc = c * 0.5 * k;  // c * x_k / (2h)
                    add(j + 1, -dc);
                    add(j - 1, dc);
                }
            }
        };

        if (scheme == Scheme::simplified) {
            punched_sum(-J - j, J - j, false);
        } else {
            const int m = J - std::abs(j);
            punched_sum(-m, m, true);
            if (j > 0)
                punched_sum(-J - j, -m, false);
            else if (j < 0)
                punched_sum(m, J - j, false);
        }

        out.rhs[row] += rhs_at(zj);
    }
    return out;
}

inline TargetSet to_canonical(const TargetSet& target, const Grid& grid) {
    TargetSet t;
    t.intervals.reserve(target.intervals.size());
    for (const auto& iv : target.intervals)
        t.intervals.push_back({grid.to_canonical(iv.lo), grid.to_canonical(iv.hi)});
    return t;
}

} // namespace detail

/// Discrete mean-exit-time system M U = b on the canonical grid: exterior
/// values vanish and b = -1 at every interior node.
inline LinearSystem assemble_met_system(const CanonicalSystem& sys, const Grid& grid,
                                        Scheme scheme = Scheme::simplified) {
    return detail::assemble_system(
        sys, grid, scheme, [](int) { return 0.0; }, [](double) { return -1.0; });
}

/// Discrete escape-probability system: the same interior operator with the
/// exterior data 1 on E (0 elsewhere) folded into the right-hand side, through
/// the closed-form tail mass and the band-edge nodes at canonical +-1.
inline LinearSystem assemble_ep_system(const CanonicalSystem& sys, const Grid& grid,
                                       const TargetSet& target,
                                       Scheme scheme = Scheme::simplified) {
    target.validate(grid.domain);
    const TargetSet ct = detail::to_canonical(target, grid);
    const StabilityIndex alpha(sys.alpha);
    const double eps = sys.epsilon;
    const auto exterior_value = [&ct](int side) { return ct.contains(static_cast<double>(side)) ? 1.0 : 0.0; };
    const auto rhs_at = [&ct, alpha, eps](double z) {
        double mass = 0.0;
        for (const auto& iv : ct.intervals) mass += exterior_mass(z, iv.lo, iv.hi, alpha, eps);
        return -mass;
    };
    return detail::assemble_system(sys, grid, scheme, exterior_value, rhs_at);
}

/// Solve the mean-exit-time boundary value problem on D and return u over the
/// interior nodes in original coordinates. Values more negative than -1e-8
/// are reported through Profile::warnings (the scheme should keep u >= 0).
inline Profile mean_exit_time(const SystemParams& params, const DriftExpr& drift,
                              const Domain& domain, int J, const SolveOptions& options = {}) {
    const Grid grid = build_grid(domain, J);
    const CanonicalSystem sys = canonicalize_params(params, drift, domain);
    const LinearSystem system = assemble_met_system(sys, grid, options.scheme);
    Profile profile;
    profile.kind = ProfileKind::mean_exit_time;
    profile.xs = grid.interior_original();
    profile.values = solve_linear(system, options.method);
    for (std::size_t i = 0; i < profile.values.size(); ++i) {
        if (profile.values[i] < -1e-8) {
            profile.warnings.push_back("scheme quality: negative mean exit time " +
                                       std::to_string(profile.values[i]) + " at x = " +
                                       std::to_string(profile.xs[i]));
        }
    }
    return profile;
}

/// Solve the escape-probability boundary value problem for landing set E.
/// Values outside [0, 1] by more than 1e-8 are reported through warnings.
inline Profile escape_probability(const SystemParams& params, const DriftExpr& drift,
                                  const Domain& domain, const TargetSet& target, int J,
                                  const SolveOptions& options = {}) {
    target.validate(domain);
    const Grid grid = build_grid(domain, J);
    const CanonicalSystem sys = canonicalize_params(params, drift, domain);
    const LinearSystem system = assemble_ep_system(sys, grid, target, options.scheme);
    Profile profile;
    profile.kind = ProfileKind::escape_probability;
    profile.xs = grid.interior_original();
    profile.values = solve_linear(system, options.method);
    for (std::size_t i = 0; i < profile.values.size(); ++i) {
        if (profile.values[i] < -1e-8 || profile.values[i] > 1.0 + 1e-8) {
            profile.warnings.push_back("scheme quality: escape probability " +
                                       std::to_string(profile.values[i]) +
                                       " outside [0,1] at x = " + std::to_string(profile.xs[i]));
        }
    }
    return profile;
}

} // namespace levyexit
