#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levyexit/drift_expr.hpp"
#include "levyexit/nonlocal_solver.hpp"

namespace levyexit {

/// Observed mean-exit-time or escape-probability values at points inside D.
struct ObservationSet {
    std::vector<double> xs;
    std::vector<double> values;
    ProfileKind kind = ProfileKind::mean_exit_time;
    std::optional<TargetSet> target;  // required for escape-probability kind

    void validate() const {
        if (xs.empty() || xs.size() != values.size())
            throw std::invalid_argument("observations: need matching non-empty xs and values");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(xs[i]) || !std::isfinite(values[i]))
                throw std::invalid_argument("observations: non-finite entry");
            if (i > 0 && !(xs[i] > xs[i - 1]))
                throw std::invalid_argument("observations: xs must be strictly increasing");
            if (kind == ProfileKind::escape_probability &&
                (values[i] < 0.0 || values[i] > 1.0))
                throw std::invalid_argument("observations: escape probabilities must lie in [0,1]");
        }
        if (kind == ProfileKind::escape_probability && !target)
            throw std::invalid_argument("observations: escape-probability data needs a target set");
    }
};

namespace detail {

// Piecewise-linear interpolation of a profile; x may overshoot the node range
// by a relative 1e-9 (grids built at different resolutions place the shared
// nodes a few ulp apart).
inline double interpolate_profile(const Profile& p, double x) {
    const auto& xs = p.xs;
    if (xs.size() < 2) throw std::invalid_argument("profile too short to interpolate");
    const double slack = 1e-9 * (1.0 + std::abs(x));
    if (x <= xs.front()) {
        if (xs.front() - x > slack)
            throw std::invalid_argument("interpolation point " + std::to_string(x) +
                                        " below profile range");
        return p.values.front();
    }
    if (x >= xs.back()) {
        if (x - xs.back() > slack)
            throw std::invalid_argument("interpolation point " + std::to_string(x) +
                                        " above profile range");
        return p.values.back();
    }
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return p.values[lo] + t * (p.values[hi] - p.values[lo]);
}

} // namespace detail

/// Relative L2 misfit sum_i (model(x_i) - value_i)^2 / sum_i value_i^2 with
/// the model profile interpolated onto the observation points.
inline double relative_l2_objective(const Profile& model, const ObservationSet& obs) {
    obs.validate();
    double denom = 0.0;
    for (double v : obs.values) denom += v * v;
    if (denom == 0.0)
        throw std::invalid_argument("relative_l2_objective: all-zero observations");
    double num = 0.0;
    for (std::size_t i = 0; i < obs.xs.size(); ++i) {
        const double diff = detail::interpolate_profile(model, obs.xs[i]) - obs.values[i];
        num += diff * diff;
    }
    return num / denom;
}

struct ScalarMinimizeResult {
    double argmin = 0.0;
    double value = 0.0;
    int evaluations = 0;
};

/// Bounded scalar minimization: Brent-style hybrid of golden-section search
/// and successive parabolic interpolation. Parabolic steps are taken only
/// when they land inside the bracket and shrink it; golden section is the
/// fallback. Stops when the bracket width drops below xtol * (1 + |argmin|)
/// or after max_eval objective calls. The result is the best point ever
/// evaluated. Throws if the objective returns a non-finite value.
inline ScalarMinimizeResult minimize_scalar(const std::function<double(double)>& objective,
                                            double lo, double hi, double xtol = 1e-6,
                                            int max_eval = 200) {
    if (!(lo < hi)) throw std::invalid_argument("minimize_scalar: requires lo < hi");
    if (!(xtol > 0.0)) throw std::invalid_argument("minimize_scalar: xtol must be positive");
    if (max_eval < 3) throw std::invalid_argument("minimize_scalar: max_eval too small");

    constexpr double golden = 0.3819660112501051;  // (3 - sqrt 5) / 2
    double best_x = 0.0, best_f = std::numeric_limits<double>::infinity();
    int evals = 0;
    const auto eval = [&](double u) {
        const double f = objective(u);
        ++evals;
        if (!std::isfinite(f))
            throw std::runtime_error("minimize_scalar: objective is not finite at x = " +
                                     std::to_string(u));
        if (f < best_f) {
            best_f = f;
            best_x = u;
        }
        return f;
    };

    double a = lo, b = hi;
    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = eval(x), fw = fx, fv = fx;
    double step = 0.0, prev_step = 0.0;

    while (evals < max_eval && (b - a) > xtol * (1.0 + std::abs(x))) {
        const double mid = 0.5 * (a + b);
        const double tiny = 1e-11 * (1.0 + std::abs(x));

        double trial = 0.0;
        bool have_parabolic = false;
        if (std::abs(prev_step) > tiny) {
            // parabola through (v, fv), (w, fw), (x, fx)
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            if (std::isfinite(p) && std::isfinite(q) && q != 0.0 &&
                std::abs(p) < std::abs(0.5 * q * prev_step) && p > q * (a - x) &&
                p < q * (b - x)) {
                trial = p / q;
                have_parabolic = true;
            }
        }
        prev_step = step;
        if (!have_parabolic) {
            const double side = x < mid ? b - x : a - x;
            trial = golden * side;
            prev_step = side;
        }
        step = std::abs(trial) >= tiny ? trial : (trial >= 0.0 ? tiny : -tiny);
        const double u = x + step;
        const double fu = eval(u);

        if (fu <= fx) {
            if (u < x)
                b = x;
            else
                a = x;
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if (u < x)
                a = u;
            else
                b = u;
            if (fu <= fw || w == x) {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u;
                fv = fu;
            }
        }
    }
    return {best_x, best_f, evals};
}

struct BoxBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    void validate() const {
        if (lower.empty() || lower.size() != upper.size())
            throw std::invalid_argument("box bounds: need matching non-empty lower/upper");
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
                throw std::invalid_argument("box bounds: require finite lower < upper");
    }
};

struct MultiMinimizeOptions {
    int multistart = 3;        // lattice points per axis
    int max_evaluations = 200; // total objective budget
    double xtol = 1e-4;
};

struct MultiMinimizeResult {
    std::vector<double> argmin;
    double value = 0.0;
    int evaluations = 0;
};

/// Box-constrained Nelder-Mead in logit-transformed coordinates (iterates can
/// never leave the box), restarted from a coarse lattice of
/// multistart^dim points ranked by their objective value. Starts with a
/// non-finite objective are skipped; if every start fails the search throws.
inline MultiMinimizeResult minimize_multi(
    const std::function<double(const std::vector<double>&)>& objective, const BoxBounds& bounds,
    const MultiMinimizeOptions& options = {}) {
    bounds.validate();
    const std::size_t dim = bounds.lower.size();
    if (dim < 2)
        throw std::invalid_argument("minimize_multi: use minimize_scalar for one parameter");
    if (options.multistart < 1 || options.max_evaluations < 1)
        throw std::invalid_argument("minimize_multi: bad options");

    const auto to_v = [&](const std::vector<double>& y) {
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-y[i]));
            v[i] = bounds.lower[i] + (bounds.upper[i] - bounds.lower[i]) * s;
        }
        return v;
    };

    std::vector<double> best_v;
    double best_f = std::numeric_limits<double>::infinity();
    int evals = 0;
    const auto eval_v = [&](const std::vector<double>& v) {
        const double f = objective(v);
        ++evals;
        if (std::isfinite(f) && f < best_f) {
            best_f = f;
            best_v = v;
        }
        return f;
    };
    const auto eval_y = [&](const std::vector<double>& y) {
        const double f = eval_v(to_v(y));
        // repel the simplex from failed evaluations without poisoning it
        return std::isfinite(f) ? f : 1e300;
    };

    // coarse start lattice: multistart midpoints per axis, all combinations
    const int m = options.multistart;
    long lattice_size = 1;
    for (std::size_t i = 0; i < dim; ++i) {
        lattice_size *= m;
        if (lattice_size > 100000) throw std::invalid_argument("minimize_multi: lattice too large");
    }
    struct Start {
        std::vector<double> y;
        double f;
    };
    std::vector<Start> starts;
    starts.reserve(static_cast<std::size_t>(lattice_size));
    for (long idx = 0; idx < lattice_size && evals < options.max_evaluations; ++idx) {
        long rem = idx;
        std::vector<double> y(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const int t = static_cast<int>(rem % m);
            rem /= m;
            const double frac = (t + 0.5) / m;
            y[i] = std::log(frac / (1.0 - frac));
        }
        const double f = eval_v(to_v(y));
        if (std::isfinite(f)) starts.push_back({std::move(y), f});
    }
    if (starts.empty())
        throw std::runtime_error("minimize_multi: objective failed at every start point");
    std::stable_sort(starts.begin(), starts.end(),
                     [](const Start& a, const Start& b) { return a.f < b.f; });

    // Nelder-Mead from each start, best-ranked first; each start takes half
    // the remaining budget so the most promising one gets room to converge
    for (std::size_t s = 0; s < starts.size() && evals < options.max_evaluations; ++s) {
        const int budget = std::max(40, (options.max_evaluations - evals) / 2);
        const int stop_at = std::min(options.max_evaluations, evals + budget);

        const std::size_t np = dim + 1;
        std::vector<std::vector<double>> simplex(np, starts[s].y);
        std::vector<double> fs(np);
        fs[0] = starts[s].f;
        for (std::size_t i = 1; i < np; ++i) {
            simplex[i][i - 1] += 0.5;
            if (evals >= stop_at) break;
            fs[i] = eval_y(simplex[i]);
        }

        while (evals < stop_at) {
            std::vector<std::size_t> order(np);
            for (std::size_t i = 0; i < np; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
            const std::size_t ibest = order[0], iworst = order[np - 1],
                              isecond = order[np - 2];

            // converged? measure the simplex in original coordinates
            const std::vector<double> vb = to_v(simplex[ibest]);
            double spread = 0.0;
            for (std::size_t i = 0; i < np; ++i) {
                const std::vector<double> vi = to_v(simplex[i]);
                for (std::size_t k = 0; k < dim; ++k)
                    spread = std::max(spread, std::abs(vi[k] - vb[k]) / (1.0 + std::abs(vb[k])));
            }
            if (spread <= options.xtol &&
                fs[iworst] - fs[ibest] <= 1e-12 * (1.0 + std::abs(fs[ibest])))
                break;

            std::vector<double> centroid(dim, 0.0);
            for (std::size_t i = 0; i < np; ++i) {
                if (i == iworst) continue;
                for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i][k];
            }
            for (double& c : centroid) c /= static_cast<double>(dim);

            const auto blend = [&](double t) {
                std::vector<double> y(dim);
                for (std::size_t k = 0; k < dim; ++k)
                    y[k] = centroid[k] + t * (simplex[iworst][k] - centroid[k]);
                return y;
            };

            const std::vector<double> reflected = blend(-1.0);
            const double fr = eval_y(reflected);
            if (fr < fs[ibest] && evals < stop_at) {
                const std::vector<double> expanded = blend(-2.0);
                const double fe = eval_y(expanded);
                simplex[iworst] = fe < fr ? expanded : reflected;
                fs[iworst] = std::min(fe, fr);
            } else if (fr < fs[isecond]) {
                simplex[iworst] = reflected;
                fs[iworst] = fr;
            } else if (evals < stop_at) {
                const bool outside = fr < fs[iworst];
                const std::vector<double> contracted = blend(outside ? -0.5 : 0.5);
                const double fc = eval_y(contracted);
                if (fc < std::min(fr, fs[iworst])) {
                    simplex[iworst] = contracted;
                    fs[iworst] = fc;
                } else {
                    // shrink toward the best vertex
                    for (std::size_t i = 0; i < np && evals < stop_at; ++i) {
                        if (i == ibest) continue;
                        for (std::size_t k = 0; k < dim; ++k)
                            simplex[i][k] = 0.5 * (simplex[i][k] + simplex[ibest][k]);
                        fs[i] = eval_y(simplex[i]);
                    }
                }
            }
        }
    }

    if (best_v.empty()) throw std::runtime_error("minimize_multi: no finite objective value");
    return {best_v, best_f, evals};
}

struct FreeParameter {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
};

struct EstimatorSolverConfig {
    int J = 200;
    Scheme scheme = Scheme::simplified;
    LinearMethod method{};
};

struct EstimatorOptimizerConfig {
    double xtol = 1e-4;
    int multistart = 3;
    int max_evaluations = 200;
};

/// Full description of one inverse problem: what was observed, the drift
/// family, which of {alpha, epsilon, d, drift parameters} are free (with
/// bounds) and which are fixed, plus solver and optimizer settings.
struct EstimationProblem {
    ObservationSet observations;
    std::string drift_text;
    Domain domain{-1.0, 1.0};
    std::vector<FreeParameter> free;
    ParamEnv fixed;
    EstimatorSolverConfig solver{};
    EstimatorOptimizerConfig optimizer{};
};

struct TraceEntry {
    std::vector<double> params;  // free-parameter values, problem order
    double objective = 0.0;
};

struct EstimateResult {
    ParamEnv best;  // complete assignment: alpha, epsilon, d and drift parameters
    double objective_value = 0.0;
    int evaluations = 0;
    std::vector<TraceEntry> trace;
};

namespace detail {

constexpr double estimator_penalty = 1e300;

inline bool is_builtin_param(const std::string& name) {
    return name == "alpha" || name == "epsilon" || name == "d";
}

} // namespace detail

/// Estimate the free parameters by minimizing the relative L2 misfit between
/// the forward solve and the observations: Brent for one free parameter,
/// multistart Nelder-Mead otherwise. Forward-solver failures at probed
/// parameters enter the trace with objective +inf and are treated as a huge
/// finite penalty by the optimizer; estimation fails only if no probe ever
/// succeeds.
inline EstimateResult estimate_parameters(const EstimationProblem& problem) {
    problem.observations.validate();
    if (problem.free.empty())
        throw std::invalid_argument("estimation: at least one free parameter required");
    for (double x : problem.observations.xs)
        if (!problem.domain.contains(x))
            throw std::invalid_argument("estimation: observation point " + std::to_string(x) +
                                        " is outside the domain");

    const DriftExpr drift = parse_drift(problem.drift_text);
    const std::vector<std::string> drift_params = free_parameters(drift);

    // every referenced parameter must be fixed or free, none may be both
    for (const auto& fp : problem.free) {
        if (!(std::isfinite(fp.lower) && std::isfinite(fp.upper) && fp.lower < fp.upper))
            throw std::invalid_argument("estimation: bad bounds for '" + fp.name + "'");
        if (problem.fixed.count(fp.name))
            throw std::invalid_argument("estimation: '" + fp.name + "' is both fixed and free");
        if (fp.name == "alpha" && !(fp.lower > 0.0 && fp.upper < 2.0))
            throw std::invalid_argument("estimation: alpha bounds must lie inside (0, 2)");
        const bool known = detail::is_builtin_param(fp.name) ||
                           std::find(drift_params.begin(), drift_params.end(), fp.name) !=
                               drift_params.end();
        if (!known)
            throw std::invalid_argument("estimation: unknown free parameter '" + fp.name + "'");
    }
    const auto resolved = [&](const std::string& name) {
        if (problem.fixed.count(name)) return true;
        for (const auto& fp : problem.free)
            if (fp.name == name) return true;
        return false;
    };
    for (const auto& name : drift_params)
        if (!resolved(name))
            throw std::invalid_argument("estimation: drift parameter '" + name +
                                        "' is neither fixed nor free");
    for (const char* name : {"alpha", "epsilon"})
        if (!resolved(name))
            throw std::invalid_argument(std::string("estimation: '") + name +
                                        "' must be fixed or free");

    // restrict observations to what the estimation grid can represent
    const Grid grid = build_grid(problem.domain, problem.solver.J);
    const double xmin = grid.from_canonical(-1.0 + grid.h);
    const double xmax = grid.from_canonical(1.0 - grid.h);
    ObservationSet obs;
    obs.kind = problem.observations.kind;
    obs.target = problem.observations.target;
    for (std::size_t i = 0; i < problem.observations.xs.size(); ++i) {
        const double x = problem.observations.xs[i];
        const double slack = 1e-9 * (1.0 + std::abs(x));
        if (x >= xmin - slack && x <= xmax + slack) {
            obs.xs.push_back(x);
            obs.values.push_back(problem.observations.values[i]);
        }
    }
    if (obs.xs.empty())
        throw std::invalid_argument("estimation: no observation inside the solver node range");

    std::vector<TraceEntry> trace;
    const auto evaluate = [&](const std::vector<double>& values) {
        ParamEnv env = problem.fixed;
        for (std::size_t i = 0; i < problem.free.size(); ++i)
            env[problem.free[i].name] = values[i];
        if (!env.count("d")) env["d"] = 0.0;
        double objective;
        try {
            SystemParams params(StabilityIndex(env.at("alpha")), env.at("epsilon"), env.at("d"),
                                env);
            const SolveOptions solve_options{problem.solver.scheme, problem.solver.method};
            const Profile model =
                obs.kind == ProfileKind::mean_exit_time
                    ? mean_exit_time(params, drift, problem.domain, problem.solver.J,
                                     solve_options)
                    : escape_probability(params, drift, problem.domain, *obs.target,
                                         problem.solver.J, solve_options);
            objective = relative_l2_objective(model, obs);
        } catch (const std::exception&) {
            trace.push_back({values, std::numeric_limits<double>::infinity()});
            return detail::estimator_penalty;
        }
        trace.push_back({values, objective});
        return objective;
    };

    double best_objective;
    std::vector<double> best_values;
    if (problem.free.size() == 1) {
        const auto r = minimize_scalar([&](double v) { return evaluate({v}); },
                                       problem.free[0].lower, problem.free[0].upper,
                                       problem.optimizer.xtol, problem.optimizer.max_evaluations);
        best_objective = r.value;
        best_values = {r.argmin};
    } else {
        BoxBounds box;
        for (const auto& fp : problem.free) {
            box.lower.push_back(fp.lower);
            box.upper.push_back(fp.upper);
        }
        const auto r = minimize_multi(
            [&](const std::vector<double>& v) { return evaluate(v); }, box,
            {problem.optimizer.multistart, problem.optimizer.max_evaluations,
             problem.optimizer.xtol});
        best_objective = r.value;
        best_values = r.argmin;
    }
    if (!(best_objective < detail::estimator_penalty))
        throw std::runtime_error("estimation failed: every forward solve errored");

    EstimateResult result;
    result.best = problem.fixed;
    for (std::size_t i = 0; i < problem.free.size(); ++i)
        result.best[problem.free[i].name] = best_values[i];
    if (!result.best.count("d")) result.best["d"] = 0.0;
    result.objective_value = best_objective;
    result.evaluations = static_cast<int>(trace.size());
    result.trace = std::move(trace);
    return result;
}

} // namespace levyexit
