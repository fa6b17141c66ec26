#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levyexit/csv_io.hpp"
#include "levyexit/drift_expr.hpp"
#include "levyexit/estimator.hpp"
#include "levyexit/monte_carlo.hpp"
#include "levyexit/nonlocal_solver.hpp"

namespace levyexit {

/// Command-line input that is syntactically fine for CLI11 but semantically
/// invalid (bad name=value pair, target outside the domain, ...). Exits 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace cli_detail {

inline std::pair<std::string, double> parse_key_value(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError("expected name=value, got '" + text + "'");
    const std::string name = text.substr(0, eq);
    const std::string value = text.substr(eq + 1);
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return {name, v};
    } catch (const std::exception&) {
        throw UsageError("malformed number '" + value + "' in '" + text + "'");
    }
}

inline FreeParameter parse_free_spec(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = text.find(':', start);
        if (colon == std::string::npos) {
            parts.push_back(text.substr(start));
            break;
        }
        parts.push_back(text.substr(start, colon - start));
        start = colon + 1;
    }
    if (parts.size() != 3 || parts[0].empty())
        throw UsageError("expected name:lo:hi, got '" + text + "'");
    try {
        std::size_t used_lo = 0, used_hi = 0;
        const double lo = std::stod(parts[1], &used_lo);
        const double hi = std::stod(parts[2], &used_hi);
        if (used_lo != parts[1].size() || used_hi != parts[2].size())
            throw std::invalid_argument(text);
        return {parts[0], lo, hi};
    } catch (const std::exception&) {
        throw UsageError("malformed bounds in '" + text + "'");
    }
}

inline TargetSet parse_target(const std::string& text, const Domain& domain) {
    if (text == "left") return TargetSet::left_exterior(domain);
    if (text == "right") return TargetSet::right_exterior(domain);
    if (text == "both") return TargetSet::both_exteriors(domain);
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw UsageError("target must be left, right, both or lo,hi — got '" + text + "'");
    try {
        std::size_t used_lo = 0, used_hi = 0;
        const std::string lo_text = text.substr(0, comma);
        const std::string hi_text = text.substr(comma + 1);
        const double lo = std::stod(lo_text, &used_lo);
        const double hi = std::stod(hi_text, &used_hi);
        if (used_lo != lo_text.size() || used_hi != hi_text.size())
            throw std::invalid_argument(text);
        TargetSet t = TargetSet::interval(lo, hi);
        t.validate(domain);
        return t;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError("invalid target '" + text + "': " + e.what());
    }
}

inline ParamEnv parse_env(const std::vector<std::string>& pairs) {
    ParamEnv env;
    for (const auto& p : pairs) {
        const auto [name, value] = parse_key_value(p);
        if (env.count(name)) throw UsageError("parameter '" + name + "' given twice");
        env[name] = value;
    }
    return env;
}

inline std::vector<double> read_x0_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open x0 list '" + path.string() + "'");
    std::vector<double> xs;
    std::string token;
    while (in >> token) {
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            xs.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("malformed number '" + token + "' in '" + path.string() + "'");
        }
    }
    if (xs.empty()) throw UsageError("x0 list '" + path.string() + "' contains no points");
    return xs;
}

inline void print_warnings(const Profile& profile) {
    for (const auto& w : profile.warnings) std::cerr << "warning: " << w << "\n";
}

inline void write_estimate_csv(const EstimateResult& result, const std::filesystem::path& path) {
    std::string out = "parameter,value\n";
    for (const auto& [name, value] : result.best)
        out += name + "," + detail::format_double(value) + "\n";
    out += "objective," + detail::format_double(result.objective_value) + "\n";
    out += "evaluations," + std::to_string(result.evaluations) + "\n";
    detail::write_text_atomic(path, out);
}

inline void write_table(const std::filesystem::path& path, const std::string& header,
                        const std::vector<std::vector<double>>& rows) {
    std::string out = header + "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += detail::format_double(row[i]);
        }
        out += '\n';
    }
    detail::write_text_atomic(path, out);
}

struct ForwardArgs {
    std::string drift;
    double alpha = 0.0;
    double epsilon = 1.0;
    double d = 0.0;
    std::vector<std::string> params;
    std::vector<double> domain;
    int grid = 200;
    std::string scheme = "simplified";
    std::string method = "lu";
    int gmres_restart = 30;
    double gmres_tol = 1e-12;
    int gmres_maxiter = 500;
    std::string target;
    std::string out;
};

inline void add_forward_options(CLI::App* cmd, ForwardArgs& args, bool with_target) {
    cmd->add_option("--drift", args.drift, "drift expression f(x), e.g. \"-x\" or \"x - beta*x^3\"")
        ->required();
    cmd->add_option("--alpha", args.alpha, "stability index in (0,2)")->required();
    cmd->add_option("--epsilon", args.epsilon, "noise intensity")->capture_default_str();
    cmd->add_option("--d", args.d, "Gaussian diffusion coefficient")->capture_default_str();
    cmd->add_option("--param", args.params, "drift parameter binding name=value (repeatable)");
    cmd->add_option("--domain", args.domain, "domain endpoints a b")->expected(2)->required();
    cmd->add_option("--grid", args.grid, "grid resolution J (2J-1 interior nodes)")->required();
    cmd->add_option("--scheme", args.scheme, "discretization scheme")->capture_default_str()
        ->check(CLI::IsMember({"simplified", "split"}));
    cmd->add_option("--method", args.method, "linear solver")->capture_default_str()
        ->check(CLI::IsMember({"lu", "gmres"}));
    cmd->add_option("--gmres-restart", args.gmres_restart, "GMRES restart length")->capture_default_str();
    cmd->add_option("--gmres-tol", args.gmres_tol, "GMRES relative residual tolerance")->capture_default_str();
    cmd->add_option("--gmres-maxiter", args.gmres_maxiter, "GMRES max iterations")->capture_default_str();
    if (with_target)
        cmd->add_option("--target", args.target, "landing set: left|right|both|lo,hi")->required();
    cmd->add_option("--out", args.out, "output CSV path")->required();
}

inline SolveOptions solve_options_from(const ForwardArgs& args) {
    SolveOptions opt;
    opt.scheme = args.scheme == "split" ? Scheme::split : Scheme::simplified;
    opt.method = args.method == "gmres"
                     ? LinearMethod::gmres(args.gmres_restart, args.gmres_tol, args.gmres_maxiter)
                     : LinearMethod::lu();
    return opt;
}

inline int run_forward(const ForwardArgs& args, bool escape) {
    const Domain domain(args.domain[0], args.domain[1]);
    const DriftExpr drift = parse_drift(args.drift);
    const ParamEnv env = parse_env(args.params);
    for (const auto& name : free_parameters(drift))
        if (!env.count(name))
            throw UsageError("drift parameter '" + name + "' needs --param " + name + "=VALUE");
    const SystemParams params(StabilityIndex(args.alpha), args.epsilon, args.d, env);
    const SolveOptions options = solve_options_from(args);

    Profile profile;
    if (escape) {
        const TargetSet target = parse_target(args.target, domain);
        profile = escape_probability(params, drift, domain, target, args.grid, options);
    } else {
        profile = mean_exit_time(params, drift, domain, args.grid, options);
    }
    print_warnings(profile);
    write_profile(profile, args.out);
    std::cout << "wrote " << profile.xs.size() << " nodes to " << args.out << "\n";
    return 0;
}

// Data series behind the worked example figures: synthetic observations from
// a fine forward solve at the true parameters, the misfit curve or surface
// over the free parameters, and the recovered estimate. Observations are
// taken on the interior 90% of the domain; the outermost nodes carry the
// largest discretization error and would bias the estimate between the two
// grids.
inline ObservationSet interior_observations(const Profile& profile, const Domain& domain,
                                            std::optional<TargetSet> target,
                                            double fraction = 0.9) {
    ObservationSet obs;
    obs.kind = profile.kind;
    obs.target = std::move(target);
    const double keep = fraction * 0.5 * (domain.b - domain.a);
    const double center = domain.center();
    for (std::size_t i = 0; i < profile.xs.size(); ++i) {
        if (std::abs(profile.xs[i] - center) <= keep) {
            obs.xs.push_back(profile.xs[i]);
            obs.values.push_back(profile.values[i]);
        }
    }
    return obs;
}

inline int run_figures(int which, const std::filesystem::path& dir, int threads) {
    (void)threads;
    std::filesystem::create_directories(dir);
    const int obs_grid = 400;
    const int est_grid = 200;

    const auto make_problem = [&](const ObservationSet& obs, const std::string& drift_text,
                                  const Domain& domain, std::vector<FreeParameter> free,
                                  ParamEnv fixed) {
        EstimationProblem problem{obs, drift_text, domain, std::move(free), std::move(fixed)};
        problem.solver.J = est_grid;
        problem.optimizer.max_evaluations = 600;
        return problem;
    };

    if (which == 1 || which == 2) {
        const bool met = which == 1;
        const std::string drift_text = met ? "-x" : "x - x^3";
        const double truth = met ? 0.6 : 1.5;
        const DriftExpr drift = parse_drift(drift_text);
        const std::string stem = "fig" + std::to_string(which);
        for (const auto& [label, domain] :
             {std::pair<std::string, Domain>{"small", Domain(-0.1, 0.1)},
              std::pair<std::string, Domain>{"large", Domain(-2.0, 2.0)}}) {
            const SystemParams params(StabilityIndex(truth), 1.0, 0.0);
            std::optional<TargetSet> target;
            if (!met) target = TargetSet::right_exterior(domain);
            const Profile obs_profile =
                met ? mean_exit_time(params, drift, domain, obs_grid)
                    : escape_probability(params, drift, domain, *target, obs_grid);
            const ObservationSet obs = interior_observations(obs_profile, domain, target);
            Profile obs_out;
            obs_out.kind = obs.kind;
            obs_out.xs = obs.xs;
            obs_out.values = obs.values;
            write_profile(obs_out, dir / (stem + "_observations_" + label + ".csv"));

            EstimationProblem problem =
                make_problem(obs, drift_text, domain, {{"alpha", 0.1, 1.9}},
                             {{"epsilon", 1.0}, {"d", 0.0}});

            std::vector<std::vector<double>> curve;
            for (double a = 0.1; a <= 1.9 + 1e-9; a += 0.05) {
                try {
                    const SystemParams pa(StabilityIndex(a), 1.0, 0.0);
                    const Profile model =
                        met ? mean_exit_time(pa, drift, domain, est_grid)
                            : escape_probability(pa, drift, domain, *target, est_grid);
                    curve.push_back({a, relative_l2_objective(model, obs)});
                } catch (const std::exception&) {
                    // skip non-computable abscissae in the diagnostic curve
                }
            }
            write_table(dir / (stem + "_objective_" + label + ".csv"), "alpha,objective", curve);

            const EstimateResult est = estimate_parameters(problem);
            write_estimate_csv(est, dir / (stem + "_estimate_" + label + ".csv"));
            std::cout << stem << " " << label << ": alpha_hat = " << est.best.at("alpha")
                      << " (true " << truth << ")\n";
        }
        return 0;
    }

    if (which == 3 || which == 4) {
        const bool met = which == 3;
        const std::string drift_text = "x - beta*x^3";
        const double alpha_truth = met ? 0.6 : 1.5;
        const double beta_truth = met ? 1.5 : 0.4;
        // the mean-exit-time variant lives on (-1,1): at alpha = 0.6 the
        // scheme turns oscillatory where the cubic drift is strong, and on
        // (-2,2) the drift reaches |f| = 2 beta at the boundary
        const Domain domain = met ? Domain(-1.0, 1.0) : Domain(-2.0, 2.0);
        const std::string stem = "fig" + std::to_string(which);
        const DriftExpr drift = parse_drift(drift_text);
        const SystemParams params(StabilityIndex(alpha_truth), 1.0, 0.0,
                                  {{"beta", beta_truth}});
        std::optional<TargetSet> target;
        if (!met) target = TargetSet::right_exterior(domain);
        const Profile obs_profile =
            met ? mean_exit_time(params, drift, domain, obs_grid)
                : escape_probability(params, drift, domain, *target, obs_grid);
        const ObservationSet obs = interior_observations(obs_profile, domain, target);
        Profile obs_out;
        obs_out.kind = obs.kind;
        obs_out.xs = obs.xs;
        obs_out.values = obs.values;
        write_profile(obs_out, dir / (stem + "_observations.csv"));

        EstimationProblem problem = make_problem(
            obs, drift_text, domain, {{"alpha", 0.1, 1.9}, {"beta", 0.1, 3.0}},
            {{"epsilon", 1.0}, {"d", 0.0}});

        std::vector<std::vector<double>> surface;
        for (double a = 0.2; a <= 1.8 + 1e-9; a += 0.08) {
            for (double bpar = 0.2; bpar <= 2.8 + 1e-9; bpar += 0.13) {
                try {
                    const SystemParams pa(StabilityIndex(a), 1.0, 0.0, {{"beta", bpar}});
                    const Profile model =
                        met ? mean_exit_time(pa, drift, domain, 100)
                            : escape_probability(pa, drift, domain, *target, 100);
                    surface.push_back({a, bpar, relative_l2_objective(model, obs)});
                } catch (const std::exception&) {
                }
            }
        }
        write_table(dir / (stem + "_objective_surface.csv"), "alpha,beta,objective", surface);

        const EstimateResult est = estimate_parameters(problem);
        write_estimate_csv(est, dir / (stem + "_estimate.csv"));
        std::cout << stem << ": alpha_hat = " << est.best.at("alpha") << " (true " << alpha_truth
                  << "), beta_hat = " << est.best.at("beta") << " (true " << beta_truth << ")\n";
        return 0;
    }
    throw UsageError("--which must be 1, 2, 3 or 4");
}

} // namespace cli_detail

/// Entry point of the command-line tool; args excludes the program name.
/// Exit codes: 0 success, 1 usage/input error, 2 numerical failure.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"mean exit time / escape probability solver and parameter estimator for "
                 "scalar SDEs driven by symmetric alpha-stable noise"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key = value file with option defaults");
    int threads = 0;
    app.add_option("--threads", threads, "worker thread count (0 = all logical processors)");

    cli_detail::ForwardArgs met_args, ep_args;
    CLI::App* solve_met = app.add_subcommand("solve-met", "solve the mean exit time problem");
    cli_detail::add_forward_options(solve_met, met_args, false);
    CLI::App* solve_ep = app.add_subcommand("solve-ep", "solve the escape probability problem");
    cli_detail::add_forward_options(solve_ep, ep_args, true);

    // estimate
    std::string est_obs, est_kind, est_drift, est_target, est_scheme = "simplified",
                                                          est_method = "lu", est_out;
    std::vector<std::string> est_free, est_fixed;
    std::vector<double> est_domain;
    int est_grid = 200, est_multistart = 3, est_maxeval = 200;
    double est_xtol = 1e-4;
    CLI::App* estimate = app.add_subcommand("estimate", "recover parameters from observations");
    estimate->add_option("--obs", est_obs, "observation CSV (header x,value)")
        ->required()
        ->check(CLI::ExistingFile);
    estimate->add_option("--kind", est_kind, "observation kind")
        ->required()
        ->check(CLI::IsMember({"met", "ep"}));
    estimate->add_option("--drift", est_drift, "drift expression")->required();
    estimate->add_option("--domain", est_domain, "domain endpoints a b")->expected(2)->required();
    estimate->add_option("--free", est_free, "free parameter name:lo:hi (repeatable)")->required();
    estimate->add_option("--fixed", est_fixed, "fixed parameter name=value (repeatable)");
    estimate->add_option("--target", est_target, "landing set for ep observations");
    estimate->add_option("--grid", est_grid, "solver grid J for the inversion")->capture_default_str();
    estimate->add_option("--scheme", est_scheme, "discretization scheme")->capture_default_str()
        ->check(CLI::IsMember({"simplified", "split"}));
    estimate->add_option("--method", est_method, "linear solver")->capture_default_str()
        ->check(CLI::IsMember({"lu", "gmres"}));
    estimate->add_option("--xtol", est_xtol, "parameter tolerance")->capture_default_str();
    estimate->add_option("--multistart", est_multistart, "lattice starts per axis")->capture_default_str();
    estimate->add_option("--max-eval", est_maxeval, "objective evaluation budget")->capture_default_str();
    estimate->add_option("--out", est_out, "output CSV path")->required();

    // simulate
    std::string sim_drift, sim_target, sim_x0_list, sim_out;
    std::vector<std::string> sim_params;
    std::vector<double> sim_domain;
    double sim_alpha = 0.0, sim_epsilon = 1.0, sim_d = 0.0, sim_x0 = 0.0, sim_dt = 1e-4,
           sim_max_time = 100.0;
    long sim_paths = 0;
    std::uint64_t sim_seed = 0;
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo exit statistics");
    simulate->add_option("--drift", sim_drift, "drift expression")->required();
    simulate->add_option("--alpha", sim_alpha, "stability index in (0,2)")->required();
    simulate->add_option("--epsilon", sim_epsilon, "noise intensity")->capture_default_str();
    simulate->add_option("--d", sim_d, "Gaussian diffusion coefficient")->capture_default_str();
    simulate->add_option("--param", sim_params, "drift parameter binding name=value");
    simulate->add_option("--domain", sim_domain, "domain endpoints a b")->expected(2)->required();
    auto* x0_opt = simulate->add_option("--x0", sim_x0, "single starting point");
    auto* x0_list_opt =
        simulate->add_option("--x0-list", sim_x0_list, "file of starting points (one per line)")
            ->check(CLI::ExistingFile)
            ->excludes(x0_opt);
    simulate->add_option("--paths", sim_paths, "paths per starting point")->required();
    simulate->add_option("--dt", sim_dt, "Euler-Maruyama step")->capture_default_str();
    simulate->add_option("--max-time", sim_max_time, "simulation horizon")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
    simulate->add_option("--target", sim_target,
                         "landing set left|right|both|lo,hi (escape probability mode)");
    simulate->add_option("--out", sim_out, "output CSV path")->required();

    // figures
    int fig_which = 0;
    std::string fig_dir;
    CLI::App* figures =
        app.add_subcommand("figures", "regenerate the data series behind the example figures");
    figures->add_option("--which", fig_which, "figure number 1-4")->required();
    figures->add_option("--out", fig_dir, "output directory")->required();

    try {
        std::reverse(args.begin(), args.end());  // CLI11 consumes args back to front
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (solve_met->parsed()) return cli_detail::run_forward(met_args, false);
        if (solve_ep->parsed()) return cli_detail::run_forward(ep_args, true);

        if (estimate->parsed()) {
            const Domain domain(est_domain[0], est_domain[1]);
            const ProfileKind kind =
                est_kind == "met" ? ProfileKind::mean_exit_time : ProfileKind::escape_probability;
            ObservationSet obs = read_observations(est_obs, kind);
            if (kind == ProfileKind::escape_probability) {
                if (est_target.empty())
                    throw UsageError("--target is required for --kind ep");
                obs.target = cli_detail::parse_target(est_target, domain);
            }
            EstimationProblem problem;
            problem.observations = std::move(obs);
            problem.drift_text = est_drift;
            problem.domain = domain;
            for (const auto& spec : est_free)
                problem.free.push_back(cli_detail::parse_free_spec(spec));
            problem.fixed = cli_detail::parse_env(est_fixed);
            problem.solver.J = est_grid;
            problem.solver.scheme = est_scheme == "split" ? Scheme::split : Scheme::simplified;
            problem.solver.method = est_method == "gmres" ? LinearMethod::gmres() : LinearMethod::lu();
            problem.optimizer = {est_xtol, est_multistart, est_maxeval};
            const EstimateResult result = estimate_parameters(problem);
            cli_detail::write_estimate_csv(result, est_out);
            for (const auto& [name, value] : result.best)
                std::cout << name << " = " << value << "\n";
            std::cout << "objective = " << result.objective_value << " after "
                      << result.evaluations << " forward solves\n";
            return 0;
        }

        if (simulate->parsed()) {
            const Domain domain(sim_domain[0], sim_domain[1]);
            const DriftExpr drift = parse_drift(sim_drift);
            const ParamEnv env = cli_detail::parse_env(sim_params);
            for (const auto& name : free_parameters(drift))
                if (!env.count(name))
                    throw UsageError("drift parameter '" + name + "' needs --param " + name +
                                     "=VALUE");
            const SystemParams params(StabilityIndex(sim_alpha), sim_epsilon, sim_d, env);
            std::optional<TargetSet> target;
            if (!sim_target.empty()) target = cli_detail::parse_target(sim_target, domain);
            std::vector<double> xs;
            if (x0_list_opt->count())
                xs = cli_detail::read_x0_list(sim_x0_list);
            else if (x0_opt->count())
                xs = {sim_x0};
            else
                throw UsageError("one of --x0 or --x0-list is required");
            SimConfig config{sim_dt, sim_max_time, sim_paths, sim_seed, threads};
            const Profile profile =
                empirical_statistics(params, drift, domain, xs, target, config);
            cli_detail::print_warnings(profile);
            write_profile(profile, sim_out);
            std::cout << "wrote " << profile.xs.size() << " rows to " << sim_out << "\n";
            return 0;
        }

        if (figures->parsed()) return cli_detail::run_figures(fig_which, fig_dir, threads);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

} // namespace levyexit
