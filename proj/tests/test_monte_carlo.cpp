#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "levyexit/monte_carlo.hpp"
#include "levyexit/stable_math.hpp"

using namespace levyexit;

TEST_CASE("path RNG streams") {
    SECTION("same seed and stream reproduce the sequence") {
        PathRng a(42, 7), b(42, 7);
        for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    }
    SECTION("different streams decorrelate") {
        PathRng a(42, 7), b(42, 8);
        int equal = 0;
        for (int i = 0; i < 64; ++i) equal += a.next() == b.next();
        CHECK(equal == 0);
    }
    SECTION("uniforms live strictly inside (0,1)") {
        PathRng rng(1, 0);
        for (int i = 0; i < 10000; ++i) {
            const double u = rng.uniform01();
            CHECK(u > 0.0);
            CHECK(u < 1.0);
        }
    }
}

TEST_CASE("stable sampler distributional checks") {
    SECTION("alpha = 1 is symmetric about zero") {
        PathRng rng(2024, 0);
        const int n = 100000;
        std::vector<double> draws(n);
        for (double& d : draws) d = sample_standard_stable(StabilityIndex(1.0), rng);
        std::nth_element(draws.begin(), draws.begin() + n / 2, draws.end());
        CHECK(std::abs(draws[n / 2]) < 0.02);
    }
    SECTION("Cauchy tail probability") {
        PathRng rng(5, 0);
        const int n = 200000;
        int hits = 0;
        for (int i = 0; i < n; ++i)
            hits += std::abs(sample_standard_stable(StabilityIndex(1.0), rng)) > 10.0;
        const double p = 2.0 / std::numbers::pi * std::atan(0.1);
        const double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(static_cast<double>(hits) / n - p) < 4.0 * se);
    }
    SECTION("empirical characteristic function, alpha = 0.6") {
        PathRng rng(99, 0);
        const int n = 200000;
        double sum_cos = 0.0;
        for (int i = 0; i < n; ++i)
            sum_cos += std::cos(sample_standard_stable(StabilityIndex(0.6), rng));
        const double ecf = sum_cos / n;
        CHECK(std::abs(ecf - std::exp(-1.0)) < 3.5 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("polynomial lowering of drift expressions") {
    using detail::polynomial_coefficients;
    SECTION("double well with a parameter") {
        const auto p =
            polynomial_coefficients(parse_drift("x - beta*x^3").root(), {{"beta", 1.5}});
        REQUIRE(p.has_value());
        CHECK(*p == std::vector<double>{0.0, 1.0, 0.0, -1.5});
    }
    SECTION("binomial expansion") {
        const auto p = polynomial_coefficients(parse_drift("(x + 1)^2").root(), {});
        REQUIRE(p.has_value());
        CHECK(*p == std::vector<double>{1.0, 2.0, 1.0});
    }
    SECTION("division by a constant") {
        const auto p = polynomial_coefficients(parse_drift("x/2").root(), {});
        REQUIRE(p.has_value());
        CHECK(*p == std::vector<double>{0.0, 0.5});
    }
    SECTION("non-polynomial shapes bail out") {
        CHECK_FALSE(polynomial_coefficients(parse_drift("1/x").root(), {}).has_value());
        CHECK_FALSE(polynomial_coefficients(parse_drift("x/(1+x)").root(), {}).has_value());
    }
    SECTION("unbound parameter is reported") {
        CHECK_THROWS_AS(polynomial_coefficients(parse_drift("beta*x").root(), {}),
                        UnboundParameterError);
    }
}

TEST_CASE("single-path simulation") {
    const Domain dom(-1.0, 1.0);
    const SystemParams params(StabilityIndex(1.0), 1.0, 0.0);
    const DriftExpr zero = parse_drift("0");

    SECTION("starting point must be interior") {
        PathRng rng(0, 0);
        SimConfig config;
        CHECK_THROWS_AS(
            simulate_exit(params, zero, dom, 1.5, std::nullopt, config, rng),
            std::invalid_argument);
    }
    SECTION("starting next to the right boundary exits fast and mostly rightward") {
        SimConfig config{1e-3, 50.0, 1, 31};
        const TargetSet right = TargetSet::right_exterior(dom);
        int rightward = 0;
        double total_time = 0.0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            PathRng rng(31, static_cast<std::uint64_t>(i));
            const ExitRecord rec =
                simulate_exit(params, zero, dom, 0.999, right, config, rng);
            REQUIRE_FALSE(dom.contains(rec.exit_point));
            rightward += rec.landed_in_target;
            total_time += rec.exit_time;
        }
        CHECK(rightward > n / 2);
        CHECK(total_time / n < 0.5);
    }
    SECTION("zero drift from the center lands right half the time") {
        SimConfig config{1e-3, 200.0, 1, 77};
        const TargetSet right = TargetSet::right_exterior(dom);
        int hits = 0, exited = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            PathRng rng(77, static_cast<std::uint64_t>(i));
            const ExitRecord rec = simulate_exit(params, zero, dom, 0.0, right, config, rng);
            if (!rec.censored) {
                ++exited;
                hits += rec.landed_in_target;
            }
        }
        const double freq = static_cast<double>(hits) / exited;
        const double se = std::sqrt(0.25 / exited);
        CHECK(std::abs(freq - 0.5) < 3.0 * se);
    }
    SECTION("mean exit time matches the closed form") {
        // band: 3 standard errors plus an O(dt) allowance
        for (double a : {1.0, 0.5}) {
            const SystemParams p(StabilityIndex(a), 1.0, 0.0);
            const double reference = reference_met_f0(StabilityIndex(a), 0.0);
            SimConfig config{1e-3, 200.0, 1, 4242};
            double sum = 0.0, sum_sq = 0.0;
            const int n = 20000;
            for (int i = 0; i < n; ++i) {
                PathRng rng(4242, static_cast<std::uint64_t>(i));
                const ExitRecord rec =
                    simulate_exit(p, zero, dom, 0.0, std::nullopt, config, rng);
                sum += rec.exit_time;
                sum_sq += rec.exit_time * rec.exit_time;
            }
            const double mean = sum / n;
            const double sd = std::sqrt((sum_sq - n * mean * mean) / (n - 1));
            const double band = 3.0 * sd / std::sqrt(static_cast<double>(n)) + 0.05;
            INFO("alpha " << a);
            CHECK(std::abs(mean - reference) < band);
        }
    }
}

TEST_CASE("empirical statistics") {
    const Domain dom(-1.0, 1.0);
    const SystemParams params(StabilityIndex(0.8), 1.0, 0.0);
    const DriftExpr ou = parse_drift("-x");

    SECTION("bitwise reproducible across thread counts") {
        SimConfig one{1e-3, 50.0, 5000, 7, 1};
        SimConfig four{1e-3, 50.0, 5000, 7, 4};
        const Profile a = empirical_statistics(params, ou, dom, {-0.4, 0.0, 0.4}, std::nullopt, one);
        const Profile b =
            empirical_statistics(params, ou, dom, {-0.4, 0.0, 0.4}, std::nullopt, four);
        REQUIRE(a.values.size() == b.values.size());
        CHECK(std::memcmp(a.values.data(), b.values.data(),
                          a.values.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(a.stderrs.data(), b.stderrs.data(),
                          a.stderrs.size() * sizeof(double)) == 0);
    }
    SECTION("n_paths = 1 reports no standard error") {
        SimConfig config{1e-3, 50.0, 1, 3};
        const Profile p = empirical_statistics(params, ou, dom, {0.0}, std::nullopt, config);
        CHECK(p.stderrs.empty());
        CHECK(p.values.size() == 1);
    }
    SECTION("doubling the paths shrinks the standard error by about sqrt(2)") {
        SimConfig small{1e-3, 50.0, 4000, 15};
        SimConfig big{1e-3, 50.0, 8000, 15};
        const std::vector<double> pts{-0.3, 0.0, 0.3};
        const Profile a = empirical_statistics(params, ou, dom, pts, std::nullopt, small);
        const Profile b = empirical_statistics(params, ou, dom, pts, std::nullopt, big);
        const double mean_a =
            std::accumulate(a.stderrs.begin(), a.stderrs.end(), 0.0) / a.stderrs.size();
        const double mean_b =
            std::accumulate(b.stderrs.begin(), b.stderrs.end(), 0.0) / b.stderrs.size();
        const double ratio = mean_a / mean_b;
        CHECK(ratio > std::sqrt(2.0) * 0.8);
        CHECK(ratio < std::sqrt(2.0) * 1.2);
    }
    SECTION("tiny horizon censors and warns, longer horizons censor less") {
        SimConfig tiny{1e-3, 0.01, 500, 9};
        const Profile p = empirical_statistics(params, ou, dom, {0.0}, std::nullopt, tiny);
        CHECK(p.censored_fraction[0] > 0.5);
        CHECK_FALSE(p.warnings.empty());

        SimConfig mid{1e-3, 10.0, 2000, 9};
        SimConfig lng{1e-3, 100.0, 2000, 9};
        const Profile pm = empirical_statistics(params, ou, dom, {0.0}, std::nullopt, mid);
        const Profile pl = empirical_statistics(params, ou, dom, {0.0}, std::nullopt, lng);
        CHECK(pm.censored_fraction[0] >= pl.censored_fraction[0]);
        CHECK(pl.censored_fraction[0] <= 0.001);
    }
    SECTION("starting points are validated and sorted") {
        SimConfig config{1e-3, 50.0, 10, 3};
        CHECK_THROWS_AS(
            empirical_statistics(params, ou, dom, {0.0, 2.0}, std::nullopt, config),
            std::invalid_argument);
        const Profile p =
            empirical_statistics(params, ou, dom, {0.5, -0.5, 0.0}, std::nullopt, config);
        CHECK(p.xs == std::vector<double>{-0.5, 0.0, 0.5});
    }
    SECTION("Gaussian component smoke test") {
        const SystemParams mixed(StabilityIndex(1.2), 0.5, 0.8);
        SimConfig config{1e-3, 100.0, 2000, 21};
        const Profile p = empirical_statistics(mixed, ou, dom, {0.0}, std::nullopt, config);
        CHECK(p.values[0] > 0.0);
        CHECK(p.values[0] < 10.0);
        CHECK(p.censored_fraction[0] < 0.01);
    }
}
