#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "richfit/birth_death.hpp"

using namespace richfit;
using growth::Perturbation;
using growth::RichardsParams;

namespace {

const RichardsParams kBase(2.0, 0.5, 0.2, 0.0, 2.0);

bd::BdConfig fig10_config() {
    // eta=0.2, m=1, k=0.5, q=2, p=0.8, mu=1, y=1
    const double t_star = growth::switch_time(kBase, 0.8);
    return bd::BdConfig::birth_death(kBase, Perturbation::power_form(1.0, t_star), 1.0, 1);
}

// Truncation point where the remaining tail is provably tiny.
long long truncation_bound(const bd::BdConfig& cfg, double t) {
    const auto mv = bd::bd_mean_variance(cfg, t);
    return static_cast<long long>(mv.mean + 40.0 * std::sqrt(mv.variance) + 60.0);
}

double state_at(const SamplePaths& paths, std::size_t i, double t) {
    const auto& times = paths.times[i];
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - times.begin());
    return paths.values[i][idx == 0 ? 0 : idx - 1];
}

}  // namespace

TEST_CASE("configuration validation") {
    CHECK_THROWS_AS(bd::BdConfig::pure_birth(RichardsParams(2.0, 0.5, 0.2, 1.0, 2.0),
                                             Perturbation::none(), 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(bd::BdConfig::pure_birth(kBase, Perturbation::none(), 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(bd::BdConfig::birth_death(kBase, Perturbation::none(), 0.0, 2),
                    std::invalid_argument);
    // a perturbation large enough to push the birth fraction past 1 is rejected
    RichardsParams gentle(0.5, 0.9, 0.1, 0.0, 1.0);
    CHECK_THROWS_AS(
        bd::BdConfig::pure_birth(gentle, Perturbation::sigmoid_form(100.0, 1.0, 1.0, 0.5), 1),
        std::invalid_argument);

    // rho(t) stays in [0,1] on a dense grid for every accepted config
    const bd::BdConfig cfg = fig10_config();
    for (int i = 0; i <= 1000; ++i) {
        const double t = 30.0 * i / 1000.0;
        const double frac = (cfg.mu_rate() + cfg.modified_growth_rate(t)) / cfg.lambda_rate();
        CHECK(frac >= 0.0);
        CHECK(frac <= 1.0 + 1e-12);
    }
}

TEST_CASE("psi and phi") {
    const bd::BdConfig cfg = fig10_config();
    const auto at0 = bd::psi_phi(cfg, 0.0);
    CHECK(at0.psi == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(at0.phi == doctest::Approx(0.0).epsilon(1e-14));

    // pure birth: psi(t) = exp(-Lambda(t))
    const double t_star = growth::switch_time(kBase, 0.8);
    const bd::BdConfig pure =
        bd::BdConfig::pure_birth(kBase, Perturbation::power_form(1.0, t_star), 2);
    for (double t : {0.5, 1.0, 3.0, 6.0, 9.0}) {
        CHECK(bd::psi_phi(pure, t).psi ==
              doctest::Approx(std::exp(-bd::birth_intensity(pure, t))).epsilon(1e-10));
    }

    // unperturbed limit psi(inf) = (eta/(eta+1))^q = 1/36
    const bd::BdConfig plain = bd::BdConfig::pure_birth(kBase, Perturbation::none(), 2);
    CHECK(bd::psi_phi(plain, 80.0).psi == doctest::Approx(1.0 / 36.0).epsilon(1e-10));
}

TEST_CASE("transition probabilities normalize and match the closed-form moments") {
    const bd::BdConfig cfg = fig10_config();
    CHECK(bd::bd_transition_prob(cfg, 1, 0.0) == 1.0);
    CHECK(bd::bd_transition_prob(cfg, 3, 0.0) == 0.0);

    for (double t : {0.2, 0.7, 1.0, 2.0, 3.5, 5.0, 7.0}) {
        const long long x_max = truncation_bound(cfg, t);
        double total = 0.0, mean = 0.0, second = 0.0;
        for (long long x = 0; x <= x_max; ++x) {
            const double pr = bd::bd_transition_prob(cfg, x, t);
            total += pr;
            mean += static_cast<double>(x) * pr;
            second += static_cast<double>(x) * static_cast<double>(x) * pr;
        }
        CHECK(std::abs(total - 1.0) < 1e-8);
        const auto mv = bd::bd_mean_variance(cfg, t);
        CHECK(std::abs(mean - mv.mean) < 1e-6);
        if (mv.variance > 0.0)
            CHECK(std::abs((second - mean * mean) - mv.variance) < 1e-5 * mv.variance);
    }

    // the t=1 anchor: mean equals y/psi(1)
    const auto mv1 = bd::bd_mean_variance(cfg, 1.0);
    CHECK(mv1.mean == doctest::Approx(1.0 / bd::psi_phi(cfg, 1.0).psi).epsilon(1e-14));
}

TEST_CASE("conditional mean reproduces the modified growth curve") {
    const double t_star = growth::switch_time(kBase, 0.8);
    const Perturbation c = Perturbation::power_form(1.0, t_star);
    // scale the curve to x0 = y so the identity is exact
    RichardsParams scaled(2.0, 0.5, 0.2, 0.0, 3.0);
    const bd::BdConfig cfg = bd::BdConfig::birth_death(scaled, c, 0.7, 3);
    for (double t : {0.0, 1.0, 3.0, 5.5, 8.0}) {
        const auto mv = bd::bd_mean_variance(cfg, t);
        CHECK(mv.mean == doctest::Approx(growth::evaluate_modified(scaled, c, t)).epsilon(1e-10));
    }
    CHECK(bd::bd_mean_variance(cfg, 0.0).variance == 0.0);
}

TEST_CASE("extinction") {
    const bd::BdConfig cfg = fig10_config();
    CHECK(bd::extinction_probability(cfg) == 1.0);
    const bd::BdConfig pure = bd::BdConfig::pure_birth(kBase, Perturbation::none(), 2);
    CHECK(bd::extinction_probability(pure) == 0.0);

    double prev = 0.0;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
        const double p0 = bd::bd_transition_prob(cfg, 0, t);
        CHECK(p0 >= prev);
        prev = p0;
    }
    CHECK(prev > 0.5);  // drifting toward certain extinction
}

TEST_CASE("generating function agrees with the summed series") {
    const bd::BdConfig cfg = fig10_config();
    CHECK(bd::bd_pgf(cfg, 1.0 - 1e-10, 1.5) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(bd::bd_pgf(cfg, 0.37, 0.0) == doctest::Approx(0.37).epsilon(1e-12));

    for (double z : {0.2, 0.5, 0.8}) {
        for (double t : {0.6, 1.7, 4.0}) {
            double series = 0.0;
            const long long x_max = truncation_bound(cfg, t);
            for (long long x = 0; x <= x_max; ++x)
                series += std::pow(z, static_cast<double>(x)) * bd::bd_transition_prob(cfg, x, t);
            CHECK(std::abs(bd::bd_pgf(cfg, z, t) - series) < 1e-7);
        }
    }
}

TEST_CASE("pure-birth intensity and law") {
    const double t_star = growth::switch_time(kBase, 0.8);
    const Perturbation c = Perturbation::power_form(1.0, t_star);
    const bd::BdConfig cfg = bd::BdConfig::pure_birth(kBase, c, 2);

    CHECK(bd::birth_intensity(cfg, 0.0) == 0.0);
    const bd::BdConfig plain = bd::BdConfig::pure_birth(kBase, Perturbation::none(), 2);
    for (double t : {0.5, 2.0, 6.0})
        CHECK(bd::birth_intensity(plain, t) ==
              doctest::Approx(-2.0 * std::log((0.2 + std::pow(0.5, t)) / 1.2)).epsilon(1e-12));

    // Lambda(inf) = log(K~/y) with the curve scaled to x0 = y
    RichardsParams scaled(2.0, 0.5, 0.2, 0.0, 2.0);
    const double k_mod = growth::modified_carrying_capacity(scaled, c);
    CHECK(bd::birth_intensity(cfg, 100.0) == doctest::Approx(std::log(k_mod / 2.0)).epsilon(1e-8));

    CHECK(bd::birth_transition_prob(cfg, 2, 0.0) == 1.0);
    CHECK(bd::birth_transition_prob(cfg, 1, 3.0) == 0.0);
    for (double t : {0.8, 2.5, 5.0}) {
        const long long x_max = truncation_bound(cfg, t);
        double total = 0.0, mean = 0.0;
        for (long long x = 2; x <= x_max; ++x) {
            const double pr = bd::birth_transition_prob(cfg, x, t);
            total += pr;
            mean += static_cast<double>(x) * pr;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(std::abs(mean - 2.0 * std::exp(bd::birth_intensity(cfg, t))) < 1e-7);
    }
}

TEST_CASE("dispersion indices") {
    const bd::BdConfig plain = bd::BdConfig::pure_birth(kBase, Perturbation::none(), 2);
    const auto at0 = bd::dispersion_indices(plain, 0.0);
    CHECK(at0.fano == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(at0.coeff_var == doctest::Approx(0.0).epsilon(1e-14));

    const auto at_inf = bd::dispersion_indices(plain, 80.0);
    CHECK(at_inf.fano == doctest::Approx(35.0).epsilon(1e-6));
    CHECK(at_inf.coeff_var == doctest::Approx(std::sqrt((72.0 - 2.0) / (72.0 * 2.0))).epsilon(1e-8));

    double prev = -1.0;
    for (double t = 0.0; t <= 30.0; t += 0.25) {
        const double fano = bd::dispersion_indices(plain, t).fano;
        CHECK(fano >= prev);
        prev = fano;
    }

    // D(t~) = 1 exactly where psi = 1/2; that boundary exists here because
    // the mean's limit exceeds twice the start: 1/psi(inf) = 36 > 2
    CHECK(1.0 / bd::psi_phi(plain, 200.0).psi > 2.0);
    const double t_tilde = numerics::find_root(
        [&](double t) { return bd::psi_phi(plain, t).psi - 0.5; }, 0.0, 40.0, 1e-12);
    CHECK(std::abs(bd::dispersion_indices(plain, t_tilde).fano - 1.0) < 1e-8);

    // when psi(inf) stays above 1/2 the process never turns underdispersed
    RichardsParams shallow(0.1, 0.5, 1.0, 0.0, 2.0);
    const bd::BdConfig mild = bd::BdConfig::pure_birth(shallow, Perturbation::none(), 2);
    CHECK(bd::psi_phi(mild, 200.0).psi > 0.5);
    CHECK(bd::dispersion_indices(mild, 200.0).fano < 1.0);
}

TEST_CASE("thinning simulation matches the closed forms") {
    const double t_star = growth::switch_time(kBase, 0.8);
    const Perturbation c = Perturbation::power_form(1.0, t_star);
    const bd::BdConfig cfg = bd::BdConfig::birth_death(kBase, c, 1.0, 2);

    const std::size_t n_paths = 100000;
    const SamplePaths paths = bd::simulate_bd_paths(cfg, 3.0, n_paths, 99);

    // determinism
    const SamplePaths again = bd::simulate_bd_paths(cfg, 3.0, 200, 99);
    for (std::size_t i = 0; i < 200; ++i) {
        CHECK(paths.times[i] == again.times[i]);
        CHECK(paths.values[i] == again.values[i]);
    }

    for (double t : {1.0, 2.5}) {
        double mean = 0.0, second = 0.0, absorbed = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) {
            const double s = state_at(paths, i, t);
            mean += s;
            second += s * s;
            if (s == 0.0) absorbed += 1.0;
        }
        mean /= static_cast<double>(n_paths);
        second /= static_cast<double>(n_paths);
        absorbed /= static_cast<double>(n_paths);

        const auto mv = bd::bd_mean_variance(cfg, t);
        const double se_mean = std::sqrt((second - mean * mean) / static_cast<double>(n_paths));
        CHECK(std::abs(mean - mv.mean) < 3.0 * se_mean);

        const double p0 = bd::bd_transition_prob(cfg, 0, t);
        const double se_p0 = std::sqrt(p0 * (1.0 - p0) / static_cast<double>(n_paths));
        CHECK(std::abs(absorbed - p0) < 3.0 * se_p0);
    }
}

TEST_CASE("a vanishing birth rate freezes the paths") {
    // q -> 0 drives lambda (and the growth rate) to zero
    RichardsParams frozen(1e-12, 0.5, 0.2, 0.0, 2.0);
    const bd::BdConfig cfg = bd::BdConfig::pure_birth(frozen, Perturbation::none(), 5);
    const SamplePaths paths = bd::simulate_bd_paths(cfg, 10.0, 500, 3);
    for (std::size_t i = 0; i < paths.path_count(); ++i)
        for (double v : paths.values[i]) CHECK(v == 5.0);
}
