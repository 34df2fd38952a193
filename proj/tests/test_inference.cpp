#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "richfit/inference.hpp"

using namespace richfit;
using growth::Perturbation;
using growth::RichardsParams;

namespace {

const RichardsParams kBase(2.0, 0.5, 0.2, 0.0, 2.0);

double true_t_star() { return growth::switch_time(kBase, 0.5); }

diffusion::DiffusionParams section8_model(double sigma = 0.01) {
    return diffusion::DiffusionParams(kBase, sigma,
                                      Perturbation::power_form(1.0, true_t_star()));
}

std::vector<double> fine_grid() {
    std::vector<double> g;
    for (int j = 0; j <= 100; ++j) g.push_back(0.1 * j);
    return g;
}

SamplePaths section8_data(std::uint64_t seed, std::size_t n_paths = 25, double sigma = 0.01) {
    return diffusion::simulate_paths(section8_model(sigma),
                                     diffusion::InitialLaw::degenerate(2.0), fine_grid(), n_paths,
                                     seed);
}

}  // namespace

TEST_CASE("v-transform and its inverse") {
    SamplePaths flat;
    flat.times = {{0.0, 1.0, 2.0}};
    flat.values = {{3.0, 3.0, 3.0}};
    const auto vt_flat = inference::v_transform(flat);
    CHECK(vt_flat.v1[0][0] == 0.0);
    CHECK(vt_flat.v1[0][1] == 0.0);
    CHECK(vt_flat.z1 == 0.0);

    SamplePaths one;
    one.times = {{0.0, 1.0}};
    one.values = {{2.0, 2.0 * std::exp(1.0)}};
    const auto vt_one = inference::v_transform(one);
    CHECK(vt_one.v1[0][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vt_one.v0[0] == 2.0);

    // round trip on jagged noisy paths
    const SamplePaths data = section8_data(7, 4);
    SamplePaths jagged = data;
    jagged.times[1].resize(40);
    jagged.values[1].resize(40);
    const auto vt = inference::v_transform(jagged);
    const SamplePaths back = inference::v_untransform(vt);
    for (std::size_t i = 0; i < jagged.path_count(); ++i)
        for (std::size_t j = 0; j < jagged.values[i].size(); ++j)
            CHECK(back.values[i][j] ==
                  doctest::Approx(jagged.values[i][j]).epsilon(1e-12));

    SamplePaths bad;
    bad.times = {{0.0, 1.0}};
    bad.values = {{2.0, -1.0}};
    CHECK_THROWS_AS(inference::v_transform(bad), std::invalid_argument);
}

TEST_CASE("initial-law estimates") {
    const auto same = inference::initial_mles({2.0, 2.0, 2.0});
    CHECK(same.first == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(same.second == 0.0);

    const auto two = inference::initial_mles({1.0, std::exp(2.0)});
    CHECK(two.first == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(two.second == doctest::Approx(1.0).epsilon(1e-14));

    const auto single = inference::initial_mles({5.0});
    CHECK(single.first == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(single.second == 0.0);
}

TEST_CASE("likelihood terms match the direct double loop") {
    const SamplePaths data = section8_data(3, 6);
    SamplePaths jagged = data.subsample(2);
    jagged.times[2].resize(17);  // break the common grid
    jagged.values[2].resize(17);
    const auto vt = inference::v_transform(jagged);
    const Perturbation c = Perturbation::power_form(1.0, true_t_star());

    numerics::RngStream rng(8, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const double q = 1.0 + 2.0 * rng.uniform();
        const double k = 0.3 + 0.4 * rng.uniform();
        const double eta = 0.05 + 0.4 * rng.uniform();
        const double sigma = 0.005 + 0.03 * rng.uniform();
        diffusion::DiffusionParams xi(RichardsParams(q, k, eta, 0.0, 2.0), sigma);

        for (const Perturbation* cp : {&c, (const Perturbation*)nullptr}) {
            const Perturbation& pert = cp ? *cp : Perturbation::none();
            const auto terms = inference::likelihood_terms(vt, xi, pert);
            const double n = static_cast<double>(vt.n_increments);
            const double reference =
                -0.5 * n * std::log(sigma * sigma) -
                (terms.z1 + terms.phi_term - 2.0 * terms.gamma_term) / (2.0 * sigma * sigma);
            CHECK(inference::log_likelihood_core(vt, xi, pert) ==
                  doctest::Approx(reference).epsilon(1e-12));
        }
    }

    // common-grid fast path agrees with the double loop
    const auto vt_common = inference::v_transform(data.subsample(2));
    diffusion::DiffusionParams xi(kBase, 0.01);
    const auto terms = inference::likelihood_terms(vt_common, xi, Perturbation::none());
    const double n = static_cast<double>(vt_common.n_increments);
    const double reference = -0.5 * n * std::log(1e-4) -
                             (terms.z1 + terms.phi_term - 2.0 * terms.gamma_term) / 2e-4;
    CHECK(inference::log_likelihood_core(vt_common, xi, Perturbation::none()) ==
          doctest::Approx(reference).epsilon(1e-12));
}

TEST_CASE("single observations carry no increment information") {
    SamplePaths data;
    data.times = {{0.0}, {0.0}};
    data.values = {{2.0}, {2.1}};
    const auto vt = inference::v_transform(data);
    CHECK(vt.n_increments == 0);
    CHECK(inference::log_likelihood_core(vt, diffusion::DiffusionParams(kBase, 0.01),
                                         Perturbation::none()) == 0.0);
}

TEST_CASE("the generating parameters dominate the likelihood") {
    // true sigma beats a doubled sigma on essentially every dataset
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const SamplePaths data = section8_data(seed, 5).subsample(2);
        const auto vt = inference::v_transform(data);
        const double at_true = inference::log_likelihood_core(
            vt, section8_model(0.01), section8_model(0.01).perturbation);
        const double at_double = inference::log_likelihood_core(
            vt, section8_model(0.02), section8_model(0.02).perturbation);
        if (at_true > at_double) ++wins;
    }
    CHECK(wins >= 95);

    // and beats uniform random box points almost always
    numerics::RngStream rng(4, 0);
    int beats = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SamplePaths data = section8_data(seed).subsample(2);
        const auto box = inference::bound_parameters(data, 0.5);
        const auto vt = inference::v_transform(data);
        const auto obj = inference::make_likelihood_objective(vt, Perturbation::none());
        const double at_true = obj({2.0, 0.5, 0.2, 0.01});
        const opt::Box b = box.to_box();
        for (int i = 0; i < 100; ++i) {
            std::vector<double> x(4);
            for (std::size_t d = 0; d < 4; ++d)
                x[d] = b.lo[d] + (b.hi[d] - b.lo[d]) * rng.uniform();
            ++total;
            if (at_true > obj(x)) ++beats;
        }
    }
    CHECK(beats >= 99 * total / 100);
}

TEST_CASE("parameter bounding on simulated data") {
    // deterministic samples: the box must contain the generating parameters
    SamplePaths clean;
    clean.times.resize(3);
    clean.values.resize(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j <= 50; ++j) {
            clean.times[i].push_back(0.2 * j);
            clean.values[i].push_back(growth::evaluate_modified(
                kBase, section8_model().perturbation, 0.2 * j));
        }
    const auto clean_box = inference::bound_parameters(clean, 0.5);
    CHECK(clean_box.contains(2.0, 0.5, 0.2, 0.01));

    // ten seeded datasets: containment in at least nine
    int contained = 0;
    double width_q_lo = 1e9, width_q_hi = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto box = inference::bound_parameters(section8_data(seed).subsample(2), 0.5);
        if (box.contains(2.0, 0.5, 0.2, 0.01)) ++contained;
        CHECK(box.k[0] > 0.0);
        CHECK(box.k[1] < 1.0);
        CHECK(box.sigma[1] == 0.1);
        width_q_lo = std::min(width_q_lo, box.q[1] - box.q[0]);
        width_q_hi = std::max(width_q_hi, box.q[1] - box.q[0]);
    }
    CHECK(contained >= 9);
    // The q interval is wide by construction: near the inflection-ratio
    // asymptote small ratio changes swing q enormously.
    CHECK(width_q_lo > 3.0);
    CHECK(width_q_hi < 50.0 + 1e-9);

    // the acceptance seed reproduces interval widths of the reported scale
    const auto box137 = inference::bound_parameters(section8_data(137).subsample(2), 0.5);
    CHECK(box137.q[1] - box137.q[0] > 3.5);
    CHECK(box137.k[1] - box137.k[0] > 0.4);
    CHECK(box137.k[1] - box137.k[0] < 0.75);
    CHECK(box137.eta[1] - box137.eta[0] < 2.2);

    CHECK_THROWS_AS(inference::bound_parameters(clean, -0.5), std::invalid_argument);
}

TEST_CASE("windowed maximum-likelihood fit recovers the parameters") {
    const SamplePaths data = section8_data(137).subsample(2);
    const auto box = inference::bound_parameters(data, 0.5);

    opt::OptBudget budget;
    budget.max_evaluations = 20000;
    budget.seed = 137;
    const auto fit = inference::fit_mle(data, 4.6, box, opt::Method::SA, budget, 12);
    const auto& r = fit.params.richards;
    CHECK(std::abs(r.q - 2.0) / 2.0 < 0.02);
    CHECK(std::abs(r.k - 0.5) / 0.5 < 0.02);
    CHECK(std::abs(r.eta - 0.2) / 0.2 < 0.02);
    CHECK(std::abs(fit.params.sigma - 0.01) / 0.01 < 0.05);
    CHECK(fit.mu1_hat == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(fit.sigma1_sq_hat < 1e-30);
    CHECK(fit.trace.replicates.size() == 12);

    // refitting data simulated from the fitted model stays within twice the error
    const SamplePaths refit_data = diffusion::simulate_paths(
        fit.params, diffusion::InitialLaw::degenerate(r.x0), fine_grid(), 25, 11);
    const auto refit_box = inference::bound_parameters(refit_data.subsample(2), 0.5);
    const auto refit = inference::fit_mle(refit_data.subsample(2), 4.6, refit_box,
                                          opt::Method::SA, budget, 12);
    CHECK(std::abs(refit.params.richards.q - r.q) / r.q < 0.04);
    CHECK(std::abs(refit.params.richards.k - r.k) / r.k < 0.04);
    CHECK(std::abs(refit.params.sigma - fit.params.sigma) / fit.params.sigma < 0.1);

    // a window with almost no increments is rejected
    CHECK_THROWS_AS(inference::fit_mle(data, 0.25, box, opt::Method::SA, budget, 2),
                    std::invalid_argument);
}

TEST_CASE("annealing beats the ant lion on the likelihood surface") {
    int sa_wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SamplePaths data = section8_data(seed).subsample(2);
        const auto box = inference::bound_parameters(data, 0.5);
        SamplePaths rest;
        rest.times.resize(data.path_count());
        rest.values.resize(data.path_count());
        for (std::size_t i = 0; i < data.path_count(); ++i)
            for (std::size_t j = 0; j < data.times[i].size(); ++j)
                if (data.times[i][j] <= 4.6) {
                    rest.times[i].push_back(data.times[i][j]);
                    rest.values[i].push_back(data.values[i][j]);
                }
        const auto vt = inference::v_transform(rest);
        const auto obj = inference::make_likelihood_objective(vt, Perturbation::none());
        opt::OptBudget budget;
        budget.max_evaluations = 20000;
        budget.seed = seed;
        const auto sa = opt::sa_maximize(obj, box.to_box(), budget);
        const auto alo = opt::alo_maximize(obj, box.to_box(), budget);
        if (sa.value >= alo.value) ++sa_wins;
    }
    CHECK(sa_wins >= 6);
}

TEST_CASE("switching-time estimation") {
    const SamplePaths data = section8_data(137).subsample(2);
    const auto box = inference::bound_parameters(data, 0.5);
    opt::OptBudget budget;
    budget.max_evaluations = 20000;
    budget.seed = 137;
    const auto fit = inference::fit_mle(data, 4.6, box, opt::Method::SA, budget, 12);

    const auto det = inference::estimate_tstar(fit.params, 0.5, inference::TstarMode::Deterministic);
    CHECK(det.t_star == doctest::Approx(growth::switch_time(fit.params.richards, 0.5)));
    CHECK_FALSE(det.summary.has_value());

    // with vanishing noise the first-passage mean collapses onto the
    // closed-form crossing
    diffusion::DiffusionParams quiet(fit.params.richards, 0.001);
    inference::FptSettings fs;
    fs.boundary = 1.5 * growth::tangent_summary(quiet.richards).x_at_inflection;
    fs.horizon = 10.0;
    fs.n_paths = 20000;
    fs.dt = 0.002;
    fs.seed = 5;
    const auto fpt_est = inference::estimate_tstar(quiet, 0.5, inference::TstarMode::Fpt, fs);
    CHECK(std::abs(fpt_est.t_star - det.t_star) < 0.01);
    CHECK(fpt_est.summary->mass_captured > 0.99);
}

TEST_CASE("perturbation recovery needs post-switch data") {
    const SamplePaths data = section8_data(137).subsample(2);
    diffusion::DiffusionParams mle(kBase, 0.01);
    CHECK_THROWS_AS(inference::estimate_C(data, mle, 9.5), std::runtime_error);
}

TEST_CASE("procedure 1 end to end") {
    inference::ProcedureOptions options;
    options.budget.max_evaluations = 12000;
    options.budget.seed = 137;
    options.replications = 8;
    options.stride = 2;
    options.fpt_paths = 15000;
    options.fpt_seed = 137;

    const auto report = inference::run_procedure1(section8_data(137), {0.3, 0.5, 0.7}, options);
    CHECK(report.p_used == 0.5);
    CHECK(report.candidates.size() == 3);
    CHECK(report.rae_mean < 0.01);
    CHECK(report.bounds.contains(report.mle.richards.q, report.mle.richards.k,
                                 report.mle.richards.eta, report.mle.sigma));
    CHECK(std::abs(report.t_star_det - true_t_star()) < 0.05);
    CHECK(report.t_star_fpt.mass_captured > 0.9);
    CHECK(report.replication_trace.size() == 8);
    CHECK(report.window_crossed);

    // single-path data run with a degenerate initial variance
    const SamplePaths one_path = section8_data(21, 1);
    inference::ProcedureOptions quick = options;
    quick.replications = 4;
    quick.budget.max_evaluations = 8000;
    const auto single = inference::run_procedure1(one_path, {0.5}, quick);
    CHECK(single.sigma1_sq_hat < 1e-30);
    CHECK(single.rae_mean < 0.05);

    CHECK_THROWS_AS(inference::run_procedure1(one_path, {}, quick), std::invalid_argument);
}

TEST_CASE("relative-error metric") {
    CHECK(inference::rae({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(inference::rae({1.0, 2.0}, {1.1, 2.2}) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(std::abs(inference::rae({3.32193}, {3.36223}) - 0.01213) < 1e-5);
    CHECK_THROWS_AS(inference::rae({0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(inference::rae({1.0, 2.0}, {1.0}), std::invalid_argument);
}
