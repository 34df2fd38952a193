#include "richfit/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace richfit {
namespace diffusion {

DiffusionParams::DiffusionParams(growth::RichardsParams richards_, double sigma_,
                                 growth::Perturbation perturbation_)
    : richards(richards_), sigma(sigma_), perturbation(std::move(perturbation_)) {
    if (!(sigma > 0.0)) throw std::invalid_argument("DiffusionParams: sigma must be positive");
}

InitialLaw InitialLaw::degenerate(double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("InitialLaw: x0 must be positive");
    return InitialLaw(std::log(x0), 0.0);
}

InitialLaw InitialLaw::lognormal(double mu0, double sigma0_sq) {
    if (sigma0_sq < 0.0) throw std::invalid_argument("InitialLaw: sigma0_sq must be >= 0");
    return InitialLaw(mu0, sigma0_sq);
}

MomentSpec MomentSpec::conditional_moment(int n) {
    if (n < 1) throw std::invalid_argument("MomentSpec: moment order must be >= 1");
    const double nd = static_cast<double>(n);
    return MomentSpec(nd, nd * nd / 2.0, 0.0, 1.0, true, n);
}
MomentSpec MomentSpec::conditional_mode() { return MomentSpec(1.0, -1.0, 0.0, 1.0, true, 1); }
MomentSpec MomentSpec::conditional_percentile(double z_alpha) {
    return MomentSpec(1.0, z_alpha, 0.0, 0.5, true, 1);
}
MomentSpec MomentSpec::moment(int n) {
    if (n < 1) throw std::invalid_argument("MomentSpec: moment order must be >= 1");
    const double nd = static_cast<double>(n);
    return MomentSpec(nd, nd * nd / 2.0, 1.0, 1.0, false, n);
}
MomentSpec MomentSpec::mode() { return MomentSpec(1.0, -1.0, 1.0, 1.0, false, 1); }
MomentSpec MomentSpec::percentile(double z_alpha) {
    return MomentSpec(1.0, z_alpha, 1.0, 0.5, false, 1);
}

double log_drift_H(const DiffusionParams& params, double s, double t) {
    if (!(t >= s)) throw std::domain_error("log_drift_H: requires t >= s");
    const auto& p = params.richards;
    double h = p.q * (std::log(p.pow_k(s) + p.eta) - std::log(p.pow_k(t) + p.eta)) -
               0.5 * params.sigma * params.sigma * (t - s);
    if (params.perturbation.kind() != growth::Perturbation::Kind::None) {
        const double t_star = params.perturbation.t_star();
        h += growth::perturbation_integral(params.perturbation, p, t_star, std::max(t, t_star)) -
             growth::perturbation_integral(params.perturbation, p, t_star, std::max(s, t_star));
    }
    return h;
}

double LognormalLaw::mean() const { return std::exp(location + 0.5 * scale_sq); }
double LognormalLaw::median() const { return std::exp(location); }

LognormalLaw transition_law(const DiffusionParams& params, double x, double s, double t) {
    if (!(x > 0.0)) throw std::domain_error("transition_law: x must be positive");
    if (!(t > s)) throw std::domain_error("transition_law: requires t > s");
    return {std::log(x) + log_drift_H(params, s, t), params.sigma * params.sigma * (t - s)};
}

double moment(const DiffusionParams& params, const InitialLaw& init, const MomentSpec& spec,
              double t, std::optional<std::pair<double, double>> given) {
    double y, tau, sigma0_sq;
    if (spec.conditional) {
        if (!given)
            throw std::invalid_argument("moment: conditional spec needs a (y, s) condition");
        if (!(given->first > 0.0)) throw std::domain_error("moment: conditioning state must be > 0");
        y = std::log(given->first);
        tau = given->second;
        sigma0_sq = 0.0;
    } else {
        y = init.mu0;
        tau = params.richards.t0;
        sigma0_sq = init.sigma0_sq;
    }
    if (!(t >= tau)) throw std::domain_error("moment: t must be >= the conditioning time");
    const double drift = (t == tau) ? 0.0 : log_drift_H(params, tau, t);
    const double spread = spec.l3 * sigma0_sq + params.sigma * params.sigma * (t - tau);
    return std::exp((y + drift) * spec.l1 + spec.l2 * std::pow(spread, spec.l4));
}

MeanVarianceRatio mean_variance_ratio(const DiffusionParams& params_mod, double t) {
    double r = 1.0;
    if (params_mod.perturbation.kind() != growth::Perturbation::Kind::None) {
        const double t_star = params_mod.perturbation.t_star();
        r = std::exp(growth::perturbation_integral(params_mod.perturbation, params_mod.richards,
                                                   t_star, std::max(t, t_star)));
    }
    return {r, r * r};
}

std::vector<std::vector<double>> fdd_log_covariance(const DiffusionParams& params,
                                                    const InitialLaw& init,
                                                    const std::vector<double>& times) {
    const double t0 = params.richards.t0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t0) throw std::domain_error("fdd_log_covariance: times must be >= t0");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw std::invalid_argument("fdd_log_covariance: times must be strictly increasing");
    }
    const double s2 = params.sigma * params.sigma;
    std::vector<std::vector<double>> cov(times.size(), std::vector<double>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t j = 0; j < times.size(); ++j)
            cov[i][j] = init.sigma0_sq + s2 * (std::min(times[i], times[j]) - t0);
    return cov;
}

SamplePaths simulate_paths(const DiffusionParams& params, const InitialLaw& init,
                           const std::vector<double>& grid, std::size_t n_paths,
                           std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("simulate_paths: empty grid");
    if (grid.front() != params.richards.t0)
        throw std::invalid_argument("simulate_paths: grid must start at t0");
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1]))
            throw std::invalid_argument("simulate_paths: grid must be strictly increasing");
    if (n_paths < 1) throw std::invalid_argument("simulate_paths: n_paths must be >= 1");

    // Per-interval drift and noise scale are path-independent: compute once.
    const std::size_t steps = grid.size() - 1;
    std::vector<double> drift(steps), noise(steps);
    for (std::size_t j = 0; j < steps; ++j) {
        drift[j] = log_drift_H(params, grid[j], grid[j + 1]);
        noise[j] = params.sigma * std::sqrt(grid[j + 1] - grid[j]);
    }

    SamplePaths out;
    out.times.assign(n_paths, grid);
    out.values.assign(n_paths, std::vector<double>(grid.size()));
    const double sigma0 = std::sqrt(init.sigma0_sq);
    numerics::parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            numerics::RngStream rng(seed, i);
            double log_x = init.mu0;
            if (!init.is_degenerate()) log_x += sigma0 * rng.normal();
            auto& v = out.values[i];
            v[0] = std::exp(log_x);
            for (std::size_t j = 0; j < steps; ++j) {
                log_x += drift[j] + noise[j] * rng.normal();
                v[j + 1] = std::exp(log_x);
            }
        }
    });
    return out;
}

}  // namespace diffusion
}  // namespace richfit
