#include "richfit/birth_death.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace richfit {
namespace bd {

namespace {

double log_binomial(long long n, long long r) {
    if (r < 0 || r > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(r) + 1.0) -
           std::lgamma(static_cast<double>(n - r) + 1.0);
}

}  // namespace

BdConfig::BdConfig(growth::RichardsParams params, growth::Perturbation perturbation, double mu,
                   long long y0)
    : params_(params), perturbation_(std::move(perturbation)), mu_(mu), y0_(y0) {
    if (params_.t0 != 0.0)
        throw std::invalid_argument("BdConfig: params.t0 must be 0; shift time before entry");
    if (y0_ < 1) throw std::invalid_argument("BdConfig: y0 must be a positive integer");
    if (mu_ < 0.0) throw std::invalid_argument("BdConfig: mu must be nonnegative");
    if (perturbation_.kind() != growth::Perturbation::Kind::None && perturbation_.t_star() < 0.0)
        throw std::invalid_argument("BdConfig: t_star must be >= 0 on the shifted clock");

    lambda_ = mu_ + params_.q * std::abs(params_.log_k());

    // Horizon past which (q + sup C) k^t / eta <= q bounds h~ below lambda - mu.
    const double sup_c = perturbation_.supremum(params_);
    double t_safe = 10.0;
    if (sup_c > 0.0) {
        t_safe = std::log(params_.q * params_.eta / (params_.q + sup_c)) / params_.log_k();
        t_safe = std::max(t_safe, 2.0 * std::max(perturbation_.t_star(), 1.0));
    }
    const double t_check = std::max({t_safe, 10.0, 2.0 * perturbation_.t_star()});
    for (int i = 0; i <= 1000; ++i) {
        const double t = t_check * static_cast<double>(i) / 1000.0;
        const double one_minus_rho = (mu_ + modified_growth_rate(t)) / lambda_;
        if (!(one_minus_rho >= 0.0 && one_minus_rho <= 1.0 + 1e-12))
            throw std::invalid_argument("BdConfig: rho(t) leaves [0,1]; rates are inconsistent");
    }

    const double cache_end = std::max(t_check, 80.0);
    if (perturbation_.kind() != growth::Perturbation::Kind::None) {
        const growth::RichardsParams p = params_;
        const growth::Perturbation c = perturbation_;
        c_antiderivative_ = std::make_shared<const numerics::CachedAntiderivative>(
            [p, c](double u) { return c.value(p, u) * growth::perturbation_kernel(p, u); },
            perturbation_.t_star(), cache_end, 513, 1e-13);
    }
    {
        // psi is evaluated through the J cache above, so capture *this by value
        // is unsafe until construction finishes; use an explicit closure.
        const growth::RichardsParams p = params_;
        const growth::Perturbation c = perturbation_;
        auto j_cache = c_antiderivative_;
        auto psi_fn = [p, c, j_cache](double s) {
            double j = 0.0;
            if (j_cache) j = (*j_cache)(s);
            const double ks = std::exp(s * std::log(p.k));
            return std::exp(p.q * (std::log(p.eta + ks) - std::log(p.eta + 1.0)) - j);
        };
        psi_antiderivative_ = std::make_shared<const numerics::CachedAntiderivative>(
            psi_fn, 0.0, cache_end, 513, 1e-13);
    }
}

BdConfig BdConfig::birth_death(const growth::RichardsParams& params,
                               const growth::Perturbation& perturbation, double mu, long long y0) {
    if (!(mu > 0.0)) throw std::invalid_argument("BdConfig: birth-death variant needs mu > 0");
    return BdConfig(params, perturbation, mu, y0);
}

BdConfig BdConfig::pure_birth(const growth::RichardsParams& params,
                              const growth::Perturbation& perturbation, long long y0) {
    return BdConfig(params, perturbation, 0.0, y0);
}

double BdConfig::modified_growth_rate(double t) const {
    double h = growth::growth_rate_h(params_, t);
    if (perturbation_.kind() != growth::Perturbation::Kind::None && t > perturbation_.t_star())
        h += perturbation_.value(params_, t) * growth::perturbation_kernel(params_, t);
    return h;
}

double BdConfig::c_integral(double t) const {
    if (!c_antiderivative_) return 0.0;
    return (*c_antiderivative_)(t);
}

double BdConfig::psi_time_integral(double t) const { return (*psi_antiderivative_)(t); }

double BdConfig::psi(double t) const {
    const double kt = params_.pow_k(t);
    return std::exp(params_.q * (std::log(params_.eta + kt) - std::log(params_.eta + 1.0)) -
                    c_integral(t));
}

PsiPhi psi_phi(const BdConfig& cfg, double t) {
    if (t < 0.0) throw std::domain_error("psi_phi: t must be >= 0");
    const double psi = cfg.psi(t);
    const double phi = 1.0 - psi + cfg.mu_rate() * cfg.psi_time_integral(t);
    return {psi, phi};
}

double bd_transition_prob(const BdConfig& cfg, long long x, double t) {
    if (t < 0.0) throw std::domain_error("bd_transition_prob: t must be >= 0");
    if (x < 0) return 0.0;
    const long long y = cfg.y0();
    if (t == 0.0) return (x == y) ? 1.0 : 0.0;

    const auto [psi, phi] = psi_phi(cfg, t);
    const double total = psi + phi;
    if (total < 1.0 - 1e-9)
        throw std::runtime_error("bd_transition_prob: psi + phi < 1, invalid configuration");

    if (x == 0) {
        const double base = std::max(0.0, 1.0 - 1.0 / total);
        return cfg.is_pure_birth() ? 0.0 : std::pow(base, static_cast<double>(y));
    }

    // Sum_i binom(y,i) binom(y+x-i-1, y-1) (1-phi)^i phi^{x-i}
    //       (psi+phi-1)^{y-i} / (psi+phi)^{x+y-i},  i = 0..min(x,y),
    // accumulated as signed exponentials shifted by the largest magnitude.
    const double log_phi = (phi > 0.0) ? std::log(phi) : -std::numeric_limits<double>::infinity();
    const double one_minus_phi = 1.0 - phi;
    const double log_abs_omp = (one_minus_phi != 0.0)
                                   ? std::log(std::abs(one_minus_phi))
                                   : -std::numeric_limits<double>::infinity();
    const double excess = std::max(0.0, total - 1.0);
    const double log_excess =
        (excess > 0.0) ? std::log(excess) : -std::numeric_limits<double>::infinity();
    const double log_total = std::log(total);

    const long long imax = std::min(x, y);
    std::vector<double> log_mag(static_cast<std::size_t>(imax) + 1,
                                -std::numeric_limits<double>::infinity());
    std::vector<int> sign(static_cast<std::size_t>(imax) + 1, 1);
    double max_log = -std::numeric_limits<double>::infinity();
    for (long long i = 0; i <= imax; ++i) {
        double lm = log_binomial(y, i) + log_binomial(y + x - i - 1, y - 1);
        if (i > 0) {
            if (one_minus_phi == 0.0) continue;  // factor 0^i kills the term
            lm += static_cast<double>(i) * log_abs_omp;
        }
        if (x - i > 0) {
            if (phi == 0.0) continue;
            lm += static_cast<double>(x - i) * log_phi;
        }
        if (y - i > 0) {
            if (excess == 0.0) continue;
            lm += static_cast<double>(y - i) * log_excess;
        }
        lm -= static_cast<double>(x + y - i) * log_total;
        log_mag[static_cast<std::size_t>(i)] = lm;
        sign[static_cast<std::size_t>(i)] = (one_minus_phi < 0.0 && (i % 2 == 1)) ? -1 : 1;
        max_log = std::max(max_log, lm);
    }
    if (!std::isfinite(max_log)) return 0.0;
    double acc = 0.0;
    for (long long i = 0; i <= imax; ++i) {
        const double lm = log_mag[static_cast<std::size_t>(i)];
        if (std::isfinite(lm))
            acc += sign[static_cast<std::size_t>(i)] * std::exp(lm - max_log);
    }
    return std::max(0.0, std::exp(max_log) * acc);
}

MeanVariance bd_mean_variance(const BdConfig& cfg, double t) {
    if (t < 0.0) throw std::domain_error("bd_mean_variance: t must be >= 0");
    const auto [psi, phi] = psi_phi(cfg, t);
    const double y = static_cast<double>(cfg.y0());
    const double mean = y / psi;
    const double variance = std::max(0.0, y * (psi + 2.0 * phi - 1.0) / (psi * psi));
    return {mean, variance};
}

double extinction_probability(const BdConfig& cfg) {
    return cfg.is_pure_birth() ? 0.0 : 1.0;
}

double bd_pgf(const BdConfig& cfg, double z, double t) {
    if (!(z > 0.0 && z < 1.0)) throw std::domain_error("bd_pgf: z must lie in (0,1)");
    const auto [psi, phi] = psi_phi(cfg, t);
    const double g = 1.0 - (z - 1.0) / ((z - 1.0) * phi - psi);
    return std::pow(g, static_cast<double>(cfg.y0()));
}

double birth_intensity(const BdConfig& cfg, double t) {
    if (!cfg.is_pure_birth())
        throw std::domain_error("birth_intensity: defined for the pure-birth variant");
    if (t < 0.0) throw std::domain_error("birth_intensity: t must be >= 0");
    const auto& p = cfg.params();
    return p.q * (std::log(p.eta + 1.0) - std::log(p.eta + p.pow_k(t))) + cfg.c_integral(t);
}

double birth_transition_prob(const BdConfig& cfg, long long x, double t) {
    if (!cfg.is_pure_birth())
        throw std::domain_error("birth_transition_prob: defined for the pure-birth variant");
    if (t < 0.0) throw std::domain_error("birth_transition_prob: t must be >= 0");
    const long long y = cfg.y0();
    if (x < y) return 0.0;
    if (t == 0.0) return (x == y) ? 1.0 : 0.0;
    const double intensity = birth_intensity(cfg, t);
    if (intensity <= 0.0) return (x == y) ? 1.0 : 0.0;
    const double log_p = log_binomial(x - 1, y - 1) - static_cast<double>(y) * intensity +
                         static_cast<double>(x - y) * std::log(-std::expm1(-intensity));
    return std::exp(log_p);
}

DispersionIndices dispersion_indices(const BdConfig& cfg, double t) {
    if (!cfg.is_pure_birth())
        throw std::domain_error("dispersion_indices: defined for the pure-birth variant");
    const double psi = cfg.psi(t);
    const double fano = 1.0 / psi - 1.0;
    const double cv = std::sqrt(std::max(0.0, (1.0 - psi) / static_cast<double>(cfg.y0())));
    return {fano, cv};
}

SamplePaths simulate_bd_paths(const BdConfig& cfg, double horizon, std::size_t n_paths,
                              std::uint64_t seed) {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_bd_paths: horizon must be > 0");
    if (n_paths < 1) throw std::invalid_argument("simulate_bd_paths: n_paths must be >= 1");

    const double lambda = cfg.lambda_rate();
    const double mu = cfg.mu_rate();
    SamplePaths out;
    out.times.resize(n_paths);
    out.values.resize(n_paths);

    std::vector<std::string> errors(n_paths);
    numerics::parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            numerics::RngStream rng(seed, i);
            double t = 0.0;
            long long n = cfg.y0();
            auto& times = out.times[i];
            auto& values = out.values[i];
            times.push_back(0.0);
            values.push_back(static_cast<double>(n));
            while (n > 0) {
                const double majorant = static_cast<double>(n) * (lambda + mu);
                t += rng.exponential(majorant);
                if (t >= horizon) break;
                // Per-individual birth rate lambda (1 - rho(t)) = mu + h~(t);
                // thinning against the lambda + mu bound.
                const double birth = mu + cfg.modified_growth_rate(t);
                const double u = rng.uniform();
                if (u * (lambda + mu) >= birth + mu) continue;  // phantom event
                if (u * (lambda + mu) < birth)
                    ++n;
                else
                    --n;
                if (n > 1000000000LL) {
                    errors[i] = "simulate_bd_paths: path exploded past 1e9 individuals";
                    break;
                }
                times.push_back(t);
                values.push_back(static_cast<double>(n));
            }
            if (times.back() < horizon) {
                times.push_back(horizon);
                values.push_back(static_cast<double>(n));
            }
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    return out;
}

}  // namespace bd
}  // namespace richfit
