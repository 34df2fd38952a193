#ifndef RICHFIT_BIRTH_DEATH_HPP
#define RICHFIT_BIRTH_DEATH_HPP

#include <cstdint>
#include <memory>

#include "richfit/growth.hpp"
#include "richfit/sample_paths.hpp"

namespace richfit {
namespace bd {

/// Time-inhomogeneous linear birth-death process with per-individual rates
/// lambda (1 - rho(t)) and mu, tied to the modified growth curve through
/// 1 - rho(t) = (mu + h~(t)) / lambda and lambda - mu = q |log k|.
///
/// The module works on the clock t >= 0, so params.t0 must be 0; callers
/// shift time before entry. rho(t) in [0,1] is checked on a grid at
/// construction and the config rejected otherwise.
class BdConfig {
public:
    /// Birth-death variant: mu > 0, lambda = mu + q |log k|.
    static BdConfig birth_death(const growth::RichardsParams& params,
                                const growth::Perturbation& perturbation, double mu,
                                long long y0);
    /// Pure-birth variant: mu = 0, lambda = q |log k|.
    static BdConfig pure_birth(const growth::RichardsParams& params,
                               const growth::Perturbation& perturbation, long long y0);

    const growth::RichardsParams& params() const { return params_; }
    const growth::Perturbation& perturbation() const { return perturbation_; }
    double lambda_rate() const { return lambda_; }
    double mu_rate() const { return mu_; }
    long long y0() const { return y0_; }
    bool is_pure_birth() const { return mu_ == 0.0; }

    /// Modified growth rate h~(t) = (q + C(t) 1{t > t*}) k^t |log k| / (eta + k^t).
    double modified_growth_rate(double t) const;
    /// J(t) = int_{t*}^{max(t,t*)} C kernel (cached antiderivative).
    double c_integral(double t) const;
    /// int_0^t psi(s) ds (cached antiderivative).
    double psi_time_integral(double t) const;
    double psi(double t) const;

private:
    BdConfig(growth::RichardsParams params, growth::Perturbation perturbation, double mu,
             long long y0);
    growth::RichardsParams params_;
    growth::Perturbation perturbation_;
    double lambda_, mu_;
    long long y0_;
    std::shared_ptr<const numerics::CachedAntiderivative> c_antiderivative_;
    std::shared_ptr<const numerics::CachedAntiderivative> psi_antiderivative_;
};

struct PsiPhi {
    double psi;
    double phi;
};

/// psi(t) = ((eta + k^t)/(eta + 1))^q exp(-J(t)); phi(t) = 1 - psi(t) + mu int_0^t psi.
PsiPhi psi_phi(const BdConfig& cfg, double t);

/// P[X(t) = x | X(0) = y]; binomial-sum form evaluated with signed log-space
/// accumulation. Throws when psi + phi drops below 1, which signals an
/// inconsistent configuration.
double bd_transition_prob(const BdConfig& cfg, long long x, double t);

/// Conditional mean y/psi(t) and variance y (psi + 2 phi - 1) / psi^2.
struct MeanVariance {
    double mean;
    double variance;
};
MeanVariance bd_mean_variance(const BdConfig& cfg, double t);

/// 1 when mu > 0 (the absorbing endpoint is ultimately reached), 0 for the
/// pure-birth variant.
double extinction_probability(const BdConfig& cfg);

/// Probability generating function G(z, t) = {1 - (z-1)[(z-1)phi - psi]^{-1}}^y.
double bd_pgf(const BdConfig& cfg, double z, double t);

/// Cumulative birth intensity of the pure-birth variant:
/// Lambda(t) = -q log((eta + k^t)/(eta + 1)) + J(t).
double birth_intensity(const BdConfig& cfg, double t);

/// Pure-birth law P_yx(t) = binom(x-1, y-1) e^{-y Lambda} (1 - e^{-Lambda})^{x-y}.
double birth_transition_prob(const BdConfig& cfg, long long x, double t);

/// Fano factor D(t) = 1/psi - 1 and coefficient of variation sqrt((1-psi)/y)
/// for the pure-birth variant.
struct DispersionIndices {
    double fano;
    double coeff_var;
};
DispersionIndices dispersion_indices(const BdConfig& cfg, double t);

/// Exact event-driven simulation by thinning with the constant majorant
/// n (lambda + mu). Paths are piecewise constant; each stores its event
/// times (plus 0 and the horizon) and the states after each event.
/// Deterministic given the seed, independent of worker count.
SamplePaths simulate_bd_paths(const BdConfig& cfg, double horizon, std::size_t n_paths,
                              std::uint64_t seed);

}  // namespace bd
}  // namespace richfit

#endif
