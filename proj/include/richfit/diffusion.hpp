#ifndef RICHFIT_DIFFUSION_HPP
#define RICHFIT_DIFFUSION_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "richfit/growth.hpp"
#include "richfit/sample_paths.hpp"

namespace richfit {
namespace diffusion {

/// Lognormal diffusion dX = h~(t) X dt + sigma X dW whose mean follows the
/// (possibly perturbed) Richards curve. perturbation = None gives the
/// classical process.
struct DiffusionParams {
    DiffusionParams(growth::RichardsParams richards_, double sigma_,
                    growth::Perturbation perturbation_ = growth::Perturbation::none());
    growth::RichardsParams richards;
    double sigma;
    growth::Perturbation perturbation;
};

/// Initial state law: lognormal(mu0, sigma0_sq), with the degenerate start
/// represented as sigma0_sq = 0, mu0 = log x0.
struct InitialLaw {
    static InitialLaw degenerate(double x0);
    static InitialLaw lognormal(double mu0, double sigma0_sq);

    double mu0;
    double sigma0_sq;
    bool is_degenerate() const { return sigma0_sq == 0.0; }

private:
    InitialLaw(double m, double s) : mu0(m), sigma0_sq(s) {}
};

/// Selector for the closed-form characteristics: the exponent
/// exp((y + H~(tau,t)) l1 + l2 (l3 sigma0^2 + sigma^2 (t-tau))^{l4})
/// covers conditional/unconditional moments, mode and percentiles.
struct MomentSpec {
    static MomentSpec conditional_moment(int n);
    static MomentSpec conditional_mode();
    static MomentSpec conditional_percentile(double z_alpha);
    static MomentSpec moment(int n);
    static MomentSpec mode();
    static MomentSpec percentile(double z_alpha);

    double l1, l2, l3, l4;
    bool conditional;
    int n;

private:
    MomentSpec(double a, double b, double c, double d, bool cond, int order)
        : l1(a), l2(b), l3(c), l4(d), conditional(cond), n(order) {}
};

/// Log-drift accumulated over [s, t]:
/// H~(s,t) = q log((k^s+eta)/(k^t+eta)) + int C kernel - sigma^2/2 (t-s).
/// Evaluated as a difference of antiderivatives, so it is additive over
/// adjacent intervals to round-off.
double log_drift_H(const DiffusionParams& params, double s, double t);

struct LognormalLaw {
    double location;
    double scale_sq;
    double mean() const;
    double median() const;
};

/// Conditional law of X(t) given X(s) = x: lognormal(log x + H~(s,t), sigma^2 (t-s)).
LognormalLaw transition_law(const DiffusionParams& params, double x, double s, double t);

/// Closed-form characteristic selected by spec; conditional variants read
/// (y, s) from `given`, unconditional ones use the initial law at t0.
double moment(const DiffusionParams& params, const InitialLaw& init, const MomentSpec& spec,
              double t, std::optional<std::pair<double, double>> given = std::nullopt);

/// Mean and variance of the perturbed process relative to the classical one
/// sharing (q, k, eta, sigma): (exp(J(t)), exp(J(t))^2).
struct MeanVarianceRatio {
    double mean_ratio;
    double var_ratio;
};
MeanVarianceRatio mean_variance_ratio(const DiffusionParams& params_mod, double t);

/// Covariance of the log-process at the given times:
/// sigma_ij = sigma0^2 + sigma^2 (min(t_i, t_j) - t0).
std::vector<std::vector<double>> fdd_log_covariance(const DiffusionParams& params,
                                                    const InitialLaw& init,
                                                    const std::vector<double>& times);

/// Exact discrete sampling through the transition law:
/// X(t_{j+1}) = X(t_j) exp(H~(t_j, t_{j+1}) + sigma sqrt(dt) Z).
/// No discretization bias; deterministic per seed with per-path streams.
SamplePaths simulate_paths(const DiffusionParams& params, const InitialLaw& init,
                           const std::vector<double>& grid, std::size_t n_paths,
                           std::uint64_t seed);

}  // namespace diffusion
}  // namespace richfit

#endif
