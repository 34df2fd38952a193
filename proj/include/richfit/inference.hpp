#ifndef RICHFIT_INFERENCE_HPP
#define RICHFIT_INFERENCE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "richfit/diffusion.hpp"
#include "richfit/fpt.hpp"
#include "richfit/optimize.hpp"
#include "richfit/sample_paths.hpp"

namespace richfit {
namespace inference {

/// Change of variables underlying the likelihood: per-path initial
/// observations and scaled log-increments v_ij = dt^{-1/2} log(x_{j+1}/x_j).
struct VTransform {
    std::vector<double> v0;
    std::vector<std::vector<double>> v1;
    std::vector<std::vector<double>> deltas;
    std::vector<std::vector<double>> times;  // observation times per path
    std::size_t n_increments;                // sum of (n_i - 1)

    bool common_grid;
    std::vector<double> grid_times;          // shared grid when common_grid
    std::vector<double> v_column_sums;       // per-interval sums of v over paths
    double z1;                               // sum of v^2, parameter-independent
};

VTransform v_transform(const SamplePaths& data);

/// Reconstructs the observations from (v0, v1, deltas); inverse of v_transform.
SamplePaths v_untransform(const VTransform& vt);

/// MLEs of the lognormal initial law: mean and 1/d-variance of log v0.
std::pair<double, double> initial_mles(const std::vector<double>& v0);

struct LikelihoodTerms {
    double z1;
    double phi_term;
    double gamma_term;
};

/// The three sums entering the objective, evaluated by the plain double loop.
LikelihoodTerms likelihood_terms(const VTransform& vt, const diffusion::DiffusionParams& xi,
                                 const growth::Perturbation& c);

/// Log-likelihood core -(n/2) log sigma^2 - (Z1 + Phi - 2 Gamma)/(2 sigma^2),
/// with the drift integrals carrying the switching time of c. Non-finite
/// evaluations collapse to -infinity so optimizers can reject them.
double log_likelihood_core(const VTransform& vt, const diffusion::DiffusionParams& xi,
                           const growth::Perturbation& c);

/// Box objective over (q, k, eta, sigma) bound to a fixed transform and
/// perturbation; uses the shared-grid fast path when available.
opt::Objective make_likelihood_objective(const VTransform& vt, const growth::Perturbation& c);

/// Data-driven search box: spline of the cross-path sample mean, observed
/// inflection, K* = (1+p) S(t_I*), then sequential intervals for q, k, eta
/// plus the fixed sigma interval (0, 0.1).
struct BoundsBox {
    std::array<double, 2> q, k, eta, sigma;
    struct Provenance {
        double t1, t2, k_star, t_inflection_obs, s_at_inflection;
    } provenance;

    bool contains(double q_, double k_, double eta_, double sigma_) const;
    opt::Box to_box() const;
};

BoundsBox bound_parameters(const SamplePaths& data, double p_guess);

/// Observed inflection instant of a sample-mean spline: dense-grid argmax of
/// S' (step = observation step / 100) refined by a parabolic fit.
double observed_inflection(const numerics::CubicSpline& mean_spline);

struct FitMleResult {
    diffusion::DiffusionParams params;  // perturbation None, t0/x0 from the data
    double mu1_hat;
    double sigma1_sq_hat;
    opt::ReplicationResult trace;
};

/// Replicate-averaged maximum likelihood over the box, using only the
/// observations with t <= window_end and the unperturbed drift.
FitMleResult fit_mle(const SamplePaths& data, double window_end, const BoundsBox& box,
                     opt::Method method, const opt::OptBudget& budget,
                     std::size_t n_replications);

enum class TstarMode { Deterministic, Fpt };

struct FptSettings {
    double boundary = 0.0;
    double horizon = 0.0;
    std::size_t n_paths = 100000;
    double dt = 0.0025;
    std::uint64_t seed = 0;
    bool use_monte_carlo = true;  // false: Volterra solver
    std::size_t n_nodes = 2000;
};

struct TstarEstimate {
    double t_star;
    std::optional<fpt::FptSummary> summary;
};

/// Switching-time estimate: the closed-form crossing at the fitted
/// parameters, or the mean first-passage time of the fitted classical
/// process through the configured boundary.
TstarEstimate estimate_tstar(const diffusion::DiffusionParams& mle, double p, TstarMode mode,
                             const std::optional<FptSettings>& fpt_cfg = std::nullopt);

/// Nonparametric recovery of the perturbation from the post-switch ratio of
/// the sample mean to the fitted classical mean: C^(t) scales the spline
/// derivative of m(t) = log(sample mean / fitted mean), clamped at zero, and
/// is returned tabulated on the observation grid past t_star_hat.
growth::Perturbation estimate_C(const SamplePaths& data_full,
                                const diffusion::DiffusionParams& mle, double t_star_hat);

/// Mean absolute relative error between two equal-length series.
double rae(const std::vector<double>& reference, const std::vector<double>& estimate);

struct ProcedureOptions {
    opt::Method method = opt::Method::SA;
    opt::OptBudget budget{};
    std::size_t replications = 30;
    std::size_t stride = 1;  // observation-grid thinning applied before fitting
    std::optional<double> window_end;  // overrides the automatic boundary crossing
    enum class FptBoundary { ObservedInflection, EstimatedCurve } fpt_boundary =
        FptBoundary::ObservedInflection;
    std::size_t fpt_paths = 100000;
    double fpt_dt = 0.0025;
    std::uint64_t fpt_seed = 1;
};

struct CandidateResult {
    double p;
    double rae_mean;
};

struct FitReport {
    diffusion::DiffusionParams mle;
    double mu1_hat = 0.0;
    double sigma1_sq_hat = 0.0;
    BoundsBox bounds{};
    double t_star_det = 0.0;
    fpt::FptSummary t_star_fpt{};
    growth::Perturbation c_hat = growth::Perturbation::none();
    double rae_mean = 0.0;
    std::vector<std::vector<double>> replication_trace;
    double p_used = 0.0;
    std::vector<CandidateResult> candidates;
    double window_end = 0.0;
    bool window_crossed = true;
    std::vector<double> grid;             // observation grid used for fitting
    std::vector<double> sample_mean;      // cross-path mean on that grid
    std::vector<double> estimated_mean;   // reconstructed mean of the perturbed process

    FitReport() : mle(growth::RichardsParams(1.0, 0.5, 1.0, 0.0, 1.0), 1e-2) {}
};

/// Full pipeline: bound the parameters, fit on the pre-switch window, place
/// the switching time (closed form downstream, first-passage summary kept
/// alongside), recover C, reconstruct the perturbed mean, score by RAE.
/// With several candidate p values the minimizer of rae_mean wins.
FitReport run_procedure1(const SamplePaths& data, const std::vector<double>& p_candidates,
                         const ProcedureOptions& options);

}  // namespace inference
}  // namespace richfit

#endif
