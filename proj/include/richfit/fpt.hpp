#ifndef RICHFIT_FPT_HPP
#define RICHFIT_FPT_HPP

#include <cstdint>

#include "richfit/diffusion.hpp"

namespace richfit {
namespace fpt {

/// First-passage-time density sampled on an ordered time grid. The trapezoid
/// integral equals the probability mass captured before the horizon (<= 1).
struct FptDensity {
    std::vector<double> grid;
    std::vector<double> density;
    double mass() const;
};

struct FptSummary {
    double mean;
    double mode;
    double std_dev;
    double d1, d5, d9;  // deciles
    double mass_captured;
};

/// Monte-Carlo estimate: exact-transition paths on a dt grid, first
/// up-crossing located by linear interpolation of the log-path within the
/// straddling step, Gaussian-kernel smoothing with a plug-in bandwidth.
/// Throws when fewer than half the paths reach the boundary by the horizon.
FptDensity fpt_monte_carlo(const diffusion::DiffusionParams& params,
                           const diffusion::InitialLaw& init, double boundary, double horizon,
                           std::size_t n_paths, double dt, std::uint64_t seed);

/// Deterministic estimate through the second-kind Volterra equation for the
/// crossing of log X through the moving level b(v) = log(S/x0) - H~(t0, t0+v)
/// by the driftless log-noise (a Wiener process with variance sigma^2 v):
///
///   g(v) = -2 Psi(v | 0, 0) + 2 int_0^v g(u) Psi(v | b(u), u) du,
///   Psi(v | y, u) = N(b(v); y, sigma^2 (v-u)) [ b'(v)/2 - (b(v)-y)/(2(v-u)) ],
///
/// stepped by composite trapezoid on n_nodes (the diagonal kernel vanishes,
/// so the recursion is explicit). The solver runs at n_nodes and 2 n_nodes
/// and fails when the two cumulative distributions disagree by more than
/// 1e-3 in sup norm; the fine solution is returned, negative round-off
/// clipped at zero.
FptDensity fpt_integral_equation(const diffusion::DiffusionParams& params, double x0,
                                 double boundary, double horizon, std::size_t n_nodes);

/// Moments, mode (parabolic-refined grid argmax) and deciles of the density
/// renormalized by its captured mass.
FptSummary fpt_summary(const FptDensity& density);

}  // namespace fpt
}  // namespace richfit

#endif
