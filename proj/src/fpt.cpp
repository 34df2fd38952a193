#include "richfit/fpt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "richfit/numerics.hpp"

namespace richfit {
namespace fpt {

namespace {

// b(v) and b'(v) on the uniform solver grid: b(v) = log(S/x0) - H~(t0, t0+v),
// b'(v) = sigma^2/2 - h~(t0+v). The perturbation integral is accumulated
// step by step so b is additive and cheap.
struct Boundary {
    std::vector<double> b, db;
};

Boundary boundary_on_grid(const diffusion::DiffusionParams& params, double x0, double level,
                          double t0, double dt, std::size_t n) {
    const auto& p = params.richards;
    const double s2 = params.sigma * params.sigma;
    const bool perturbed = params.perturbation.kind() != growth::Perturbation::Kind::None;
    Boundary out;
    out.b.resize(n + 1);
    out.db.resize(n + 1);
    const double log_ratio = std::log(level) - std::log(x0);
    double j_acc = 0.0;
    double log_den0 = std::log(p.pow_k(t0) + p.eta);
    for (std::size_t j = 0; j <= n; ++j) {
        const double t = t0 + dt * static_cast<double>(j);
        if (perturbed && j > 0) {
            const double prev = t - dt;
            const double lo = std::max(prev, params.perturbation.t_star());
            const double hi = std::max(t, params.perturbation.t_star());
            if (hi > lo)
                j_acc += numerics::integrate(
                    [&](double u) {
                        return params.perturbation.value(p, u) * growth::perturbation_kernel(p, u);
                    },
                    lo, hi, 1e-13);
        }
        const double drift =
            p.q * (log_den0 - std::log(p.pow_k(t) + p.eta)) + j_acc - 0.5 * s2 * (t - t0);
        out.b[j] = log_ratio - drift;
        double h = growth::growth_rate_h(p, t);
        if (perturbed && t > params.perturbation.t_star())
            h += params.perturbation.value(p, t) * growth::perturbation_kernel(p, t);
        out.db[j] = 0.5 * s2 - h;
    }
    return out;
}

std::vector<double> solve_volterra(const Boundary& bd, double sigma, double dt, std::size_t n) {
    std::vector<double> g(n + 1, 0.0);
    const double s2 = sigma * sigma;
    double peak = 0.0;
    // Only nodes carrying non-negligible density feed the convolution; the
    // list stays short both for smooth densities and for narrow spikes.
    std::vector<std::size_t> active;
    for (std::size_t j = 1; j <= n; ++j) {
        const double vj = dt * static_cast<double>(j);
        const double var0 = s2 * vj;
        const double z0 = bd.b[j] / std::sqrt(var0);
        double value = 0.0;
        if (std::abs(z0) < 37.0)
            value = std::exp(-0.5 * z0 * z0) / std::sqrt(2.0 * M_PI * var0) *
                    (bd.b[j] / vj - bd.db[j]);
        double sum = 0.0;
        for (const std::size_t i : active) {
            const double tau = dt * static_cast<double>(j - i);
            const double var = s2 * tau;
            const double diff = bd.b[j] - bd.b[i];
            const double z = diff / std::sqrt(var);
            if (std::abs(z) >= 37.0) continue;
            sum += g[i] * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI * var) *
                   (0.5 * bd.db[j] - 0.5 * diff / tau);
        }
        value += 2.0 * dt * sum;
        g[j] = value;
        if (value > peak) peak = value;
        if (value > 0.0 && value > 1e-15 * peak) active.push_back(j);
    }
    return g;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& grid,
                                         const std::vector<double>& density) {
    std::vector<double> cdf(grid.size(), 0.0);
    for (std::size_t j = 1; j < grid.size(); ++j)
        cdf[j] = cdf[j - 1] + 0.5 * (std::max(density[j - 1], 0.0) + std::max(density[j], 0.0)) *
                                  (grid[j] - grid[j - 1]);
    return cdf;
}

}  // namespace

double FptDensity::mass() const {
    if (grid.size() != density.size() || grid.size() < 2) return 0.0;
    double m = 0.0;
    for (std::size_t j = 1; j < grid.size(); ++j)
        m += 0.5 * (density[j - 1] + density[j]) * (grid[j] - grid[j - 1]);
    return m;
}

FptDensity fpt_monte_carlo(const diffusion::DiffusionParams& params,
                           const diffusion::InitialLaw& init, double boundary, double horizon,
                           std::size_t n_paths, double dt, std::uint64_t seed) {
    const double t0 = params.richards.t0;
    if (!(dt > 0.0)) throw std::invalid_argument("fpt_monte_carlo: dt must be positive");
    if (!(horizon > t0)) throw std::invalid_argument("fpt_monte_carlo: horizon must exceed t0");
    if (!(boundary > std::exp(init.mu0)))
        throw std::invalid_argument("fpt_monte_carlo: boundary must exceed the initial value");
    if (n_paths < 10) throw std::invalid_argument("fpt_monte_carlo: too few paths");

    const std::size_t n_steps = static_cast<std::size_t>(std::ceil((horizon - t0) / dt));
    std::vector<double> drift(n_steps), t_grid(n_steps + 1);
    for (std::size_t j = 0; j <= n_steps; ++j)
        t_grid[j] = std::min(horizon, t0 + dt * static_cast<double>(j));
    for (std::size_t j = 0; j < n_steps; ++j)
        drift[j] = diffusion::log_drift_H(params, t_grid[j], t_grid[j + 1]);

    const double log_level = std::log(boundary);
    const double sigma = params.sigma;
    const double sigma0 = std::sqrt(init.sigma0_sq);
    std::vector<double> crossing(n_paths, -1.0);
    numerics::parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            numerics::RngStream rng(seed, i);
            double log_x = init.mu0;
            if (!init.is_degenerate()) log_x += sigma0 * rng.normal();
            if (log_x >= log_level) {
                crossing[i] = t0;
                continue;
            }
            for (std::size_t j = 0; j < n_steps; ++j) {
                const double step = t_grid[j + 1] - t_grid[j];
                const double log_next = log_x + drift[j] + sigma * std::sqrt(step) * rng.normal();
                if (log_next >= log_level) {
                    const double frac = (log_level - log_x) / (log_next - log_x);
                    crossing[i] = t_grid[j] + frac * step;
                    break;
                }
                log_x = log_next;
            }
        }
    });

    std::vector<double> samples;
    samples.reserve(n_paths);
    for (double c : crossing)
        if (c >= 0.0) samples.push_back(c);
    const double mass = static_cast<double>(samples.size()) / static_cast<double>(n_paths);
    if (mass < 0.5)
        throw std::runtime_error("fpt_monte_carlo: boundary rarely reached; extend horizon");

    // Plug-in kernel bandwidth from the sample spread.
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    double mean = 0.0;
    for (double s : sorted) mean += s;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double s : sorted) var += (s - mean) * (s - mean);
    var /= static_cast<double>(m);
    const double iqr = sorted[static_cast<std::size_t>(0.75 * (m - 1))] -
                       sorted[static_cast<std::size_t>(0.25 * (m - 1))];
    double spread = std::sqrt(var);
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    double h = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
    if (!(h > 1e-9)) h = 1e-9;

    const std::size_t grid_n = 512;
    const double lo = std::max(t0, sorted.front() - 5.0 * h);
    const double hi = std::min(horizon, sorted.back() + 5.0 * h);
    const double step = std::max((hi - lo) / static_cast<double>(grid_n - 1), 1e-12);
    h = std::max(h, step);

    // Binned kernel smoothing: histogram at 4x grid resolution, then blur.
    const std::size_t bins = 4 * grid_n;
    std::vector<double> counts(bins, 0.0);
    const double bin_w = (hi - lo + 2.0 * step) / static_cast<double>(bins);
    for (double s : sorted) {
        double pos = (s - (lo - step)) / bin_w;
        const std::size_t b =
            static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins) - 1.0));
        counts[b] += 1.0;
    }
    FptDensity out;
    out.grid.resize(grid_n);
    out.density.assign(grid_n, 0.0);
    const double weight = 1.0 / (static_cast<double>(n_paths) * h * std::sqrt(2.0 * M_PI));
    for (std::size_t gidx = 0; gidx < grid_n; ++gidx) {
        const double t = lo + step * static_cast<double>(gidx);
        out.grid[gidx] = t;
        double acc = 0.0;
        for (std::size_t b = 0; b < bins; ++b) {
            if (counts[b] == 0.0) continue;
            const double center = lo - step + (static_cast<double>(b) + 0.5) * bin_w;
            const double z = (t - center) / h;
            if (std::abs(z) > 8.0) continue;
            acc += counts[b] * std::exp(-0.5 * z * z);
        }
        out.density[gidx] = acc * weight;
    }
    return out;
}

FptDensity fpt_integral_equation(const diffusion::DiffusionParams& params, double x0,
                                 double boundary, double horizon, std::size_t n_nodes) {
    const double t0 = params.richards.t0;
    if (!(x0 > 0.0)) throw std::invalid_argument("fpt_integral_equation: x0 must be positive");
    if (!(boundary > x0))
        throw std::invalid_argument("fpt_integral_equation: boundary must exceed x0");
    if (!(horizon > t0)) throw std::invalid_argument("fpt_integral_equation: horizon must exceed t0");
    if (n_nodes < 16) throw std::invalid_argument("fpt_integral_equation: too few nodes");

    const double level = boundary;
    const double span = horizon - t0;
    const std::size_t n_fine = 2 * n_nodes;
    const double dt_coarse = span / static_cast<double>(n_nodes);
    const double dt_fine = span / static_cast<double>(n_fine);

    const Boundary bd_fine = boundary_on_grid(params, x0, level, t0, dt_fine, n_fine);
    Boundary bd_coarse;
    bd_coarse.b.resize(n_nodes + 1);
    bd_coarse.db.resize(n_nodes + 1);
    for (std::size_t j = 0; j <= n_nodes; ++j) {
        bd_coarse.b[j] = bd_fine.b[2 * j];
        bd_coarse.db[j] = bd_fine.db[2 * j];
    }

    const std::vector<double> g_coarse = solve_volterra(bd_coarse, params.sigma, dt_coarse, n_nodes);
    const std::vector<double> g_fine = solve_volterra(bd_fine, params.sigma, dt_fine, n_fine);

    std::vector<double> grid_coarse(n_nodes + 1), grid_fine(n_fine + 1);
    for (std::size_t j = 0; j <= n_nodes; ++j)
        grid_coarse[j] = t0 + dt_coarse * static_cast<double>(j);
    for (std::size_t j = 0; j <= n_fine; ++j) grid_fine[j] = t0 + dt_fine * static_cast<double>(j);

    // Convergence gate: the two cumulative distributions must agree at the
    // shared nodes. This stays meaningful even when the density itself is a
    // near-singular spike the grid barely resolves.
    const std::vector<double> cdf_coarse = cumulative_trapezoid(grid_coarse, g_coarse);
    const std::vector<double> cdf_fine = cumulative_trapezoid(grid_fine, g_fine);
    double worst = 0.0;
    for (std::size_t j = 0; j <= n_nodes; ++j)
        worst = std::max(worst, std::abs(cdf_coarse[j] - cdf_fine[2 * j]));
    if (worst > 1e-3)
        throw std::runtime_error(
            "fpt_integral_equation: grid refinement has not converged; increase n_nodes");

    FptDensity out;
    out.grid = std::move(grid_fine);
    out.density = g_fine;
    for (double& d : out.density) d = std::max(d, 0.0);
    return out;
}

FptSummary fpt_summary(const FptDensity& density) {
    if (density.grid.size() != density.density.size() || density.grid.size() < 3)
        throw std::invalid_argument("fpt_summary: malformed density");
    const double mass = density.mass();
    if (!(mass > 0.0)) throw std::invalid_argument("fpt_summary: density carries no mass");

    const auto& t = density.grid;
    const auto& g = density.density;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 1; j < t.size(); ++j) {
        const double dt = t[j] - t[j - 1];
        m1 += 0.5 * (g[j - 1] * t[j - 1] + g[j] * t[j]) * dt;
        m2 += 0.5 * (g[j - 1] * t[j - 1] * t[j - 1] + g[j] * t[j] * t[j]) * dt;
    }
    m1 /= mass;
    m2 /= mass;

    const std::vector<double> cdf = cumulative_trapezoid(t, g);
    auto quantile = [&](double p) {
        const double target = p * mass;
        for (std::size_t j = 1; j < cdf.size(); ++j) {
            if (cdf[j] >= target) {
                const double seg = cdf[j] - cdf[j - 1];
                const double frac = (seg > 0.0) ? (target - cdf[j - 1]) / seg : 0.0;
                return t[j - 1] + frac * (t[j] - t[j - 1]);
            }
        }
        return t.back();
    };

    std::size_t peak = 0;
    for (std::size_t j = 1; j < g.size(); ++j)
        if (g[j] > g[peak]) peak = j;
    double mode = t[peak];
    if (peak > 0 && peak + 1 < g.size()) {
        const double denom = g[peak - 1] - 2.0 * g[peak] + g[peak + 1];
        if (denom < 0.0) {
            const double shift = 0.5 * (g[peak - 1] - g[peak + 1]) / denom;
            if (std::abs(shift) <= 1.0) mode = t[peak] + shift * (t[peak + 1] - t[peak]);
        }
    }

    FptSummary s{};
    s.mean = m1;
    s.mode = mode;
    s.std_dev = std::sqrt(std::max(0.0, m2 - m1 * m1));
    s.d1 = quantile(0.1);
    s.d5 = quantile(0.5);
    s.d9 = quantile(0.9);
    s.mass_captured = std::min(mass, 1.0);
    return s;
}

}  // namespace fpt
}  // namespace richfit
