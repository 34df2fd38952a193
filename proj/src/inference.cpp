#include "richfit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace richfit {
namespace inference {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double inflection_ratio(double q) { return std::exp(q * std::log(q / (1.0 + q))); }

growth::RichardsParams params_for_kernel(double q, double k, double eta) {
    return growth::RichardsParams(q, k, eta, 0.0, 1.0);
}

// Raw likelihood core avoiding repeated parameter-object construction.
double ll_core_raw(const VTransform& vt, double q, double k, double eta, double sigma,
                   const growth::Perturbation& c) {
    if (!(q > 0.0 && k > 0.0 && k < 1.0 && eta > 0.0 && sigma > 0.0)) return kNegInf;
    const double log_k = std::log(k);
    const double s2 = sigma * sigma;
    const bool perturbed = c.kind() != growth::Perturbation::Kind::None;

    double phi = 0.0, gamma = 0.0;
    if (vt.common_grid && !perturbed) {
        const auto& t = vt.grid_times;
        const double d = static_cast<double>(vt.v0.size());
        double log_prev = std::log(std::exp(t[0] * log_k) + eta);
        for (std::size_t j = 0; j + 1 < t.size(); ++j) {
            const double log_next = std::log(std::exp(t[j + 1] * log_k) + eta);
            const double dt = t[j + 1] - t[j];
            const double m = q * (log_prev - log_next) - 0.5 * s2 * dt;
            phi += d * m * m / dt;
            gamma += vt.v_column_sums[j] * m / std::sqrt(dt);
            log_prev = log_next;
        }
    } else {
        growth::RichardsParams kp = params_for_kernel(q, k, eta);
        for (std::size_t i = 0; i < vt.v1.size(); ++i) {
            const auto& times = vt.times[i];
            double log_prev = std::log(std::exp(times[0] * log_k) + eta);
            for (std::size_t j = 0; j < vt.v1[i].size(); ++j) {
                const double log_next = std::log(std::exp(times[j + 1] * log_k) + eta);
                const double dt = vt.deltas[i][j];
                double m = q * (log_prev - log_next) - 0.5 * s2 * dt;
                if (perturbed)
                    m += growth::perturbation_integral(c, kp, times[j], times[j + 1]);
                phi += m * m / dt;
                gamma += vt.v1[i][j] * m / std::sqrt(dt);
                log_prev = log_next;
            }
        }
    }
    const double n = static_cast<double>(vt.n_increments);
    const double value = -0.5 * n * std::log(s2) - (vt.z1 + phi - 2.0 * gamma) / (2.0 * s2);
    return std::isfinite(value) ? value : kNegInf;
}

}  // namespace

VTransform v_transform(const SamplePaths& data) {
    data.validate();
    VTransform vt;
    const std::size_t d = data.path_count();
    vt.v0.resize(d);
    vt.v1.resize(d);
    vt.deltas.resize(d);
    vt.times = data.times;
    vt.n_increments = 0;
    vt.z1 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const auto& t = data.times[i];
        const auto& x = data.values[i];
        vt.v0[i] = x.front();
        vt.v1[i].resize(t.size() - 1);
        vt.deltas[i].resize(t.size() - 1);
        for (std::size_t j = 0; j + 1 < t.size(); ++j) {
            const double dt = t[j + 1] - t[j];
            vt.deltas[i][j] = dt;
            vt.v1[i][j] = std::log(x[j + 1] / x[j]) / std::sqrt(dt);
            vt.z1 += vt.v1[i][j] * vt.v1[i][j];
        }
        vt.n_increments += t.size() - 1;
    }
    vt.common_grid = data.common_grid();
    if (vt.common_grid) {
        vt.grid_times = data.times[0];
        vt.v_column_sums.assign(vt.grid_times.size() - 1, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < vt.v1[i].size(); ++j)
                vt.v_column_sums[j] += vt.v1[i][j];
    }
    return vt;
}

SamplePaths v_untransform(const VTransform& vt) {
    SamplePaths out;
    out.times = vt.times;
    out.values.resize(vt.v0.size());
    for (std::size_t i = 0; i < vt.v0.size(); ++i) {
        out.values[i].resize(vt.times[i].size());
        out.values[i][0] = vt.v0[i];
        for (std::size_t j = 0; j < vt.v1[i].size(); ++j)
            out.values[i][j + 1] =
                out.values[i][j] * std::exp(vt.v1[i][j] * std::sqrt(vt.deltas[i][j]));
    }
    return out;
}

std::pair<double, double> initial_mles(const std::vector<double>& v0) {
    if (v0.empty()) throw std::invalid_argument("initial_mles: no paths");
    double mu = 0.0;
    for (double v : v0) {
        if (!(v > 0.0)) throw std::invalid_argument("initial_mles: nonpositive initial value");
        mu += std::log(v);
    }
    mu /= static_cast<double>(v0.size());
    double var = 0.0;
    for (double v : v0) {
        const double e = std::log(v) - mu;
        var += e * e;
    }
    var /= static_cast<double>(v0.size());
    return {mu, var};
}

LikelihoodTerms likelihood_terms(const VTransform& vt, const diffusion::DiffusionParams& xi,
                                 const growth::Perturbation& c) {
    const auto& p = xi.richards;
    const double s2 = xi.sigma * xi.sigma;
    double phi = 0.0, gamma = 0.0;
    for (std::size_t i = 0; i < vt.v1.size(); ++i) {
        for (std::size_t j = 0; j < vt.v1[i].size(); ++j) {
            const double ta = vt.times[i][j];
            const double tb = vt.times[i][j + 1];
            const double dt = vt.deltas[i][j];
            double m = p.q * (std::log(p.pow_k(ta) + p.eta) - std::log(p.pow_k(tb) + p.eta)) -
                       0.5 * s2 * dt;
            if (c.kind() != growth::Perturbation::Kind::None)
                m += growth::perturbation_integral(c, p, ta, tb);
            phi += m * m / dt;
            gamma += vt.v1[i][j] * m / std::sqrt(dt);
        }
    }
    return {vt.z1, phi, gamma};
}

double log_likelihood_core(const VTransform& vt, const diffusion::DiffusionParams& xi,
                           const growth::Perturbation& c) {
    return ll_core_raw(vt, xi.richards.q, xi.richards.k, xi.richards.eta, xi.sigma, c);
}

opt::Objective make_likelihood_objective(const VTransform& vt, const growth::Perturbation& c) {
    return [&vt, c](const std::vector<double>& x) {
        return ll_core_raw(vt, x[0], x[1], x[2], x[3], c);
    };
}

bool BoundsBox::contains(double q_, double k_, double eta_, double sigma_) const {
    return q_ >= q[0] && q_ <= q[1] && k_ >= k[0] && k_ <= k[1] && eta_ >= eta[0] &&
           eta_ <= eta[1] && sigma_ > sigma[0] && sigma_ < sigma[1];
}

opt::Box BoundsBox::to_box() const {
    auto widen = [](double lo, double hi) {
        if (hi - lo < 1e-6) {
            const double mid = 0.5 * (lo + hi);
            return std::pair<double, double>{mid - 5e-7, mid + 5e-7};
        }
        return std::pair<double, double>{lo, hi};
    };
    auto [qlo, qhi] = widen(std::max(q[0], 1e-6), q[1]);
    auto [klo, khi] = widen(std::max(k[0], 1e-6), std::min(k[1], 1.0 - 1e-9));
    auto [elo, ehi] = widen(std::max(eta[0], 1e-8), eta[1]);
    auto [slo, shi] = widen(std::max(sigma[0], 1e-6), sigma[1]);
    return opt::Box({qlo, klo, elo, slo}, {qhi, khi, ehi, shi});
}

double observed_inflection(const numerics::CubicSpline& mean_spline) {
    const auto& knots = mean_spline.knots();
    double obs_step = knots.back() - knots.front();
    for (std::size_t j = 1; j < knots.size(); ++j)
        obs_step = std::min(obs_step, knots[j] - knots[j - 1]);
    const double step = obs_step / 100.0;

    // Dense scan of S'; the argmax is refined by a parabola through its neighbours.
    const std::size_t n_steps =
        static_cast<std::size_t>((knots.back() - knots.front()) / step);
    std::vector<double> ts(n_steps + 1), vs(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        ts[i] = std::min(knots.front() + step * static_cast<double>(i), knots.back());
        vs[i] = mean_spline.derivative(ts[i]);
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < vs.size(); ++i)
        if (vs[i] > vs[arg]) arg = i;
    if (arg == 0 || arg + 1 >= vs.size())
        throw std::runtime_error("observed_inflection: no interior maximum of S'");
    double t_infl = ts[arg];
    const double denom = vs[arg - 1] - 2.0 * vs[arg] + vs[arg + 1];
    if (denom < 0.0) {
        const double shift = 0.5 * (vs[arg - 1] - vs[arg + 1]) / denom;
        if (std::abs(shift) <= 1.0) t_infl += shift * step;
    }
    return t_infl;
}

BoundsBox bound_parameters(const SamplePaths& data, double p_guess) {
    if (!(p_guess > 0.0)) throw std::invalid_argument("bound_parameters: p must be positive");
    data.validate();
    if (!data.common_grid())
        throw std::invalid_argument("bound_parameters: a common observation grid is required");
    const std::vector<double>& grid = data.times[0];
    const std::vector<double> mean = data.sample_mean();
    const numerics::CubicSpline spline(grid, mean);

    const double t_infl = observed_inflection(spline);
    const double s_infl = spline(t_infl);
    const double k_star = (1.0 + p_guess) * s_infl;

    // t1: first observation instant with S(t)/K* above e^{-1}.
    const double threshold = k_star * std::exp(-1.0);
    double t1 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (mean[j] > threshold) {
            t1 = grid[j];
            break;
        }
    }
    if (!std::isfinite(t1))
        throw std::runtime_error("bound_parameters: sample mean never exceeds K* e^{-1}");
    // t2: first observation instant strictly after the observed inflection.
    double t2 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (grid[j] > t_infl) {
            t2 = grid[j];
            break;
        }
    }
    if (!std::isfinite(t2))
        throw std::runtime_error("bound_parameters: no observation after the inflection");

    auto solve_q = [&](double tj) {
        const double ratio = spline(tj) / k_star;
        // (q/(1+q))^q falls from 1 to e^{-1}; outside that range no shape
        // exponent reproduces the ratio. A ratio between the asymptote and
        // the search cap's value has its root beyond the cap: saturate there,
        // which can only widen the interval toward large q.
        if (ratio <= std::exp(-1.0) || ratio >= 1.0)
            throw std::runtime_error(
                "bound_parameters: inflection-ratio equation has no admissible root");
        const double lo = 1e-6, hi = 50.0;
        if (ratio <= inflection_ratio(hi)) return hi;
        if (ratio >= inflection_ratio(lo)) return lo;
        auto f = [&](double q) { return inflection_ratio(q) - ratio; };
        return numerics::find_root(f, lo, hi, 1e-12);
    };
    const double q1 = solve_q(t1);
    const double q2 = solve_q(t2);

    const double t0 = grid.front();
    const double x0 = mean.front();
    auto g = [&](double tj, double qj) {
        const double a = qj * (std::pow(k_star / x0, 1.0 / qj) - 1.0);
        return std::pow(a, 1.0 / (t0 - tj));
    };
    const double k1 = g(t1, q1);
    const double k2 = g(t2, q2);
    auto h = [](double qj, double kj, double tj) { return qj * std::pow(kj, tj); };
    const double eta_a = h(q1, k1, t2);
    const double eta_b = h(q2, k2, t1);

    BoundsBox box{};
    box.q = {std::min(q1, q2), std::max(q1, q2)};
    box.k = {std::clamp(std::min(k1, k2), 1e-6, 1.0 - 1e-9),
             std::clamp(std::max(k1, k2), 1e-6, 1.0 - 1e-9)};
    box.eta = {std::max(std::min(eta_a, eta_b), 1e-8), std::max(eta_a, eta_b)};
    box.sigma = {0.0, 0.1};
    box.provenance = {t1, t2, k_star, t_infl, s_infl};
    if (!(box.k[0] < box.k[1]))
        throw std::runtime_error("bound_parameters: empty interval for k inside (0,1)");
    return box;
}

FitMleResult fit_mle(const SamplePaths& data, double window_end, const BoundsBox& box,
                     opt::Method method, const opt::OptBudget& budget,
                     std::size_t n_replications) {
    data.validate();
    if (window_end < box.provenance.t_inflection_obs)
        throw std::invalid_argument("fit_mle: window must reach past the observed inflection");

    SamplePaths restricted;
    restricted.times.resize(data.path_count());
    restricted.values.resize(data.path_count());
    for (std::size_t i = 0; i < data.path_count(); ++i) {
        for (std::size_t j = 0; j < data.times[i].size(); ++j) {
            if (data.times[i][j] <= window_end + 1e-12) {
                restricted.times[i].push_back(data.times[i][j]);
                restricted.values[i].push_back(data.values[i][j]);
            }
        }
    }
    const VTransform vt = v_transform(restricted);
    if (vt.n_increments < 10)
        throw std::invalid_argument("fit_mle: fewer than 10 increments in the fitting window");

    const growth::Perturbation none = growth::Perturbation::none();
    const opt::Objective objective = make_likelihood_objective(vt, none);
    const opt::ReplicationResult rep =
        opt::replicate_average(method, objective, box.to_box(), budget, n_replications);

    const auto [mu1, s1sq] = initial_mles(vt.v0);
    growth::RichardsParams richards(rep.mean[0], rep.mean[1], rep.mean[2], restricted.times[0][0],
                                    std::exp(mu1));
    diffusion::DiffusionParams params(richards, rep.mean[3]);
    return {params, mu1, s1sq, rep};
}

TstarEstimate estimate_tstar(const diffusion::DiffusionParams& mle, double p, TstarMode mode,
                             const std::optional<FptSettings>& fpt_cfg) {
    if (mode == TstarMode::Deterministic)
        return {growth::switch_time(mle.richards, p), std::nullopt};
    if (!fpt_cfg) throw std::invalid_argument("estimate_tstar: fpt mode needs settings");
    const FptSettings& cfg = *fpt_cfg;
    fpt::FptDensity density;
    if (cfg.use_monte_carlo) {
        density = fpt::fpt_monte_carlo(mle, diffusion::InitialLaw::degenerate(mle.richards.x0),
                                       cfg.boundary, cfg.horizon, cfg.n_paths, cfg.dt, cfg.seed);
    } else {
        density = fpt::fpt_integral_equation(mle, mle.richards.x0, cfg.boundary, cfg.horizon,
                                             cfg.n_nodes);
    }
    const fpt::FptSummary summary = fpt::fpt_summary(density);
    return {summary.mean, summary};
}

growth::Perturbation estimate_C(const SamplePaths& data_full,
                                const diffusion::DiffusionParams& mle, double t_star_hat) {
    data_full.validate();
    if (!data_full.common_grid())
        throw std::invalid_argument("estimate_C: a common observation grid is required");
    const std::vector<double>& grid = data_full.times[0];
    const std::vector<double> mean = data_full.sample_mean();

    std::vector<double> v0(data_full.path_count());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = data_full.values[i].front();
    const auto [mu1, s1sq] = initial_mles(v0);
    const double e_x0 = std::exp(mu1 + 0.5 * s1sq);

    const auto& p = mle.richards;
    const double log_den0 = std::log(p.eta + p.pow_k(grid.front()));

    std::vector<double> post_t, post_m;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (grid[j] <= t_star_hat) continue;
        const double est = e_x0 * std::exp(p.q * (log_den0 - std::log(p.eta + p.pow_k(grid[j]))));
        post_t.push_back(grid[j]);
        post_m.push_back(std::log(mean[j] / est));
    }
    if (post_t.size() < 4)
        throw std::runtime_error("estimate_C: fewer than 4 observation times past t_star");

    const numerics::CubicSpline m_spline(post_t, post_m);
    std::vector<double> knot_t, knot_c;
    if (post_t.front() - t_star_hat > 1e-9) {
        knot_t.push_back(t_star_hat);
        knot_c.push_back(0.0);
    }
    for (std::size_t j = 0; j < post_t.size(); ++j) {
        const double kt = p.pow_k(post_t[j]);
        const double coef = (p.eta + kt) / (kt * std::abs(p.log_k()));
        const double c = coef * m_spline.derivative(post_t[j]);
        knot_t.push_back(post_t[j]);
        knot_c.push_back(std::max(0.0, c));
    }
    knot_c.front() = 0.0;
    return growth::Perturbation::tabulated(std::move(knot_t), std::move(knot_c));
}

double rae(const std::vector<double>& reference, const std::vector<double>& estimate) {
    if (reference.size() != estimate.size() || reference.empty())
        throw std::invalid_argument("rae: series lengths must match and be nonempty");
    double acc = 0.0;
    for (std::size_t j = 0; j < reference.size(); ++j) {
        if (reference[j] == 0.0) throw std::invalid_argument("rae: zero reference entry");
        acc += std::abs(reference[j] - estimate[j]) / std::abs(reference[j]);
    }
    return acc / static_cast<double>(reference.size());
}

FitReport run_procedure1(const SamplePaths& data, const std::vector<double>& p_candidates,
                         const ProcedureOptions& options) {
    if (p_candidates.empty()) throw std::invalid_argument("run_procedure1: no candidate p values");
    data.validate();
    const SamplePaths sub = data.subsample(options.stride);
    if (!sub.common_grid())
        throw std::invalid_argument("run_procedure1: a common observation grid is required");
    const std::vector<double>& grid = sub.times[0];
    const std::vector<double> mean = sub.sample_mean();

    FitReport best;
    bool have_best = false;
    std::vector<CandidateResult> candidates;
    for (double p : p_candidates) {
        FitReport report;
        report.p_used = p;
        report.grid = grid;
        report.sample_mean = mean;
        report.bounds = bound_parameters(sub, p);

        // Fitting window: up to the first observation where the sample mean
        // reaches the boundary K* = (1+p) S(t_I*).
        double window_end = grid.back();
        bool crossed = false;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (mean[j] >= report.bounds.provenance.k_star) {
                window_end = grid[j];
                crossed = true;
                break;
            }
        }
        if (options.window_end) {
            window_end = *options.window_end;
            crossed = true;
        }
        report.window_end = window_end;
        report.window_crossed = crossed;

        const FitMleResult fit = fit_mle(sub, window_end, report.bounds, options.method,
                                         options.budget, options.replications);
        report.mle = fit.params;
        report.mu1_hat = fit.mu1_hat;
        report.sigma1_sq_hat = fit.sigma1_sq_hat;
        report.replication_trace = fit.trace.replicates;

        report.t_star_det = growth::switch_time(fit.params.richards, p);

        FptSettings fs;
        fs.boundary = (options.fpt_boundary == ProcedureOptions::FptBoundary::ObservedInflection)
                          ? report.bounds.provenance.k_star
                          : (1.0 + p) * growth::tangent_summary(fit.params.richards).x_at_inflection;
        fs.horizon = grid.back();
        fs.n_paths = options.fpt_paths;
        fs.dt = options.fpt_dt;
        fs.seed = options.fpt_seed;
        const TstarEstimate fpt_est = estimate_tstar(fit.params, p, TstarMode::Fpt, fs);
        report.t_star_fpt = *fpt_est.summary;

        // The closed-form estimate drives the downstream steps.
        report.c_hat = estimate_C(sub, fit.params, report.t_star_det);

        const auto& rp = fit.params.richards;
        const double e_x0 = std::exp(report.mu1_hat + 0.5 * report.sigma1_sq_hat);
        const double log_den0 = std::log(rp.eta + rp.pow_k(grid.front()));
        report.estimated_mean.resize(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) {
            double est =
                e_x0 * std::exp(rp.q * (log_den0 - std::log(rp.eta + rp.pow_k(grid[j]))));
            if (grid[j] > report.t_star_det)
                est *= std::exp(growth::perturbation_integral(report.c_hat, rp,
                                                              report.t_star_det, grid[j]));
            report.estimated_mean[j] = est;
        }
        report.rae_mean = rae(mean, report.estimated_mean);
        candidates.push_back({p, report.rae_mean});

        if (!have_best || report.rae_mean < best.rae_mean) {
            best = report;
            have_best = true;
        }
    }
    best.candidates = candidates;
    return best;
}

}  // namespace inference
}  // namespace richfit
