#include "richfit/growth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace richfit {
namespace growth {

RichardsParams::RichardsParams(double q_, double k_, double eta_, double t0_, double x0_)
    : q(q_), k(k_), eta(eta_), t0(t0_), x0(x0_) {
    if (!(q > 0.0)) throw std::invalid_argument("RichardsParams: q must be positive");
    if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("RichardsParams: k must lie in (0,1)");
    if (!(eta > 0.0)) throw std::invalid_argument("RichardsParams: eta must be positive");
    if (!(x0 > 0.0)) throw std::invalid_argument("RichardsParams: x0 must be positive");
    if (!std::isfinite(t0)) throw std::invalid_argument("RichardsParams: t0 must be finite");
    log_k_ = std::log(k);
}

double RichardsParams::pow_k(double t) const { return std::exp(t * log_k_); }

Perturbation Perturbation::none() { return Perturbation(); }

Perturbation Perturbation::power_form(double m, double t_star) {
    if (!(m > 0.0)) throw std::invalid_argument("Perturbation: power exponent must be positive");
    if (!std::isfinite(t_star)) throw std::invalid_argument("Perturbation: t_star must be finite");
    Perturbation c;
    c.kind_ = Kind::PowerForm;
    c.m_ = m;
    c.t_star_ = t_star;
    return c;
}

Perturbation Perturbation::sigmoid_form(double y, double alpha, double beta, double t_star) {
    if (!(y > 0.0 && alpha > 0.0 && beta > 0.0))
        throw std::invalid_argument("Perturbation: sigmoid parameters must be positive");
    if (!std::isfinite(t_star)) throw std::invalid_argument("Perturbation: t_star must be finite");
    Perturbation c;
    c.kind_ = Kind::SigmoidForm;
    c.y_ = y;
    c.alpha_ = alpha;
    c.beta_ = beta;
    c.t_star_ = t_star;
    return c;
}

Perturbation Perturbation::tabulated(std::vector<double> times, std::vector<double> values) {
    if (times.size() != values.size() || times.size() < 2)
        throw std::invalid_argument("Perturbation: table needs >= 2 matching knots");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1]))
            throw std::invalid_argument("Perturbation: table times must be strictly increasing");
        if (values[i] < 0.0)
            throw std::invalid_argument("Perturbation: table values must be nonnegative");
    }
    if (values.front() != 0.0)
        throw std::invalid_argument("Perturbation: the first knot must sit at t* with value 0");
    Perturbation c;
    c.kind_ = Kind::Tabulated;
    c.t_star_ = times.front();
    c.table_times_ = std::make_shared<const std::vector<double>>(times);
    c.table_values_ = std::make_shared<const std::vector<double>>(values);
    c.table_ = std::make_shared<const numerics::MonotoneCubicSpline>(std::move(times),
                                                                     std::move(values));
    return c;
}

const std::vector<double>& Perturbation::table_times() const {
    if (kind_ != Kind::Tabulated) throw std::logic_error("Perturbation: not tabulated");
    return *table_times_;
}

const std::vector<double>& Perturbation::table_values() const {
    if (kind_ != Kind::Tabulated) throw std::logic_error("Perturbation: not tabulated");
    return *table_values_;
}

double Perturbation::value(const RichardsParams& params, double t) const {
    if (kind_ == Kind::None || t <= t_star_) return 0.0;
    switch (kind_) {
        case Kind::PowerForm: {
            const double a = std::pow(params.eta + params.pow_k(t), -m_);
            const double b = std::pow(params.eta + params.pow_k(t_star_), -m_);
            return std::max(0.0, a - b);
        }
        case Kind::SigmoidForm:
            return y_ * std::exp((alpha_ / beta_) * (1.0 - std::pow(t - t_star_, -beta_)));
        case Kind::Tabulated:
            return std::max(0.0, (*table_)(t));
        default:
            return 0.0;
    }
}

double Perturbation::dvalue_dtstar(const RichardsParams& params, double s, double eps) const {
    if (kind_ == Kind::None || s <= t_star_) return 0.0;
    switch (kind_) {
        case Kind::PowerForm: {
            const double base = params.eta + params.pow_k(t_star_);
            return m_ * std::pow(base, -m_ - 1.0) * params.pow_k(t_star_) * params.log_k();
        }
        case Kind::SigmoidForm:
            return -alpha_ * std::pow(s - t_star_, -beta_ - 1.0) * value(params, s);
        case Kind::Tabulated: {
            // Shifting t* shifts the whole table; difference quotient of the shift.
            const double shifted = (s - eps <= t_star_) ? 0.0 : std::max(0.0, (*table_)(s - eps));
            return (shifted - value(params, s)) / eps;
        }
        default:
            return 0.0;
    }
}

double Perturbation::supremum(const RichardsParams& params) const {
    switch (kind_) {
        case Kind::None:
            return 0.0;
        case Kind::PowerForm:
            return std::pow(params.eta, -m_) - std::pow(params.eta + params.pow_k(t_star_), -m_);
        case Kind::SigmoidForm:
            return y_ * std::exp(alpha_ / beta_);
        case Kind::Tabulated: {
            double vmax = 0.0;
            for (double v : *table_values_) vmax = std::max(vmax, v);
            return vmax;
        }
    }
    return 0.0;
}

double evaluate_richards(const RichardsParams& params, double t) {
    if (t < params.t0) throw std::domain_error("evaluate_richards: t must be >= t0");
    const double num = params.eta + params.pow_k(params.t0);
    const double den = params.eta + params.pow_k(t);
    return params.x0 * std::exp(params.q * (std::log(num) - std::log(den)));
}

double carrying_capacity(const RichardsParams& params) {
    return params.x0 * std::exp(params.q * std::log1p(params.pow_k(params.t0) / params.eta));
}

double growth_rate_h(const RichardsParams& params, double t) {
    const double kt = params.pow_k(t);
    return params.q * kt * std::abs(params.log_k()) / (params.eta + kt);
}

TangentSummary tangent_summary(const RichardsParams& params) {
    const double q = params.q, eta = params.eta, x0 = params.x0;
    const double abs_log_k = std::abs(params.log_k());
    TangentSummary s{};
    s.t_inflection = std::log(eta / q) / params.log_k();
    s.inflection_after_start = s.t_inflection > params.t0;
    s.x_at_inflection =
        carrying_capacity(params) * std::exp(q * std::log(q / (1.0 + q)));
    s.mu = std::pow(eta + params.pow_k(params.t0), q) * x0 * abs_log_k / std::pow(eta, q) *
           std::pow(q / (q + 1.0), q + 1.0);
    s.lambda_lag = s.t_inflection - (1.0 + 1.0 / q) / abs_log_k;
    return s;
}

double first_crossing_time(const RichardsParams& params, double p, double t) {
    if (!(p > 0.0)) throw std::invalid_argument("first_crossing_time: p must be positive");
    const double arg =
        (params.eta + params.pow_k(t)) / std::pow(1.0 + p, 1.0 / params.q) - params.eta;
    if (!(arg > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(arg) / params.log_k();
}

double switch_time(const RichardsParams& params, double p) {
    if (!(p > 0.0)) throw std::invalid_argument("switch_time: p must be positive");
    const double arg = (1.0 + params.q) / std::pow(1.0 + p, 1.0 / params.q) - params.q;
    if (!(arg > 0.0))
        throw std::domain_error("switch_time: boundary unreachable for these parameters");
    return tangent_summary(params).t_inflection + std::log(arg) / params.log_k();
}

double perturbation_kernel(const RichardsParams& params, double u) {
    const double ku = params.pow_k(u);
    return ku * std::abs(params.log_k()) / (params.eta + ku);
}

double perturbation_value(const Perturbation& c, const RichardsParams& params, double t) {
    return c.value(params, t);
}

double perturbation_integral(const Perturbation& c, const RichardsParams& params,
                             double a, double b) {
    if (!(a <= b)) throw std::invalid_argument("perturbation_integral: requires a <= b");
    if (c.kind() == Perturbation::Kind::None) return 0.0;
    const double lo = std::max(a, c.t_star());
    const double hi = std::max(b, c.t_star());
    if (hi <= lo) return 0.0;
    auto integrand = [&](double u) { return c.value(params, u) * perturbation_kernel(params, u); };
    if (c.kind() != Perturbation::Kind::Tabulated)
        return numerics::integrate(integrand, lo, hi, 1e-12);
    // The table interpolant has curvature breaks at its knots; integrating
    // knot to knot keeps each panel smooth.
    std::vector<double> cuts{lo};
    for (double knot : c.table_times())
        if (knot > lo && knot < hi) cuts.push_back(knot);
    cuts.push_back(hi);
    double total = 0.0;
    const double tol = 1e-12 / static_cast<double>(cuts.size());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += numerics::integrate(integrand, cuts[i], cuts[i + 1], tol);
    return total;
}

double evaluate_modified(const RichardsParams& params, const Perturbation& c, double t) {
    const double base = evaluate_richards(params, t);
    if (c.kind() == Perturbation::Kind::None || t <= c.t_star()) return base;
    return base * std::exp(perturbation_integral(c, params, c.t_star(), t));
}

double modified_carrying_capacity(const RichardsParams& params, const Perturbation& c) {
    const double cap = carrying_capacity(params);
    if (c.kind() == Perturbation::Kind::None) return cap;
    const double sup_c = c.supremum(params);
    if (sup_c <= 0.0) return cap;
    // Truncate where k^t |log k| sup C / eta, a bound on the integrand, is below 1e-12.
    const double abs_log_k = std::abs(params.log_k());
    double t_inf = (std::log(1e-12) - std::log(abs_log_k * sup_c / params.eta)) / params.log_k();
    t_inf = std::max(t_inf, c.t_star() + 1.0);
    return cap * std::exp(perturbation_integral(c, params, c.t_star(), t_inf));
}

int sensitivity_sign(const RichardsParams& params, const Perturbation& c, double t, double eps) {
    if (c.kind() == Perturbation::Kind::None || t <= c.t_star()) return 0;
    const double integral = numerics::integrate(
        [&](double s) {
            return c.dvalue_dtstar(params, s, eps) * perturbation_kernel(params, s);
        },
        c.t_star(), t, 1e-12);
    if (integral > 1e-13) return 1;
    if (integral < -1e-13) return -1;
    return 0;
}

}  // namespace growth
}  // namespace richfit
