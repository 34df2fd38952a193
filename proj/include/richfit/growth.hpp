#ifndef RICHFIT_GROWTH_HPP
#define RICHFIT_GROWTH_HPP

#include <memory>
#include <optional>
#include <vector>

#include "richfit/numerics.hpp"

namespace richfit {
namespace growth {

/// Parameters of the Richards curve x(t) = x0 ((eta + k^t0)/(eta + k^t))^q
/// anchored at (t0, x0). Construction rejects out-of-range values.
struct RichardsParams {
    RichardsParams(double q, double k, double eta, double t0, double x0);

    double q;    // shape exponent, > 0
    double k;    // decay base, in (0, 1)
    double eta;  // offset, > 0
    double t0;
    double x0;   // initial size, > 0

    double log_k() const { return log_k_; }
    /// k^t evaluated as exp(t log k) for uniform precision at large t.
    double pow_k(double t) const;

private:
    double log_k_;
};

/// Growth-rate perturbation C(t): zero up to the switching time t*, then one
/// of a small family of closed forms, or a tabulated curve interpolated by a
/// monotone cubic and clamped beyond its last knot.
class Perturbation {
public:
    enum class Kind { None, PowerForm, SigmoidForm, Tabulated };

    static Perturbation none();
    /// C(t) = (eta + k^t)^{-m} - (eta + k^{t*})^{-m}; concave increasing, C(t*) = 0.
    static Perturbation power_form(double m, double t_star);
    /// C(t) = y exp((alpha/beta)(1 - (t - t*)^{-beta})); sigmoidal toward y e^{alpha/beta}.
    static Perturbation sigmoid_form(double y, double alpha, double beta, double t_star);
    /// Tabulated values >= 0 on strictly increasing knots; the first knot must
    /// sit at t* with value 0.
    static Perturbation tabulated(std::vector<double> times, std::vector<double> values);

    Kind kind() const { return kind_; }
    double t_star() const { return t_star_; }

    /// C(t); zero for t <= t*. PowerForm needs (k, eta) from params, the
    /// other families ignore them.
    double value(const RichardsParams& params, double t) const;

    /// dC_{t*}/dt* at time s: analytic for PowerForm/SigmoidForm, finite
    /// difference of the shifted table for Tabulated.
    double dvalue_dtstar(const RichardsParams& params, double s, double eps) const;

    /// Least upper bound for C over [t*, infinity).
    double supremum(const RichardsParams& params) const;

    double power_m() const { return m_; }
    double sigmoid_y() const { return y_; }
    double sigmoid_alpha() const { return alpha_; }
    double sigmoid_beta() const { return beta_; }
    const std::vector<double>& table_times() const;
    const std::vector<double>& table_values() const;

private:
    Perturbation() = default;
    Kind kind_ = Kind::None;
    double t_star_ = 0.0;
    double m_ = 0.0;
    double y_ = 0.0, alpha_ = 0.0, beta_ = 0.0;
    std::shared_ptr<const numerics::MonotoneCubicSpline> table_;
    std::shared_ptr<const std::vector<double>> table_times_, table_values_;
};

/// Tangent-line summary at the inflection point: position, value, maximum
/// specific growth rate mu and lag time lambda. inflection_after_start is
/// false when eta >= q k^{t0} so that t_I <= t0.
struct TangentSummary {
    double t_inflection;
    double x_at_inflection;
    double mu;
    double lambda_lag;
    bool inflection_after_start;
};

double evaluate_richards(const RichardsParams& params, double t);
double carrying_capacity(const RichardsParams& params);
double growth_rate_h(const RichardsParams& params, double t);
TangentSummary tangent_summary(const RichardsParams& params);

/// First instant s with x(s) = (1 + p) x(t); +infinity when the boundary is
/// at or above the carrying capacity.
double first_crossing_time(const RichardsParams& params, double p, double t);

/// First crossing of the inflection boundary (1 + p) x(t_I). Throws a domain
/// error when the boundary is unreachable.
double switch_time(const RichardsParams& params, double p);

double perturbation_value(const Perturbation& c, const RichardsParams& params, double t);

/// int_{max(a,t*)}^{max(b,t*)} C(u) k^u |log k| / (eta + k^u) du.
double perturbation_integral(const Perturbation& c, const RichardsParams& params,
                             double a, double b);

/// Modified curve x~(t) = x(t) exp(int_{t*}^{max(t,t*)} C(u) kernel(u) du).
double evaluate_modified(const RichardsParams& params, const Perturbation& c, double t);

/// K~ = K exp(int_{t*}^{inf} C kernel); the tail is truncated where the
/// kernel mass falls below 1e-12.
double modified_carrying_capacity(const RichardsParams& params, const Perturbation& c);

/// Sign of the first-order effect on x~(t) of shifting the switching time:
/// sgn(int_{t*}^{t} dC/dt* kernel). Zero for t <= t*.
int sensitivity_sign(const RichardsParams& params, const Perturbation& c, double t,
                     double eps = 1e-3);

/// k^u |log k| / (eta + k^u), the weight the perturbation enters with.
double perturbation_kernel(const RichardsParams& params, double u);

}  // namespace growth
}  // namespace richfit

#endif
