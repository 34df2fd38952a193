#ifndef RICHFIT_NUMERICS_HPP
#define RICHFIT_NUMERICS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace richfit {
namespace numerics {

/// Thrown when the adaptive quadrature exhausts its subdivision budget.
/// Carries the best estimate obtained so far.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double partial, double error_est)
        : std::runtime_error(what), partial_estimate(partial), error_estimate(error_est) {}
    double partial_estimate;
    double error_estimate;
};

/// Adaptive Gauss-Kronrod (7-15) integration of f over [a, b].
/// Splits the worst subinterval first until the summed error estimate
/// drops below abs_tol; at most max_subdivisions splits.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-12, int max_subdivisions = 60);

/// Brent root bracketing solver. Requires f(lo) * f(hi) <= 0.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol = 1e-12, int max_iterations = 200);

double normal_pdf(double z);
double normal_cdf(double z);

/// Inverse standard normal CDF. Rational approximation refined by one
/// Newton step; absolute error below 1e-9 on (1e-300, 1-1e-16).
double inverse_normal(double u);

/// Natural cubic spline interpolant: zero second derivative at both ends.
/// Evaluation or differentiation outside the knot range throws.
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;
    double derivative(double t) const;
    double second_derivative(double t) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }

private:
    std::size_t interval(double t) const;
    std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

/// Monotone-preserving piecewise cubic (Fritsch-Carlson). Clamps to the
/// boundary values outside the knot range; derivative is zero there.
class MonotoneCubicSpline {
public:
    MonotoneCubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;
    double derivative(double t) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, d_;  // d_: knot derivatives
};

/// Piecewise antiderivative table for F(t) = int_a^t f(u) du.
/// Node values are accumulated once with tight quadrature; eval adds the
/// exact remainder integral from the nearest node below t, so F(t2)-F(t1)
/// is additive to round-off. Immutable after construction.
class CachedAntiderivative {
public:
    CachedAntiderivative(std::function<double(double)> f, double a, double b_max,
                         std::size_t nodes = 257, double tol = 1e-13);

    double operator()(double t) const;
    double start() const { return nodes_.front(); }

private:
    std::function<double(double)> f_;
    std::vector<double> nodes_, cumulative_;
    double tol_;
};

/// In-place Cholesky factorization of a symmetric matrix (row-major n x n).
/// Returns false when the matrix is not positive semidefinite beyond the
/// given tolerance.
bool cholesky(std::vector<double>& a, std::size_t n, double tol = 1e-10);

/// Counter-based random stream (Philox4x32-10). The pair (seed, stream_id)
/// fully determines the sequence, independent of thread scheduling; distinct
/// stream ids give statistically independent streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Standard normal via the inverse CDF (one uniform per draw).
    double normal();
    /// Exponential with the given rate.
    double exponential(double rate);

private:
    void refill();
    std::array<std::uint32_t, 2> key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffer_pos_ = 2;
};

/// Worker count for path-parallel loops: hardware concurrency capped by the
/// RICHFIT_THREADS environment variable (minimum 1).
int worker_count();

/// Static-chunked parallel loop; fn receives [begin, end) ranges. Results
/// must be written to disjoint preallocated slots by the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace numerics
}  // namespace richfit

#endif
