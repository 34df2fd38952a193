#include "richfit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace richfit {
namespace numerics {

namespace {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK qk15).
constexpr double kGk15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
constexpr double kGk15Weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kG7Weights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct PanelResult {
    double integral;
    double error;
};

PanelResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGk15Nodes[i]);
        fv[14 - i] = f(c + h * kGk15Nodes[i]);
    }
    fv[7] = f(c);
    double kronrod = kGk15Weights[7] * fv[7];
    double gauss = kG7Weights[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        kronrod += kGk15Weights[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) gauss += kG7Weights[i / 2] * (fv[i] + fv[14 - i]);
    }
    kronrod *= h;
    gauss *= h;
    double err = std::abs(kronrod - gauss);
    // QUADPACK-style sharpened estimate.
    if (err > 0.0) err = std::pow(200.0 * err, 1.5);
    err = std::min(err, std::abs(kronrod - gauss) * 200.0);
    err = std::max(err, std::abs(kronrod) * 1e-16);
    return {kronrod, err};
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, int max_subdivisions) {
    if (!(a <= b)) throw std::invalid_argument("integrate: requires a <= b");
    if (a == b) return 0.0;

    struct Interval {
        double a, b, integral, error;
    };
    std::vector<Interval> intervals;
    PanelResult first = gk15(f, a, b);
    intervals.push_back({a, b, first.integral, first.error});

    double total = first.integral;
    double total_err = first.error;
    for (int split = 0; split < max_subdivisions; ++split) {
        if (total_err <= abs_tol) return total;
        std::size_t worst = 0;
        for (std::size_t i = 1; i < intervals.size(); ++i)
            if (intervals[i].error > intervals[worst].error) worst = i;
        Interval iv = intervals[worst];
        const double mid = 0.5 * (iv.a + iv.b);
        if (mid <= iv.a || mid >= iv.b) break;  // interval at float resolution
        PanelResult left = gk15(f, iv.a, mid);
        PanelResult right = gk15(f, mid, iv.b);
        total += left.integral + right.integral - iv.integral;
        total_err += left.error + right.error - iv.error;
        intervals[worst] = {iv.a, mid, left.integral, left.error};
        intervals.push_back({mid, iv.b, right.integral, right.error});
    }
    if (total_err <= abs_tol) return total;
    throw QuadratureError("integrate: subdivision budget exhausted", total, total_err);
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol, int max_iterations) {
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw std::invalid_argument("find_root: no sign change over bracket");

    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int it = 0; it < max_iterations; ++it) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= tol * 1e-3) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // inverse quadratic / secant step
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw std::runtime_error("find_root: no convergence within iteration limit");
}

double normal_pdf(double z) {
    return 0.3989422804014327 * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.7071067811865476);
}

double inverse_normal(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("inverse_normal: u must lie in (0,1)");

    // Acklam's rational approximation.
    static const double A[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double B[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double C[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double D[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (u < p_low) {
        double q = std::sqrt(-2.0 * std::log(u));
        x = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
            ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
    } else if (u <= 1.0 - p_low) {
        double q = u - 0.5, r = q * q;
        x = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q /
            (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-u));
        x = -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
            ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
    }
    // One Newton refinement against the exact CDF.
    double e = normal_cdf(x) - u;
    double pdf = normal_pdf(x);
    if (pdf > 0.0) x -= e / pdf;
    return x;
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3) throw std::invalid_argument("CubicSpline: at least 3 points required");
    if (y_.size() != n) throw std::invalid_argument("CubicSpline: size mismatch");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("CubicSpline: knots must be strictly increasing");

    // Tridiagonal solve for interior second derivatives; natural ends are zero.
    m_.assign(n, 0.0);
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double w = h0 / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
        m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
        if (i == 1) break;
    }
}

std::size_t CubicSpline::interval(double t) const {
    if (t < x_.front() - 1e-12 || t > x_.back() + 1e-12)
        throw std::domain_error("CubicSpline: evaluation outside knot range");
    t = std::clamp(t, x_.front(), x_.back());
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    if (i == 0) i = 1;
    if (i == x_.size()) i = x_.size() - 1;
    return i - 1;
}

double CubicSpline::operator()(double t) const {
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double t) const {
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
}

double CubicSpline::second_derivative(double t) const {
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * m_[i] + b * m_[i + 1];
}

MonotoneCubicSpline::MonotoneCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2) throw std::invalid_argument("MonotoneCubicSpline: at least 2 points required");
    if (y_.size() != n) throw std::invalid_argument("MonotoneCubicSpline: size mismatch");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("MonotoneCubicSpline: knots must be strictly increasing");

    std::vector<double> slope(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) slope[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

    d_.assign(n, 0.0);
    d_[0] = slope.front();
    d_[n - 1] = slope.back();
    for (std::size_t i = 1; i + 1 < n; ++i)
        d_[i] = (slope[i - 1] * slope[i] <= 0.0) ? 0.0 : 0.5 * (slope[i - 1] + slope[i]);

    // Fritsch-Carlson limiter keeps the interpolant monotone on each interval.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (slope[i] == 0.0) {
            d_[i] = 0.0;
            d_[i + 1] = 0.0;
            continue;
        }
        const double alpha = d_[i] / slope[i];
        const double beta = d_[i + 1] / slope[i];
        const double s = alpha * alpha + beta * beta;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            d_[i] = tau * alpha * slope[i];
            d_[i + 1] = tau * beta * slope[i];
        }
    }
}

double MonotoneCubicSpline::operator()(double t) const {
    if (t <= x_.front()) return y_.front();
    if (t >= x_.back()) return y_.back();
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double u = (t - x_[i]) / h;
    const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
    const double h10 = u * (1.0 - u) * (1.0 - u);
    const double h01 = u * u * (3.0 - 2.0 * u);
    const double h11 = u * u * (u - 1.0);
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double MonotoneCubicSpline::derivative(double t) const {
    if (t <= x_.front() || t >= x_.back()) return 0.0;
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double u = (t - x_[i]) / h;
    const double dh00 = 6.0 * u * (u - 1.0) / h;
    const double dh10 = (3.0 * u * u - 4.0 * u + 1.0);
    const double dh01 = -6.0 * u * (u - 1.0) / h;
    const double dh11 = (3.0 * u * u - 2.0 * u);
    return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

CachedAntiderivative::CachedAntiderivative(std::function<double(double)> f, double a,
                                           double b_max, std::size_t nodes, double tol)
    : f_(std::move(f)), tol_(tol) {
    if (!(b_max > a)) throw std::invalid_argument("CachedAntiderivative: empty domain");
    if (nodes < 2) nodes = 2;
    nodes_.resize(nodes);
    cumulative_.resize(nodes);
    const double h = (b_max - a) / static_cast<double>(nodes - 1);
    nodes_[0] = a;
    cumulative_[0] = 0.0;
    for (std::size_t i = 1; i < nodes; ++i) {
        nodes_[i] = a + h * static_cast<double>(i);
        cumulative_[i] = cumulative_[i - 1] + integrate(f_, nodes_[i - 1], nodes_[i], tol_);
    }
}

double CachedAntiderivative::operator()(double t) const {
    if (t <= nodes_.front()) return 0.0;
    if (t >= nodes_.back())
        return cumulative_.back() + integrate(f_, nodes_.back(), t, tol_ * 10.0);
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return cumulative_[i] + integrate(f_, nodes_[i], t, tol_);
}

bool cholesky(std::vector<double>& a, std::size_t n, double tol) {
    if (a.size() != n * n) throw std::invalid_argument("cholesky: bad dimensions");
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
        if (diag < -tol) return false;
        diag = std::sqrt(std::max(diag, 0.0));
        a[j * n + j] = diag;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = (diag > 0.0) ? s / diag : 0.0;
        }
        for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
    }
    return true;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = 0xD2511F53ull * c[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t k = splitmix64(splitmix64(seed) ^ stream_id);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void RngStream::refill() {
    std::array<std::uint32_t, 4> c = {static_cast<std::uint32_t>(counter_),
                                      static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
        philox_round(c, k);
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
    }
    buffer_[0] = (static_cast<std::uint64_t>(c[0]) << 32) | c[1];
    buffer_[1] = (static_cast<std::uint64_t>(c[2]) << 32) | c[3];
    buffer_pos_ = 0;
    ++counter_;
}

std::uint64_t RngStream::next_u64() {
    if (buffer_pos_ >= 2) refill();
    return buffer_[buffer_pos_++];
}

double RngStream::uniform() {
    // 53-bit mantissa, offset by half an ulp so the value stays in (0,1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return inverse_normal(uniform()); }

double RngStream::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log(uniform()) / rate;
}

int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("RICHFIT_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(fn, begin, end);
    }
    for (auto& t : threads) t.join();
}

}  // namespace numerics
}  // namespace richfit
