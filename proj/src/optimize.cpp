#include "richfit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "richfit/numerics.hpp"

namespace richfit {
namespace opt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double reflect_into(double x, double lo, double hi) {
    if (x >= lo && x <= hi) return x;
    const double width = hi - lo;
    double r = std::fmod(x - lo, 2.0 * width);
    if (r < 0.0) r += 2.0 * width;
    return (r <= width) ? lo + r : hi - (r - width);
}

double safe_eval(const Objective& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kNegInf;
}

std::vector<double> uniform_point(numerics::RngStream& rng, const Box& box) {
    std::vector<double> x(box.dim());
    for (std::size_t d = 0; d < x.size(); ++d)
        x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * rng.uniform();
    return x;
}

}  // namespace

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size() || lo.empty())
        throw std::invalid_argument("Box: mismatched or empty bounds");
    for (std::size_t d = 0; d < lo.size(); ++d)
        if (!(std::isfinite(lo[d]) && std::isfinite(hi[d]) && lo[d] < hi[d]))
            throw std::invalid_argument("Box: bounds must be finite with lo < hi");
}

bool Box::contains(const std::vector<double>& x) const {
    if (x.size() != dim()) return false;
    for (std::size_t d = 0; d < dim(); ++d)
        if (x[d] < lo[d] || x[d] > hi[d]) return false;
    return true;
}

namespace {

// Nelder-Mead ascent used as the polishing phase of the annealer; every
// trial point is reflected into the box and charged against the budget
// through `eval`.
void nelder_mead_polish(const std::function<double(const std::vector<double>&)>& eval,
                        const Box& box, std::vector<double> start, double start_f,
                        std::size_t max_evals) {
    const std::size_t dim = box.dim();
    if (max_evals < dim + 2) return;
    struct Vertex {
        std::vector<double> x;
        double f;
    };
    std::vector<Vertex> simplex;
    simplex.push_back({start, start_f});
    std::size_t used = 0;
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<double> x = start;
        const double off = 0.02 * (box.hi[d] - box.lo[d]);
        x[d] = reflect_into(x[d] + off, box.lo[d], box.hi[d]);
        simplex.push_back({x, eval(x)});
        ++used;
    }
    auto worse = [](const Vertex& a, const Vertex& b) { return a.f > b.f; };
    std::sort(simplex.begin(), simplex.end(), worse);

    std::vector<double> centroid(dim), trial(dim);
    while (used + 2 <= max_evals) {
        for (std::size_t d = 0; d < dim; ++d) {
            centroid[d] = 0.0;
            for (std::size_t i = 0; i < dim; ++i) centroid[d] += simplex[i].x[d];
            centroid[d] /= static_cast<double>(dim);
        }
        Vertex& worst = simplex.back();
        auto point_at = [&](double coef) {
            for (std::size_t d = 0; d < dim; ++d)
                trial[d] = reflect_into(centroid[d] + coef * (centroid[d] - worst.x[d]),
                                        box.lo[d], box.hi[d]);
            return trial;
        };
        const std::vector<double> refl = point_at(1.0);
        const double f_refl = eval(refl);
        ++used;
        if (f_refl > simplex.front().f) {
            const std::vector<double> exp_pt = point_at(2.0);
            const double f_exp = eval(exp_pt);
            ++used;
            worst = (f_exp > f_refl) ? Vertex{exp_pt, f_exp} : Vertex{refl, f_refl};
        } else if (f_refl > simplex[dim - 1].f) {
            worst = {refl, f_refl};
        } else {
            const std::vector<double> con = point_at(-0.5);
            const double f_con = eval(con);
            ++used;
            if (f_con > worst.f) {
                worst = {con, f_con};
            } else {
                for (std::size_t i = 1; i <= dim && used < max_evals; ++i) {
                    for (std::size_t d = 0; d < dim; ++d)
                        simplex[i].x[d] =
                            0.5 * (simplex[i].x[d] + simplex.front().x[d]);
                    simplex[i].f = eval(simplex[i].x);
                    ++used;
                }
            }
        }
        std::sort(simplex.begin(), simplex.end(), worse);
        double diameter = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
            diameter = std::max(diameter,
                                std::abs(simplex.front().x[d] - simplex.back().x[d]));
        if (diameter < 1e-13) break;
    }
}

}  // namespace

OptResult sa_maximize(const Objective& objective, const Box& box, const OptBudget& budget) {
    if (budget.max_evaluations < 2)
        throw std::invalid_argument("sa_maximize: budget too small");
    if (!(budget.cooling_rate > 0.0 && budget.cooling_rate < 1.0))
        throw std::invalid_argument("sa_maximize: cooling_rate must lie in (0,1)");
    numerics::RngStream rng(budget.seed, budget.stream);

    std::size_t evaluations = 0;
    std::vector<double> best_x;
    double best_f = kNegInf;
    auto eval = [&](const std::vector<double>& x) {
        const double v = safe_eval(objective, x);
        ++evaluations;
        if (v > best_f) {
            best_f = v;
            best_x = x;
        }
        return v;
    };

    // Uniform random start; retry a few times when the objective is not
    // finite there.
    std::vector<double> current = uniform_point(rng, box);
    double current_f = eval(current);
    for (int tries = 0; tries < 40 && !std::isfinite(current_f) &&
                        evaluations < budget.max_evaluations;
         ++tries) {
        current = uniform_point(rng, box);
        current_f = eval(current);
    }

    // The Metropolis criterion is normalized by a running estimate of the
    // local objective spread (mean |delta| of recent proposals). A fixed
    // global spread would be dominated by the objective's deep tails and
    // leave the acceptance test undiscriminating.
    const double t0 = budget.initial_temperature;
    const std::size_t polish_budget =
        std::min<std::size_t>(4000, budget.max_evaluations / 5);
    const std::size_t anneal_end =
        budget.max_evaluations > polish_budget ? budget.max_evaluations - polish_budget : 0;

    double temperature = t0;
    double scale = 0.0;
    std::size_t scale_n = 0;
    std::vector<double> proposal(box.dim());
    while (evaluations < anneal_end) {
        const double step_scale = std::sqrt(temperature / t0);
        for (std::size_t d = 0; d < box.dim(); ++d) {
            const double step = 0.1 * (box.hi[d] - box.lo[d]) * step_scale * rng.normal();
            proposal[d] = reflect_into(current[d] + step, box.lo[d], box.hi[d]);
        }
        const double f_new = eval(proposal);
        bool accept = false;
        if (std::isfinite(f_new)) {
            if (!std::isfinite(current_f) || f_new >= current_f) {
                accept = true;
            } else {
                const double delta = f_new - current_f;
                if (scale_n < 10) {
                    accept = true;  // warmup while the spread estimate settles
                } else {
                    accept = rng.uniform() < std::exp(delta / (scale * temperature));
                }
            }
            if (std::isfinite(current_f)) {
                const double mag = std::abs(f_new - current_f);
                scale = (scale * static_cast<double>(scale_n) + mag) /
                        static_cast<double>(scale_n + 1);
                if (scale_n < 400) ++scale_n;
                scale = std::max(scale, 1e-12);
            }
        }
        if (accept) {
            current = proposal;
            current_f = f_new;
        }
        temperature *= budget.cooling_rate;
        // Frozen: reheat and continue the walk from the best point seen.
        if (temperature < 1e-9 * t0) {
            temperature = t0;
            if (std::isfinite(best_f)) {
                current = best_x;
                current_f = best_f;
            }
        }
    }
    if (std::isfinite(best_f) && evaluations < budget.max_evaluations)
        nelder_mead_polish(eval, box, best_x, best_f,
                           budget.max_evaluations - evaluations);
    if (!std::isfinite(best_f))
        throw std::runtime_error("sa_maximize: objective never evaluated to a finite value");
    return {best_x, best_f};
}

OptResult alo_maximize(const Objective& objective, const Box& box, const OptBudget& budget) {
    const std::size_t pop = budget.population;
    if (pop < 2) throw std::invalid_argument("alo_maximize: population must be >= 2");
    if (budget.max_evaluations < pop)
        throw std::invalid_argument("alo_maximize: budget smaller than one population sweep");
    numerics::RngStream rng(budget.seed, budget.stream);
    const std::size_t dim = box.dim();
    const std::size_t iterations =
        std::max<std::size_t>(1, budget.max_evaluations / pop - 1);

    struct Individual {
        std::vector<double> x;
        double f;
    };
    std::vector<Individual> antlions(pop);
    for (auto& lion : antlions) {
        lion.x = uniform_point(rng, box);
        lion.f = safe_eval(objective, lion.x);
    }
    auto by_fitness = [](const Individual& a, const Individual& b) { return a.f > b.f; };
    std::sort(antlions.begin(), antlions.end(), by_fitness);
    Individual elite = antlions.front();

    // Cumulative +-1 walk over all iterations, min-max normalized into the
    // shrunken bounds around the chosen antlion; position read at step `iter`.
    auto walk_position = [&](const Individual& lion, std::size_t iter, double shrink,
                             std::vector<double>& out) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double radius = (box.hi[d] - box.lo[d]) / shrink;
            double lo_d = (rng.uniform() < 0.5) ? lion.x[d] - radius : lion.x[d] + radius;
            double hi_d = (rng.uniform() < 0.5) ? lion.x[d] + radius : lion.x[d] - radius;
            if (lo_d > hi_d) std::swap(lo_d, hi_d);
            double pos = 0.0, wmin = 0.0, wmax = 0.0, at_iter = 0.0;
            for (std::size_t s = 1; s <= iterations; ++s) {
                pos += (rng.uniform() < 0.5) ? -1.0 : 1.0;
                wmin = std::min(wmin, pos);
                wmax = std::max(wmax, pos);
                if (s == iter) at_iter = pos;
            }
            const double span = wmax - wmin;
            out[d] = (span > 0.0) ? lo_d + (at_iter - wmin) * (hi_d - lo_d) / span
                                  : 0.5 * (lo_d + hi_d);
        }
    };

    std::vector<Individual> ants(pop);
    for (auto& a : ants) a.x.resize(dim);
    std::vector<double> walk_a(dim), walk_b(dim);
    std::size_t evaluations = pop;
    for (std::size_t iter = 1; iter <= iterations && evaluations + pop <= budget.max_evaluations;
         ++iter) {
        const double progress = static_cast<double>(iter) / static_cast<double>(iterations);
        double w = 0.0;
        if (progress > 0.10) w = 2.0;
        if (progress > 0.50) w = 3.0;
        if (progress > 0.75) w = 4.0;
        if (progress > 0.90) w = 5.0;
        if (progress > 0.95) w = 6.0;
        const double shrink = (w == 0.0) ? 1.0 : std::pow(10.0, w) * progress;

        for (std::size_t i = 0; i < pop; ++i) {
            // Roulette on fitness ranks: rank r gets weight pop - r.
            const double target = rng.uniform() * (static_cast<double>(pop) *
                                                   (static_cast<double>(pop) + 1.0) / 2.0);
            double acc = 0.0;
            std::size_t chosen = pop - 1;
            for (std::size_t r = 0; r < pop; ++r) {
                acc += static_cast<double>(pop - r);
                if (target <= acc) {
                    chosen = r;
                    break;
                }
            }
            walk_position(antlions[chosen], iter, shrink, walk_a);
            walk_position(elite, iter, shrink, walk_b);
            for (std::size_t d = 0; d < dim; ++d)
                ants[i].x[d] =
                    reflect_into(0.5 * (walk_a[d] + walk_b[d]), box.lo[d], box.hi[d]);
            ants[i].f = safe_eval(objective, ants[i].x);
        }
        evaluations += pop;

        // Merge, keep the best `pop` as the new antlions, refresh the elite.
        std::vector<Individual> merged;
        merged.reserve(2 * pop);
        merged.insert(merged.end(), antlions.begin(), antlions.end());
        merged.insert(merged.end(), ants.begin(), ants.end());
        std::sort(merged.begin(), merged.end(), by_fitness);
        merged.resize(pop);
        antlions = std::move(merged);
        if (antlions.front().f > elite.f) elite = antlions.front();
        antlions.back() = elite;  // elitism: the elite survives in the population
    }
    if (!std::isfinite(elite.f))
        throw std::runtime_error("alo_maximize: objective never evaluated to a finite value");
    return {elite.x, elite.f};
}

ReplicationResult replicate_average(Method method, const Objective& objective, const Box& box,
                                    const OptBudget& budget, std::size_t n_replications) {
    if (n_replications < 1)
        throw std::invalid_argument("replicate_average: n_replications must be >= 1");
    ReplicationResult out;
    out.replicates.assign(n_replications, {});
    out.values.assign(n_replications, 0.0);
    std::vector<std::string> errors(n_replications);
    numerics::parallel_for(n_replications, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            try {
                OptBudget b = budget;
                b.stream = r;
                const OptResult res = (method == Method::SA) ? sa_maximize(objective, box, b)
                                                             : alo_maximize(objective, box, b);
                out.replicates[r] = res.argmax;
                out.values[r] = res.value;
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("replicate_average: " + e);

    out.mean.assign(box.dim(), 0.0);
    for (const auto& rep : out.replicates)
        for (std::size_t d = 0; d < box.dim(); ++d) out.mean[d] += rep[d];
    for (double& m : out.mean) m /= static_cast<double>(n_replications);
    return out;
}

}  // namespace opt
}  // namespace richfit
