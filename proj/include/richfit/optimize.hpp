#ifndef RICHFIT_OPTIMIZE_HPP
#define RICHFIT_OPTIMIZE_HPP

#include <cstdint>
#include <functional>
#include <vector>

namespace richfit {
namespace opt {

/// Closed box of per-dimension search intervals.
struct Box {
    Box(std::vector<double> lo_, std::vector<double> hi_);
    std::vector<double> lo, hi;
    std::size_t dim() const { return lo.size(); }
    bool contains(const std::vector<double>& x) const;
};

/// Budget and schedule knobs shared by both maximizers. `stream` selects the
/// random substream of `seed`, so replications can run concurrently and still
/// reproduce bit-identically.
struct OptBudget {
    std::size_t max_evaluations = 20000;
    std::size_t population = 30;       // ALO only
    double initial_temperature = 1.0;  // SA only
    double cooling_rate = 0.995;       // SA only
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

struct OptResult {
    std::vector<double> argmax;
    double value;
};

/// Simulated annealing: uniform random start, Gaussian proposals with scale
/// 0.1 (hi-lo) sqrt(T/T0), reflection at the box faces, geometric cooling,
/// Metropolis acceptance on the spread-normalized objective. Returns the best
/// point ever evaluated. Non-finite objective values are treated as -inf.
OptResult sa_maximize(const Objective& objective, const Box& box, const OptBudget& budget);

/// Ant lion optimizer: ants random-walk around roulette-selected antlions and
/// the elite, with walk bounds shrinking on the staged 10^w i/I schedule;
/// the merged population keeps the best, and the elite never degrades.
OptResult alo_maximize(const Objective& objective, const Box& box, const OptBudget& budget);

enum class Method { SA, ALO };

struct ReplicationResult {
    std::vector<double> mean;                      // per-dimension mean of the argmaxes
    std::vector<std::vector<double>> replicates;   // one argmax per replication
    std::vector<double> values;                    // objective at each argmax
};

/// Runs the chosen maximizer n_replications times (replication r on stream r)
/// and averages the argmaxes coordinate-wise. Replications run in parallel;
/// the result does not depend on the worker count.
ReplicationResult replicate_average(Method method, const Objective& objective, const Box& box,
                                    const OptBudget& budget, std::size_t n_replications);

}  // namespace opt
}  // namespace richfit

#endif
