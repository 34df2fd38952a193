#ifndef RICHFIT_SAMPLE_PATHS_HPP
#define RICHFIT_SAMPLE_PATHS_HPP

#include <cstddef>
#include <vector>

namespace richfit {

/// Discretely observed trajectories, one time grid per path. Birth-death
/// simulations store integer states (including absorption at 0) in the same
/// container; strict positivity is enforced where inference requires it.
struct SamplePaths {
    std::vector<std::vector<double>> times;
    std::vector<std::vector<double>> values;

    std::size_t path_count() const { return times.size(); }

    /// True when every path shares one observation grid.
    bool common_grid() const;

    /// Checks the inference-side invariants: matching shapes, strictly
    /// increasing times, positive values, one shared first observation time.
    void validate() const;

    /// Keeps every stride-th observation of each path (first point always kept).
    SamplePaths subsample(std::size_t stride) const;

    /// Per-time sample mean across paths; requires a common grid.
    std::vector<double> sample_mean() const;
};

}  // namespace richfit

#endif
