#include "richfit/sample_paths.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace richfit {

bool SamplePaths::common_grid() const {
    if (times.empty()) return false;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] != times[0]) return false;
    return true;
}

void SamplePaths::validate() const {
    if (times.size() != values.size())
        throw std::invalid_argument("SamplePaths: times/values path count mismatch");
    if (times.empty()) throw std::invalid_argument("SamplePaths: no paths");
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto& t = times[i];
        const auto& v = values[i];
        if (t.size() != v.size() || t.empty())
            throw std::invalid_argument("SamplePaths: path " + std::to_string(i) +
                                        " has mismatched or empty observations");
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (!std::isfinite(t[j]) || !std::isfinite(v[j]))
                throw std::invalid_argument("SamplePaths: non-finite entry in path " +
                                            std::to_string(i));
            if (j > 0 && !(t[j] > t[j - 1]))
                throw std::invalid_argument("SamplePaths: times not strictly increasing in path " +
                                            std::to_string(i));
            if (!(v[j] > 0.0))
                throw std::invalid_argument("SamplePaths: nonpositive value in path " +
                                            std::to_string(i));
        }
        if (t.front() != times[0].front())
            throw std::invalid_argument("SamplePaths: first observation time differs in path " +
                                        std::to_string(i));
    }
}

SamplePaths SamplePaths::subsample(std::size_t stride) const {
    if (stride == 0) throw std::invalid_argument("SamplePaths: stride must be >= 1");
    if (stride == 1) return *this;
    SamplePaths out;
    out.times.resize(times.size());
    out.values.resize(values.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t j = 0; j < times[i].size(); j += stride) {
            out.times[i].push_back(times[i][j]);
            out.values[i].push_back(values[i][j]);
        }
    }
    return out;
}

std::vector<double> SamplePaths::sample_mean() const {
    if (!common_grid())
        throw std::invalid_argument("SamplePaths: sample mean needs a common observation grid");
    std::vector<double> mean(times[0].size(), 0.0);
    for (const auto& path : values)
        for (std::size_t j = 0; j < path.size(); ++j) mean[j] += path[j];
    for (double& m : mean) m /= static_cast<double>(values.size());
    return mean;
}

}  // namespace richfit
