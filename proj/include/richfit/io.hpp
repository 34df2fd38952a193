#ifndef RICHFIT_IO_HPP
#define RICHFIT_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "richfit/inference.hpp"
#include "richfit/sample_paths.hpp"

namespace richfit {
namespace io {

/// Flat key/value run configuration with dotted namespaces, loaded from a
/// small `key = value` file and overridable from the command line. Values
/// are validated when read, not when stored.
class RunConfig {
public:
    RunConfig() = default;
    static RunConfig from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

enum class CsvLayout { Wide, Long };

/// Reads observations from CSV. Wide: header then time in the first column,
/// one path per remaining column. Long: header then (path_id, time, value)
/// rows. Validation failures name the offending row and column.
SamplePaths ingest_csv(const std::string& path, CsvLayout layout);

/// Writes the paths in the wide layout (requires a common grid) or the long
/// layout otherwise. Numbers carry 17 significant digits so reruns are
/// byte-identical.
void write_paths_csv(const std::string& path, const SamplePaths& paths);

std::string format_number(double v);

/// simulate | fit | fpt | curve entry points; each writes its files under
/// cfg "out.dir" and returns the canonical report path.
std::string command_simulate(const RunConfig& cfg);
std::string command_fit(const RunConfig& cfg);
std::string command_fpt(const RunConfig& cfg);
std::string command_curve(const RunConfig& cfg);

/// Builds the model/perturbation pair described by the config's model.* and
/// perturbation.* keys.
diffusion::DiffusionParams params_from_config(const RunConfig& cfg);

constexpr int kSchemaVersion = 1;

}  // namespace io
}  // namespace richfit

#endif
