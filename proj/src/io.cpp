#include "richfit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace richfit {
namespace io {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

double parse_cell(const std::string& text, std::size_t row, std::size_t col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != trim(text).size() && !trim(text).empty() && used != text.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("ingest_csv: non-numeric cell at row " + std::to_string(row) +
                                    ", column " + std::to_string(col));
    }
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

json summary_to_json(const fpt::FptSummary& s) {
    return json{{"mean", s.mean},       {"mode", s.mode}, {"std_dev", s.std_dev},
                {"d1", s.d1},           {"d5", s.d5},     {"d9", s.d9},
                {"mass_captured", s.mass_captured}};
}

json bounds_to_json(const inference::BoundsBox& b) {
    return json{{"q", {b.q[0], b.q[1]}},
                {"k", {b.k[0], b.k[1]}},
                {"eta", {b.eta[0], b.eta[1]}},
                {"sigma", {b.sigma[0], b.sigma[1]}},
                {"provenance",
                 {{"t1", b.provenance.t1},
                  {"t2", b.provenance.t2},
                  {"k_star", b.provenance.k_star},
                  {"t_inflection_obs", b.provenance.t_inflection_obs},
                  {"s_at_inflection", b.provenance.s_at_inflection}}}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_density_csv(const std::string& path, const fpt::FptDensity& d) {
    std::string text = "time,density\n";
    for (std::size_t j = 0; j < d.grid.size(); ++j)
        text += format_number(d.grid[j]) + "," + format_number(d.density[j]) + "\n";
    write_text(path, text);
}

growth::Perturbation perturbation_from_config(const RunConfig& cfg,
                                              const growth::RichardsParams& params) {
    const std::string kind = cfg.get_string("perturbation.kind", "none");
    if (kind == "none") return growth::Perturbation::none();
    double t_star;
    if (cfg.has("perturbation.t_star"))
        t_star = cfg.get_double("perturbation.t_star");
    else
        t_star = growth::switch_time(params, cfg.get_double("perturbation.p"));
    if (kind == "power")
        return growth::Perturbation::power_form(cfg.get_double("perturbation.m", 1.0), t_star);
    if (kind == "sigmoid")
        return growth::Perturbation::sigmoid_form(cfg.get_double("perturbation.y"),
                                                  cfg.get_double("perturbation.alpha"),
                                                  cfg.get_double("perturbation.beta"), t_star);
    throw std::invalid_argument("perturbation.kind must be none, power or sigmoid");
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not found: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }
bool RunConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("missing config key: " + key);
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not a number: " + v);
    }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long RunConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        return std::stoll(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not an integer: " + v);
    }
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split(get_string(key), ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        try {
            out.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw std::invalid_argument("config key " + key + " has a non-numeric entry: " + t);
        }
    }
    if (out.empty()) throw std::invalid_argument("config key " + key + " lists no values");
    return out;
}

SamplePaths ingest_csv(const std::string& path, CsvLayout layout) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("ingest_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("ingest_csv: empty file " + path);

    SamplePaths out;
    std::size_t row = 1;
    if (layout == CsvLayout::Wide) {
        const std::size_t n_cols = split(line, ',').size();
        if (n_cols < 2)
            throw std::invalid_argument("ingest_csv: wide layout needs time plus path columns");
        out.times.resize(n_cols - 1);
        out.values.resize(n_cols - 1);
        while (std::getline(in, line)) {
            ++row;
            if (trim(line).empty()) continue;
            const auto cells = split(line, ',');
            if (cells.size() != n_cols)
                throw std::invalid_argument("ingest_csv: row " + std::to_string(row) +
                                            " has " + std::to_string(cells.size()) +
                                            " cells, expected " + std::to_string(n_cols));
            const double t = parse_cell(cells[0], row, 1);
            for (std::size_t c = 1; c < n_cols; ++c) {
                const double v = parse_cell(cells[c], row, c + 1);
                if (!(v > 0.0))
                    throw std::invalid_argument("ingest_csv: nonpositive value at row " +
                                                std::to_string(row) + ", column " +
                                                std::to_string(c + 1));
                out.times[c - 1].push_back(t);
                out.values[c - 1].push_back(v);
            }
        }
    } else {
        std::map<long long, std::size_t> index;
        while (std::getline(in, line)) {
            ++row;
            if (trim(line).empty()) continue;
            const auto cells = split(line, ',');
            if (cells.size() != 3)
                throw std::invalid_argument("ingest_csv: row " + std::to_string(row) +
                                            " needs (path_id, time, value)");
            const long long id = static_cast<long long>(parse_cell(cells[0], row, 1));
            const double t = parse_cell(cells[1], row, 2);
            const double v = parse_cell(cells[2], row, 3);
            if (!(v > 0.0))
                throw std::invalid_argument("ingest_csv: nonpositive value at row " +
                                            std::to_string(row) + ", column 3");
            if (!index.count(id)) {
                index[id] = out.times.size();
                out.times.emplace_back();
                out.values.emplace_back();
            }
            out.times[index[id]].push_back(t);
            out.values[index[id]].push_back(v);
        }
    }
    try {
        out.validate();
    } catch (const std::exception& e) {
        throw std::invalid_argument("ingest_csv: " + std::string(e.what()));
    }
    return out;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_paths_csv(const std::string& path, const SamplePaths& paths) {
    std::string text;
    if (paths.common_grid()) {
        text = "time";
        for (std::size_t i = 0; i < paths.path_count(); ++i)
            text += ",path" + std::to_string(i + 1);
        text += "\n";
        for (std::size_t j = 0; j < paths.times[0].size(); ++j) {
            text += format_number(paths.times[0][j]);
            for (std::size_t i = 0; i < paths.path_count(); ++i)
                text += "," + format_number(paths.values[i][j]);
            text += "\n";
        }
    } else {
        text = "path_id,time,value\n";
        for (std::size_t i = 0; i < paths.path_count(); ++i)
            for (std::size_t j = 0; j < paths.times[i].size(); ++j)
                text += std::to_string(i + 1) + "," + format_number(paths.times[i][j]) + "," +
                        format_number(paths.values[i][j]) + "\n";
    }
    write_text(path, text);
}

diffusion::DiffusionParams params_from_config(const RunConfig& cfg) {
    growth::RichardsParams richards(cfg.get_double("model.q"), cfg.get_double("model.k"),
                                    cfg.get_double("model.eta"), cfg.get_double("model.t0", 0.0),
                                    cfg.get_double("model.x0"));
    const growth::Perturbation c = perturbation_from_config(cfg, richards);
    return diffusion::DiffusionParams(richards, cfg.get_double("model.sigma", 1e-2), c);
}

std::string command_simulate(const RunConfig& cfg) {
    const diffusion::DiffusionParams params = params_from_config(cfg);
    const double start = cfg.get_double("grid.start", params.richards.t0);
    const double end = cfg.get_double("grid.end");
    const long long points = cfg.get_int("grid.points");
    if (points < 2 || !(end > start))
        throw std::invalid_argument("simulate: grid needs end > start and >= 2 points");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (long long j = 0; j < points; ++j)
        grid[static_cast<std::size_t>(j)] =
            start + (end - start) * static_cast<double>(j) / static_cast<double>(points - 1);

    const long long n_paths = cfg.get_int("sim.paths", 25);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("sim.seed", 1));
    const SamplePaths paths = diffusion::simulate_paths(
        params, diffusion::InitialLaw::degenerate(params.richards.x0), grid,
        static_cast<std::size_t>(n_paths), seed);

    const std::string dir = cfg.get_string("out.dir", ".");
    ensure_out_dir(dir);
    const std::string csv_path = dir + "/paths.csv";
    write_paths_csv(csv_path, paths);

    json meta{{"schema_version", kSchemaVersion},
              {"command", "simulate"},
              {"model",
               {{"q", params.richards.q},
                {"k", params.richards.k},
                {"eta", params.richards.eta},
                {"t0", params.richards.t0},
                {"x0", params.richards.x0},
                {"sigma", params.sigma}}},
              {"perturbation",
               {{"kind", cfg.get_string("perturbation.kind", "none")},
                {"t_star", params.perturbation.kind() == growth::Perturbation::Kind::None
                               ? 0.0
                               : params.perturbation.t_star()}}},
              {"grid", {{"start", start}, {"end", end}, {"points", points}}},
              {"paths", n_paths},
              {"seed", seed}};
    write_text(dir + "/metadata.json", meta.dump(2) + "\n");
    return csv_path;
}

std::string command_fit(const RunConfig& cfg) {
    const std::string data_path = cfg.get_string("data.path");
    const CsvLayout layout =
        cfg.get_string("data.layout", "wide") == "long" ? CsvLayout::Long : CsvLayout::Wide;
    const SamplePaths data = ingest_csv(data_path, layout);

    inference::ProcedureOptions options;
    options.method = cfg.get_string("fit.method", "sa") == "alo" ? opt::Method::ALO
                                                                 : opt::Method::SA;
    options.budget.max_evaluations = static_cast<std::size_t>(cfg.get_int("fit.budget", 20000));
    options.budget.population = static_cast<std::size_t>(cfg.get_int("fit.population", 30));
    options.budget.seed = static_cast<std::uint64_t>(cfg.get_int("fit.seed", 1));
    options.replications = static_cast<std::size_t>(cfg.get_int("fit.replications", 30));
    options.stride = static_cast<std::size_t>(cfg.get_int("fit.stride", 1));
    if (cfg.has("fit.window_end")) options.window_end = cfg.get_double("fit.window_end");
    options.fpt_paths = static_cast<std::size_t>(cfg.get_int("fit.fpt_paths", 100000));
    options.fpt_dt = cfg.get_double("fit.fpt_dt", 0.0025);
    options.fpt_seed = static_cast<std::uint64_t>(cfg.get_int("fit.fpt_seed", 1));
    options.fpt_boundary =
        cfg.get_string("fit.fpt_boundary", "observed") == "estimated"
            ? inference::ProcedureOptions::FptBoundary::EstimatedCurve
            : inference::ProcedureOptions::FptBoundary::ObservedInflection;

    const std::vector<double> p_candidates = cfg.get_double_list("fit.p");
    const inference::FitReport report = inference::run_procedure1(data, p_candidates, options);

    const std::string dir = cfg.get_string("out.dir", ".");
    ensure_out_dir(dir);

    json j{{"schema_version", kSchemaVersion},
           {"command", "fit"},
           {"p_used", report.p_used},
           {"mle",
            {{"q", report.mle.richards.q},
             {"k", report.mle.richards.k},
             {"eta", report.mle.richards.eta},
             {"sigma", report.mle.sigma},
             {"t0", report.mle.richards.t0},
             {"x0", report.mle.richards.x0}}},
           {"initial_law", {{"mu1", report.mu1_hat}, {"sigma1_sq", report.sigma1_sq_hat}}},
           {"bounds", bounds_to_json(report.bounds)},
           {"t_star", {{"deterministic", report.t_star_det},
                       {"fpt", summary_to_json(report.t_star_fpt)}}},
           {"rae_mean", report.rae_mean},
           {"window", {{"end", report.window_end}, {"crossed", report.window_crossed}}}};
    json cands = json::array();
    for (const auto& c : report.candidates) cands.push_back({{"p", c.p}, {"rae_mean", c.rae_mean}});
    j["candidates"] = cands;
    json trace = json::array();
    for (const auto& rep : report.replication_trace) trace.push_back(rep);
    j["replication_trace"] = trace;
    const std::string report_path = dir + "/fit_report.json";
    write_text(report_path, j.dump(2) + "\n");

    std::string c_csv = "time,c_hat\n";
    const auto& ct = report.c_hat.table_times();
    const auto& cv = report.c_hat.table_values();
    for (std::size_t i = 0; i < ct.size(); ++i)
        c_csv += format_number(ct[i]) + "," + format_number(cv[i]) + "\n";
    write_text(dir + "/c_hat.csv", c_csv);

    std::string mean_csv = "time,sample_mean,estimated_mean\n";
    for (std::size_t i = 0; i < report.grid.size(); ++i)
        mean_csv += format_number(report.grid[i]) + "," + format_number(report.sample_mean[i]) +
                    "," + format_number(report.estimated_mean[i]) + "\n";
    write_text(dir + "/mean_fit.csv", mean_csv);

    std::ostringstream txt;
    txt << "fit summary\n"
        << "  p used            " << report.p_used << "\n"
        << "  q                 " << report.mle.richards.q << "\n"
        << "  k                 " << report.mle.richards.k << "\n"
        << "  eta               " << report.mle.richards.eta << "\n"
        << "  sigma             " << report.mle.sigma << "\n"
        << "  t* (closed form)  " << report.t_star_det << "\n"
        << "  t* (fpt mean)     " << report.t_star_fpt.mean << "\n"
        << "  mean-fit RAE      " << report.rae_mean << "\n"
        << "  window end        " << report.window_end
        << (report.window_crossed ? "" : "  (boundary never crossed; fit on all data)") << "\n";
    write_text(dir + "/summary.txt", txt.str());
    return report_path;
}

std::string command_fpt(const RunConfig& cfg) {
    diffusion::DiffusionParams params = [&]() {
        if (cfg.has("fpt.report")) {
            std::ifstream in(cfg.get_string("fpt.report"));
            if (!in) throw std::invalid_argument("fpt: cannot open report file");
            json j;
            in >> j;
            const auto& m = j.at("mle");
            growth::RichardsParams richards(m.at("q").get<double>(), m.at("k").get<double>(),
                                            m.at("eta").get<double>(), m.at("t0").get<double>(),
                                            m.at("x0").get<double>());
            return diffusion::DiffusionParams(richards, m.at("sigma").get<double>());
        }
        return params_from_config(cfg);
    }();

    if (cfg.get_int("fpt.deterministic", 0) != 0) {
        const double p = cfg.get_double("fpt.p");
        const double t_star = growth::switch_time(params.richards, p);
        std::printf("%s\n", format_number(t_star).c_str());
        return "";
    }

    double boundary;
    if (cfg.has("fpt.boundary"))
        boundary = cfg.get_double("fpt.boundary");
    else
        boundary = (1.0 + cfg.get_double("fpt.p")) *
                   growth::tangent_summary(params.richards).x_at_inflection;
    const double horizon = cfg.get_double("fpt.horizon");
    const std::size_t n_paths = static_cast<std::size_t>(cfg.get_int("fpt.paths", 100000));
    const double dt = cfg.get_double("fpt.dt", 0.0025);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("fpt.seed", 1));
    const std::size_t n_nodes = static_cast<std::size_t>(cfg.get_int("fpt.nodes", 2000));

    const fpt::FptDensity mc = fpt::fpt_monte_carlo(
        params, diffusion::InitialLaw::degenerate(params.richards.x0), boundary, horizon, n_paths,
        dt, seed);
    const fpt::FptDensity ie =
        fpt::fpt_integral_equation(params, params.richards.x0, boundary, horizon, n_nodes);
    const fpt::FptSummary mc_summary = fpt::fpt_summary(mc);
    const fpt::FptSummary ie_summary = fpt::fpt_summary(ie);

    // Agreement: sup-norm of the difference on the MC grid, relative to the peak.
    double peak = 0.0, sup = 0.0;
    for (std::size_t j = 0; j < mc.grid.size(); ++j) {
        peak = std::max(peak, mc.density[j]);
        const double t = mc.grid[j];
        double v = 0.0;
        if (t >= ie.grid.front() && t <= ie.grid.back()) {
            auto it = std::upper_bound(ie.grid.begin(), ie.grid.end(), t);
            std::size_t hi = std::min<std::size_t>(ie.grid.size() - 1,
                                                   static_cast<std::size_t>(it - ie.grid.begin()));
            if (hi == 0) hi = 1;
            const std::size_t lo = hi - 1;
            const double w = (t - ie.grid[lo]) / (ie.grid[hi] - ie.grid[lo]);
            v = (1.0 - w) * ie.density[lo] + w * ie.density[hi];
        }
        sup = std::max(sup, std::abs(v - mc.density[j]));
    }

    const std::string dir = cfg.get_string("out.dir", ".");
    ensure_out_dir(dir);
    write_density_csv(dir + "/fpt_density_mc.csv", mc);
    write_density_csv(dir + "/fpt_density_volterra.csv", ie);
    json j{{"schema_version", kSchemaVersion},
           {"command", "fpt"},
           {"boundary", boundary},
           {"monte_carlo", summary_to_json(mc_summary)},
           {"volterra", summary_to_json(ie_summary)},
           {"agreement", {{"sup_norm", sup}, {"peak", peak}, {"relative", sup / peak}}}};
    const std::string report_path = dir + "/fpt_summary.json";
    write_text(report_path, j.dump(2) + "\n");
    return report_path;
}

std::string command_curve(const RunConfig& cfg) {
    const diffusion::DiffusionParams params = params_from_config(cfg);
    const auto& richards = params.richards;
    const growth::Perturbation& c = params.perturbation;
    const double start = cfg.get_double("grid.start", richards.t0);
    const double end = cfg.get_double("grid.end");
    const long long points = cfg.get_int("grid.points", 201);
    if (points < 2 || !(end > start))
        throw std::invalid_argument("curve: grid needs end > start and >= 2 points");

    std::string csv = "time,x,x_modified,h,h_modified\n";
    for (long long jdx = 0; jdx < points; ++jdx) {
        const double t =
            start + (end - start) * static_cast<double>(jdx) / static_cast<double>(points - 1);
        const double x = growth::evaluate_richards(richards, t);
        const double xm = growth::evaluate_modified(richards, c, t);
        const double h = growth::growth_rate_h(richards, t);
        double hm = h;
        if (c.kind() != growth::Perturbation::Kind::None && t > c.t_star())
            hm += c.value(richards, t) * growth::perturbation_kernel(richards, t);
        csv += format_number(t) + "," + format_number(x) + "," + format_number(xm) + "," +
               format_number(h) + "," + format_number(hm) + "\n";
    }
    const std::string dir = cfg.get_string("out.dir", ".");
    ensure_out_dir(dir);
    write_text(dir + "/curve.csv", csv);

    const growth::TangentSummary tangent = growth::tangent_summary(richards);
    json j{{"schema_version", kSchemaVersion},
           {"command", "curve"},
           {"t_inflection", tangent.t_inflection},
           {"x_at_inflection", tangent.x_at_inflection},
           {"mu", tangent.mu},
           {"lambda", tangent.lambda_lag},
           {"carrying_capacity", growth::carrying_capacity(richards)},
           {"modified_carrying_capacity", growth::modified_carrying_capacity(richards, c)}};
    if (cfg.has("perturbation.p"))
        j["t_star"] = growth::switch_time(richards, cfg.get_double("perturbation.p"));
    else if (c.kind() != growth::Perturbation::Kind::None)
        j["t_star"] = c.t_star();
    const std::string report_path = dir + "/curve_diagnostics.json";
    write_text(report_path, j.dump(2) + "\n");
    return report_path;
}

}  // namespace io
}  // namespace richfit
