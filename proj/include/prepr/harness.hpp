#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "prepr/baselines.hpp"
#include "prepr/prepivot_test.hpp"
#include "prepr/sample_matrix.hpp"
#include "prepr/simgen.hpp"

// Monte Carlo driver. A campaign is a list of experiment configurations;
// each experiment draws replicate pairs (X, Y), runs the requested tests,
// and tallies rejections.
//
// Determinism contract: replicate k of an experiment is seeded by hashing
// (experiment seed, stream tag, k), so the full rejection table is a pure
// function of the configuration. Worker threads pull replicate indices from
// an atomic counter and write into preassigned slots; thread count and
// scheduling cannot change any count. Timing is the one exception: the
// seconds column is wall time, so comparisons of output files should go
// through csv_stable_view, which drops it.

namespace prepr {

inline constexpr std::uint64_t kStreamStructure = 0xC0FFEE01;
inline constexpr std::uint64_t kStreamX = 0xC0FFEE02;
inline constexpr std::uint64_t kStreamY = 0xC0FFEE03;
inline constexpr std::uint64_t kStreamPartition = 0xC0FFEE04;

struct ExperimentConfig {
    int scenario = 1;  // 1 = normal innovations, 2 = centered gamma
    std::string model = "M1";
    std::size_t p = 200;
    std::size_t n = 35;
    std::size_t m = 35;
    double r = 0.0;      // fraction of signal coordinates
    double delta = 0.0;  // largest mean shift; 0 = null experiment
    double alpha = 0.05;
    std::vector<std::string> tests{"PREPR"};
    std::size_t replicates = 0;  // 0 = desk-scale default for this p
    std::uint64_t seed = 1;
};

// Desk-scale replicate counts: enough for ~0.005 standard error at p = 200,
// tapering off where a replicate costs more.
inline std::size_t default_replicates(std::size_t p) {
    if (p <= 200) return 2000;
    if (p <= 1000) return 500;
    return 200;
}

inline std::size_t effective_replicates(const ExperimentConfig& c) {
    return c.replicates ? c.replicates : default_replicates(c.p);
}

inline bool known_test_name(const std::string& t) {
    return t == "PREPR" || t == "BS" || t == "SD" || t == "CQ";
}

inline void validate(const ExperimentConfig& c) {
    if (c.scenario != 1 && c.scenario != 2)
        throw validation_error("ExperimentConfig: scenario must be 1 or 2");
    if (c.model != "M1" && c.model != "M2" && c.model != "M3" && c.model != "M4" &&
        c.model != "M5")
        throw validation_error("ExperimentConfig: unknown model '" + c.model +
                               "' (expected M1..M5)");
    if (c.p < 2) throw validation_error("ExperimentConfig: p must be >= 2");
    if (c.n < 2 || c.m < 2)
        throw validation_error("ExperimentConfig: group sizes must be >= 2");
    if (!(c.r >= 0.0 && c.r <= 1.0))
        throw validation_error("ExperimentConfig: r must lie in [0,1]");
    if (!(c.delta >= 0.0)) throw validation_error("ExperimentConfig: delta must be >= 0");
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
        throw validation_error("ExperimentConfig: alpha must lie in (0,1)");
    if (c.tests.empty())
        throw validation_error("ExperimentConfig: test list must not be empty");
    for (const auto& t : c.tests) {
        if (!known_test_name(t))
            throw validation_error("ExperimentConfig: unknown test '" + t +
                                   "' (expected PREPR, BS, SD, or CQ)");
        if (t == "CQ" && (c.n < 4 || c.m < 4))
            throw validation_error("ExperimentConfig: CQ needs n, m >= 4");
        if (t == "BS" && c.n + c.m <= 4)
            throw validation_error("ExperimentConfig: BS needs n + m > 4");
        if (t == "SD" && c.n + c.m < 5)
            throw validation_error("ExperimentConfig: SD needs n + m >= 5");
    }
}

inline CovarianceModel covariance_for(const ExperimentConfig& c) {
    CovarianceModel model;
    model.scale_seed = derive_seed(c.seed, kStreamStructure, 0);
    if (c.model == "M1") {
        model.kind = CovKind::MA10;
    } else if (c.model == "M2") {
        model.kind = CovKind::LongRange;
        model.hurst = 0.625;
    } else if (c.model == "M3") {
        model.kind = CovKind::CompoundSymmetry;
        model.rho = 0.4;
    } else if (c.model == "M4") {
        model.kind = CovKind::PolyDecayScaled;
        model.decay_exponent = 2.5;
    } else {
        model.kind = CovKind::LongRangeScaled;
        model.hurst = 0.625;
    }
    return model;
}

struct RejectionTable {
    ExperimentConfig config;
    std::vector<std::size_t> rejections;  // aligned with config.tests
    std::size_t completed = 0;
    std::size_t failed = 0;
    bool aborted = false;  // more than 1% of replicates failed
    double seconds = 0.0;

    double rate(std::size_t t) const {
        return completed ? static_cast<double>(rejections[t]) /
                               static_cast<double>(completed)
                         : 0.0;
    }
    double std_error(std::size_t t) const {
        if (!completed) return 0.0;
        const double r = rate(t);
        return std::sqrt(r * (1.0 - r) / static_cast<double>(completed));
    }
};

inline bool should_abort(std::size_t failed, std::size_t total) {
    return failed * 100 > total;
}

namespace detail {

inline bool run_one_test(const std::string& name, const SampleMatrix& X,
                         const SampleMatrix& Y, double alpha) {
    if (name == "PREPR") return run_test(X, Y, alpha).reject;
    if (name == "BS") return bs_test(X, Y, alpha).reject;
    if (name == "SD") return sd_test(X, Y, alpha).reject;
    return cq_test(X, Y, alpha).reject;
}

}  // namespace detail

// Caches Cholesky factors across experiments that share a covariance
// structure. Keyed by model kind, dimension, and structural seed.
class FactorCache {
  public:
    const CovarianceFactor& get(const CovarianceModel& model, std::size_t p) {
        const std::string key = std::to_string(static_cast<int>(model.kind)) + ":" +
                                std::to_string(p) + ":" +
                                std::to_string(model.scale_seed);
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, build_covariance(model, p)).first;
        return it->second;
    }

  private:
    std::mutex mu_;
    std::map<std::string, CovarianceFactor> cache_;
};

inline RejectionTable run_experiment(const ExperimentConfig& config,
                                     std::size_t workers = 1,
                                     FactorCache* cache = nullptr) {
    validate(config);
    const auto t0 = std::chrono::steady_clock::now();

    const CovarianceModel model = covariance_for(config);
    FactorCache local;
    const CovarianceFactor& factor =
        (cache ? *cache : local).get(model, config.p);

    std::vector<double> mu;
    if (config.delta > 0.0)
        mu = signal_vector({config.p, config.r, config.delta});

    const std::size_t R = effective_replicates(config);
    const std::size_t T = config.tests.size();
    const Scenario scen =
        config.scenario == 1 ? Scenario::Normal : Scenario::CenteredGamma;

    std::vector<std::uint8_t> reject_flags(R * T, 0);
    std::vector<std::uint8_t> failed_flags(R, 0);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= R || stop.load()) break;
            try {
                const SampleMatrix X =
                    sample_population(config.n, factor, scen, mu,
                                      derive_seed(config.seed, kStreamX, k));
                const SampleMatrix Y =
                    sample_population(config.m, factor, scen, {},
                                      derive_seed(config.seed, kStreamY, k));
                for (std::size_t t = 0; t < T; ++t)
                    reject_flags[k * T + t] =
                        detail::run_one_test(config.tests[t], X, Y, config.alpha) ? 1 : 0;
            } catch (const computation_error&) {
                failed_flags[k] = 1;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
                break;
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const std::size_t count = std::min(workers, R);
        pool.reserve(count);
        for (std::size_t w = 0; w < count; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    RejectionTable table;
    table.config = config;
    table.rejections.assign(T, 0);
    for (std::size_t k = 0; k < R; ++k) {
        if (failed_flags[k]) {
            ++table.failed;
            continue;
        }
        ++table.completed;
        for (std::size_t t = 0; t < T; ++t) table.rejections[t] += reject_flags[k * T + t];
    }
    table.aborted = should_abort(table.failed, R);
    table.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return table;
}

inline std::vector<RejectionTable> run_grid(
    const std::vector<ExperimentConfig>& configs, std::size_t workers = 1) {
    if (configs.empty())
        throw validation_error("run_grid: campaign list is empty");
    for (const auto& c : configs) validate(c);
    FactorCache cache;
    std::vector<RejectionTable> tables;
    tables.reserve(configs.size());
    for (const auto& c : configs)
        tables.push_back(run_experiment(c, workers, &cache));
    return tables;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string format_fixed3(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace detail

inline std::string write_csv(const std::vector<RejectionTable>& tables) {
    std::string out = "scenario,model,p,n,m,r,delta,test,rate,se,replicates,seconds\n";
    for (const auto& tab : tables) {
        const auto& c = tab.config;
        const std::string prefix =
            std::to_string(c.scenario) + "," + c.model + "," + std::to_string(c.p) +
            "," + std::to_string(c.n) + "," + std::to_string(c.m) + "," +
            detail::format_double(c.r) + "," + detail::format_double(c.delta) + ",";
        for (std::size_t t = 0; t < c.tests.size(); ++t) {
            out += prefix + c.tests[t] + "," + detail::format_double(tab.rate(t)) +
                   "," + detail::format_double(tab.std_error(t)) + "," +
                   std::to_string(effective_replicates(c)) + "," +
                   detail::format_fixed3(tab.seconds) + "\n";
        }
    }
    return out;
}

// Copy of a results CSV with the trailing wall-time column removed; this is
// the view that must be bit-identical across worker counts and reruns.
inline std::string csv_stable_view(const std::string& csv) {
    std::string out;
    out.reserve(csv.size());
    std::size_t start = 0;
    while (start < csv.size()) {
        std::size_t end = csv.find('\n', start);
        if (end == std::string::npos) end = csv.size();
        const std::string line = csv.substr(start, end - start);
        const std::size_t comma = line.rfind(',');
        out += comma == std::string::npos ? line : line.substr(0, comma);
        out += '\n';
        start = end + 1;
    }
    return out;
}

inline std::string write_json(const std::vector<RejectionTable>& tables) {
    // Assembled by hand to keep this header dependency-light; the CLI wraps
    // richer reports with a JSON library.
    std::string out = "{\"campaigns\":[";
    bool first_table = true;
    for (const auto& tab : tables) {
        const auto& c = tab.config;
        if (!first_table) out += ",";
        first_table = false;
        out += "{\"scenario\":" + std::to_string(c.scenario) + ",\"model\":\"" +
               c.model + "\",\"p\":" + std::to_string(c.p) +
               ",\"n\":" + std::to_string(c.n) + ",\"m\":" + std::to_string(c.m) +
               ",\"r\":" + detail::format_double(c.r) +
               ",\"delta\":" + detail::format_double(c.delta) +
               ",\"alpha\":" + detail::format_double(c.alpha) +
               ",\"seed\":" + std::to_string(c.seed) +
               ",\"replicates\":" + std::to_string(effective_replicates(c)) +
               ",\"completed\":" + std::to_string(tab.completed) +
               ",\"failed\":" + std::to_string(tab.failed) +
               ",\"aborted\":" + (tab.aborted ? std::string("true") : std::string("false")) +
               ",\"seconds\":" + detail::format_fixed3(tab.seconds) + ",\"results\":[";
        for (std::size_t t = 0; t < c.tests.size(); ++t) {
            if (t) out += ",";
            out += "{\"test\":\"" + c.tests[t] +
                   "\",\"rejections\":" + std::to_string(tab.rejections[t]) +
                   ",\"rate\":" + detail::format_double(tab.rate(t)) +
                   ",\"se\":" + detail::format_double(tab.std_error(t)) + "}";
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

inline std::string render_table(const std::vector<RejectionTable>& tables) {
    std::ostringstream os;
    os << "scenario model     p     n     m      r  delta  test   rate      se"
          "      reps  status\n";
    for (const auto& tab : tables) {
        const auto& c = tab.config;
        for (std::size_t t = 0; t < c.tests.size(); ++t) {
            char line[256];
            std::snprintf(line, sizeof(line),
                          "%8d %-5s %5zu %5zu %5zu %6g %6g  %-5s %.4f  %.4f  %8zu  %s\n",
                          c.scenario, c.model.c_str(), c.p, c.n, c.m, c.r, c.delta,
                          c.tests[t].c_str(), tab.rate(t), tab.std_error(t),
                          effective_replicates(c),
                          tab.aborted ? "ABORTED" : "ok");
            os << line;
        }
    }
    return os.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        const std::string piece = trim(s.substr(start, comma - start));
        if (!piece.empty()) parts.push_back(piece);
        start = comma + 1;
    }
    return parts;
}

template <typename T>
inline T parse_number(const std::string& raw, const std::string& key) {
    const std::string s = trim(raw);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw validation_error("campaign file: cannot parse value '" + raw +
                               "' for key '" + key + "'");
    return value;
}

}  // namespace detail

// Campaign file format: INI-style blocks, one experiment per [section].
// Section names are free text; keys are the ExperimentConfig fields, with
// `tests` a comma-separated list. Lines starting with # or ; are comments.
inline std::vector<ExperimentConfig> parse_campaign_file(std::istream& in) {
    std::vector<ExperimentConfig> configs;
    std::string line;
    std::size_t lineno = 0;
    bool in_section = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw validation_error("campaign file: unterminated section at line " +
                                       std::to_string(lineno));
            configs.emplace_back();
            in_section = true;
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw validation_error("campaign file: expected key = value at line " +
                                   std::to_string(lineno));
        if (!in_section)
            throw validation_error("campaign file: key outside any [campaign] section "
                                   "at line " + std::to_string(lineno));
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        ExperimentConfig& c = configs.back();
        if (key == "scenario") c.scenario = detail::parse_number<int>(value, key);
        else if (key == "model") c.model = value;
        else if (key == "p") c.p = detail::parse_number<std::size_t>(value, key);
        else if (key == "n") c.n = detail::parse_number<std::size_t>(value, key);
        else if (key == "m") c.m = detail::parse_number<std::size_t>(value, key);
        else if (key == "r") c.r = detail::parse_number<double>(value, key);
        else if (key == "delta") c.delta = detail::parse_number<double>(value, key);
        else if (key == "alpha") c.alpha = detail::parse_number<double>(value, key);
        else if (key == "tests") c.tests = detail::split_list(value);
        else if (key == "replicates")
            c.replicates = detail::parse_number<std::size_t>(value, key);
        else if (key == "seed") c.seed = detail::parse_number<std::uint64_t>(value, key);
        else
            throw validation_error("campaign file: unknown key '" + key +
                                   "' at line " + std::to_string(lineno));
    }
    for (const auto& c : configs) validate(c);
    if (configs.empty())
        throw validation_error("campaign file: no [campaign] sections found");
    return configs;
}

inline std::vector<ExperimentConfig> parse_campaign_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("campaign file: cannot open '" + path + "'");
    return parse_campaign_file(in);
}

}  // namespace prepr
