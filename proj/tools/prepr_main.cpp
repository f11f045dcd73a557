// Command-line front end: one binary, three subcommands.
//
//   prepr test            two-sample test on real data files
//   prepr simulate        Monte Carlo campaigns from a config file
//   prepr partition-check random-split calibration check on one group
//
// Reports are JSON (stdout or --out). Exit codes: 0 success, 2 bad input,
// 3 computation failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "prepr/prepr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> parse_test_list(const std::string& csv) {
    std::vector<std::string> tests;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        std::string piece = csv.substr(start, comma - start);
        const std::size_t a = piece.find_first_not_of(" \t");
        const std::size_t b = piece.find_last_not_of(" \t");
        if (a != std::string::npos) tests.push_back(piece.substr(a, b - a + 1));
        start = comma + 1;
    }
    if (tests.empty())
        throw prepr::validation_error("test list is empty");
    for (const auto& t : tests)
        if (!prepr::known_test_name(t))
            throw prepr::validation_error("unknown test '" + t +
                                          "' (expected PREPR, BS, SD, or CQ)");
    return tests;
}

void emit(const json& doc, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out)
        throw prepr::validation_error("cannot open '" + out_path + "' for writing");
    out << doc.dump(2) << "\n";
}

json prepr_result_json(const prepr::TestResult& r,
                       const std::vector<std::string>& names) {
    json j;
    j["test"] = "PREPR";
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["reject"] = r.reject;
    j["alpha"] = r.alpha;
    j["critical_value"] = r.critical_value;
    j["variables_used"] = r.p;
    j["variables_dropped"] = r.dropped;
    j["argmax_variable"] = r.argmax_variable;
    if (r.argmax_variable < names.size())
        j["argmax_name"] = names[r.argmax_variable];
    j["asymptotics_warning"] = r.asymptotics_warning;
    return j;
}

json baseline_result_json(const prepr::BaselineResult& r) {
    json j;
    j["test"] = prepr::method_name(r.method);
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["reject"] = r.reject;
    j["alpha"] = r.alpha;
    return j;
}

struct LoadFlags {
    bool variables_in_rows = false;
    bool log_transform = false;
    std::string label_column;
    std::string label_file;

    prepr::LoadOptions options() const {
        prepr::LoadOptions opt;
        opt.orientation = variables_in_rows ? prepr::Orientation::VariablesInRows
                                            : prepr::Orientation::SamplesInRows;
        opt.log_transform = log_transform;
        opt.label_column = label_column;
        opt.label_file = label_file;
        return opt;
    }
};

void add_load_flags(CLI::App* cmd, LoadFlags& flags) {
    cmd->add_flag("--variables-in-rows", flags.variables_in_rows,
                  "input rows are variables (genes), not samples");
    cmd->add_flag("--log-transform", flags.log_transform,
                  "apply a natural log to every entry before testing");
}

int run_test_command(const std::string& x_path, const std::string& y_path,
                     const std::string& data_path, const LoadFlags& flags,
                     const std::string& tests_csv, double alpha, bool permissive,
                     const std::string& out_path) {
    const auto tests = parse_test_list(tests_csv);
    const auto policy = permissive ? prepr::DegeneratePolicy::Drop
                                   : prepr::DegeneratePolicy::Strict;

    prepr::LabeledDataset ds;
    if (!data_path.empty()) {
        if (!x_path.empty() || !y_path.empty())
            throw prepr::validation_error("give --data or --x/--y, not both");
        if (flags.label_column.empty() && flags.label_file.empty())
            throw prepr::validation_error(
                "--data needs --labels COL or --label-file FILE");
        ds = prepr::load_matrix(data_path, flags.options());
    } else {
        if (x_path.empty() || y_path.empty())
            throw prepr::validation_error("need both --x and --y (or --data)");
        LoadFlags plain = flags;
        plain.label_column.clear();
        plain.label_file.clear();
        const prepr::LabeledDataset dx = prepr::load_matrix(x_path, plain.options());
        const prepr::LabeledDataset dy = prepr::load_matrix(y_path, plain.options());
        if (dx.data.p != dy.data.p)
            throw prepr::validation_error(
                "--x and --y have different variable counts");
        ds.data = prepr::make_matrix(dx.data.n + dy.data.n, dx.data.p);
        for (std::size_t j = 0; j < dx.data.p; ++j) {
            for (std::size_t i = 0; i < dx.data.n; ++i)
                ds.data.at(i, j) = dx.data.at(i, j);
            for (std::size_t i = 0; i < dy.data.n; ++i)
                ds.data.at(dx.data.n + i, j) = dy.data.at(i, j);
        }
        ds.variable_names = dx.variable_names;
        ds.group_labels.assign(dx.data.n, "x");
        ds.group_labels.insert(ds.group_labels.end(), dy.data.n, "y");
    }

    const prepr::TwoSampleReport rep = prepr::two_sample_run(ds, tests, alpha, policy);

    json doc;
    doc["command"] = "test";
    doc["group1"] = {{"label", rep.label1}, {"n", rep.n1}};
    doc["group2"] = {{"label", rep.label2}, {"n", rep.n2}};
    doc["p"] = rep.p;
    doc["alpha"] = alpha;
    doc["results"] = json::array();
    std::size_t next_baseline = 0;
    for (const auto& t : tests) {
        if (t == "PREPR")
            doc["results"].push_back(prepr_result_json(rep.prepr, ds.variable_names));
        else
            doc["results"].push_back(baseline_result_json(rep.baselines[next_baseline++]));
    }
    emit(doc, out_path);
    return 0;
}

int run_simulate_command(const std::string& config_path, const std::string& out_dir,
                         std::size_t workers, std::uint64_t seed_override,
                         bool has_seed) {
    auto configs = prepr::parse_campaign_file(config_path);
    if (has_seed)
        for (auto& c : configs) c.seed = seed_override;
    if (workers < 1) throw prepr::validation_error("--workers must be >= 1");

    const auto tables = prepr::run_grid(configs, workers);

    fs::create_directories(out_dir);
    const fs::path csv_path = fs::path(out_dir) / "results.csv";
    const fs::path json_path = fs::path(out_dir) / "results.json";
    {
        std::ofstream csv(csv_path);
        if (!csv)
            throw prepr::validation_error("cannot write '" + csv_path.string() + "'");
        csv << prepr::write_csv(tables);
    }
    {
        std::ofstream js(json_path);
        if (!js)
            throw prepr::validation_error("cannot write '" + json_path.string() + "'");
        js << prepr::write_json(tables) << "\n";
    }
    std::cout << prepr::render_table(tables);
    for (const auto& t : tables)
        if (t.aborted)
            std::cerr << "warning: campaign " << t.config.model
                      << " aborted: " << t.failed << " replicate failures\n";
    return 0;
}

int run_partition_command(const std::string& data_path, const LoadFlags& flags,
                          const std::string& group, std::size_t reps,
                          const std::string& tests_csv, double alpha,
                          std::uint64_t seed, const std::string& out_path) {
    const auto tests = parse_test_list(tests_csv);
    const prepr::LabeledDataset ds = prepr::load_matrix(data_path, flags.options());

    prepr::SampleMatrix data;
    std::string used_group = "(all rows)";
    if (!ds.group_labels.empty()) {
        std::string l1, l2;
        auto [a, b] = prepr::split_groups(ds, &l1, &l2);
        if (group.empty() || group == l1) {
            data = std::move(a);
            used_group = l1;
        } else if (group == l2) {
            data = std::move(b);
            used_group = l2;
        } else {
            throw prepr::validation_error("no group labeled '" + group +
                                          "' (have '" + l1 + "', '" + l2 + "')");
        }
    } else {
        if (!group.empty())
            throw prepr::validation_error("--group given but the file has no labels");
        data = ds.data;
    }

    const prepr::PartitionCheckResult res =
        prepr::partition_check(data, reps, tests, alpha, seed);

    json doc;
    doc["command"] = "partition-check";
    doc["group"] = used_group;
    doc["n"] = data.n;
    doc["p"] = data.p;
    doc["repetitions"] = reps;
    doc["completed"] = res.completed;
    doc["failed"] = res.failed;
    doc["alpha"] = alpha;
    doc["seed"] = seed;
    doc["results"] = json::array();
    for (std::size_t t = 0; t < tests.size(); ++t)
        doc["results"].push_back({{"test", tests[t]},
                                  {"rejections", res.rejections[t]},
                                  {"rate", res.rate(t)}});
    emit(doc, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prepivot-based two-sample mean tests for high-dimensional data"};
    app.require_subcommand(1);

    // ---- test ----
    auto* test_cmd = app.add_subcommand("test", "run two-sample tests on data files");
    std::string x_path, y_path, data_path, test_out;
    std::string test_list = "PREPR";
    double test_alpha = 0.05;
    bool permissive = false;
    LoadFlags test_flags;
    test_cmd->add_option("--x", x_path, "first group's matrix file");
    test_cmd->add_option("--y", y_path, "second group's matrix file");
    test_cmd->add_option("--data", data_path, "single file holding both groups");
    test_cmd->add_option("--labels", test_flags.label_column,
                         "label column in --data (name, or #k for position)");
    test_cmd->add_option("--label-file", test_flags.label_file,
                         "separate file with one label per sample");
    test_cmd->add_option("--tests", test_list, "comma list of PREPR,BS,SD,CQ");
    test_cmd->add_option("--alpha", test_alpha, "significance level");
    test_cmd->add_flag("--permissive", permissive,
                       "drop zero-variance variables instead of failing");
    test_cmd->add_option("--out", test_out, "write the JSON report here");
    add_load_flags(test_cmd, test_flags);

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "run Monte Carlo campaigns");
    std::string config_path, out_dir;
    std::size_t workers = 1;
    std::uint64_t sim_seed = 0;
    sim_cmd->add_option("--config", config_path, "campaign file")->required();
    sim_cmd->add_option("--out", out_dir, "output directory")->required();
    sim_cmd->add_option("--workers", workers, "worker thread count");
    auto* seed_opt =
        sim_cmd->add_option("--seed", sim_seed, "override every campaign's master seed");

    // ---- partition-check ----
    auto* part_cmd =
        app.add_subcommand("partition-check", "random-split calibration check");
    std::string part_data, part_group, part_out;
    std::string part_list = "PREPR";
    std::size_t part_reps = 1000;
    std::uint64_t part_seed = 1;
    double part_alpha = 0.05;
    LoadFlags part_flags;
    part_cmd->add_option("--data", part_data, "matrix file")->required();
    part_cmd->add_option("--labels", part_flags.label_column,
                         "label column (name, or #k)");
    part_cmd->add_option("--label-file", part_flags.label_file, "label file");
    part_cmd->add_option("--group", part_group, "which labeled group to split");
    part_cmd->add_option("--reps", part_reps, "number of random splits");
    part_cmd->add_option("--tests", part_list, "comma list of PREPR,BS,SD,CQ");
    part_cmd->add_option("--alpha", part_alpha, "significance level");
    part_cmd->add_option("--seed", part_seed, "partition seed");
    part_cmd->add_option("--out", part_out, "write the JSON report here");
    add_load_flags(part_cmd, part_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; usage mistakes are input errors
    }

    try {
        if (test_cmd->parsed())
            return run_test_command(x_path, y_path, data_path, test_flags, test_list,
                                    test_alpha, permissive, test_out);
        if (sim_cmd->parsed())
            return run_simulate_command(config_path, out_dir, workers, sim_seed,
                                        seed_opt->count() > 0);
        return run_partition_command(part_data, part_flags, part_group, part_reps,
                                     part_list, part_alpha, part_seed, part_out);
    } catch (const prepr::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const prepr::computation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
