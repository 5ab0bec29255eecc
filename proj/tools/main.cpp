#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "peakinf/errors.hpp"
#include "peakinf/harness.hpp"
#include "peakinf/peaks.hpp"

namespace {

struct Options {
    std::string preset = "exp1";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::string> out;
    std::optional<int> threads;
};

void fail(const std::string& code, const std::string& message) {
    std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw peakinf::Error(peakinf::ErrorCode::io, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Preset, then the --config file, then individual flags.
peakinf::ExperimentConfig build_config(const Options& o) {
    nlohmann::json patch = nlohmann::json::object();
    if (!o.config_path.empty()) {
        try {
            patch = nlohmann::json::parse(read_file(o.config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw peakinf::Error(peakinf::ErrorCode::configuration, std::string("invalid JSON: ") + e.what());
        }
        if (!patch.is_object()) throw peakinf::Error(peakinf::ErrorCode::configuration, "config must be a JSON object");
    }
    if (o.seed) patch["seed"] = *o.seed;
    if (o.reps) patch["replicates"] = *o.reps;
    if (o.threads) patch["threads"] = *o.threads;
    if (o.out) patch["output"]["dir"] = *o.out;
    return peakinf::make_config(o.preset, patch.dump());
}

int cmd_experiment(const Options& o) {
    const auto config = build_config(o);
    const auto result = peakinf::run_experiment(config);
    peakinf::write_outputs(result);
    std::cout << "experiment " << config.name << ": " << result.replicates << " replicates, " << result.cells.size()
              << " cells, outputs in " << config.output_dir << '\n';
    if (result.failed) {
        fail("numerical", result.failure_reason);
        return 3;
    }
    return 0;
}

int cmd_simulate(const Options& o) {
    const auto config = build_config(o);
    const auto plan = peakinf::make_plan(config);
    const auto sample = peakinf::sample_field(*plan.factor, plan.signals.front(),
                                              peakinf::NoiseKey{config.seed, 0, peakinf::kNoiseStream, 0});
    const std::filesystem::path dir = config.output_dir;
    std::filesystem::create_directories(dir);
    peakinf::write_field_csv(sample, dir / "field.csv");
    std::cout << "field with " << plan.grid->size() << " points, " << peakinf::find_local_maxima(sample).size()
              << " local maxima, written to " << (dir / "field.csv").string() << '\n';
    return 0;
}

int cmd_theory(const Options& o) {
    std::cout << peakinf::theory_report(build_config(o));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Peak detection and post-selection inference on Gaussian random fields"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config merged over the preset")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Base seed");
        sub->add_option("--out", o.out, "Output directory");
    };

    auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment and write CSVs");
    experiment->add_option("preset", o.preset, "exp1, exp2, exp3 or custom")
        ->required()
        ->check(CLI::IsMember({"exp1", "exp2", "exp3", "custom"}));
    add_common(experiment);
    experiment->add_option("--reps", o.reps, "Replicates")->check(CLI::PositiveNumber);
    experiment->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "Dump one field realization as CSV");
    simulate->add_option("preset", o.preset, "Preset supplying the defaults")
        ->check(CLI::IsMember({"exp1", "exp2", "exp3", "custom"}));
    add_common(simulate);

    auto* theory = app.add_subcommand("theory", "Print closed-form thresholds, discovery counts and power");
    theory->add_option("preset", o.preset, "Preset supplying the defaults")
        ->check(CLI::IsMember({"exp1", "exp2", "exp3", "custom"}));
    theory->add_option("--config", o.config_path, "JSON config merged over the preset")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail("usage", e.what());
        return 2;
    }

    try {
        if (experiment->parsed()) return cmd_experiment(o);
        if (simulate->parsed()) return cmd_simulate(o);
        return cmd_theory(o);
    } catch (const peakinf::Error& e) {
        fail(peakinf::error_code_name(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        fail("internal", e.what());
        return 1;
    }
}
