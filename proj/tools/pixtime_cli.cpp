#include <cstdint>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pixtime/config.hpp"
#include "pixtime/errors.hpp"
#include "pixtime/harness.hpp"

using namespace pixtime;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "override the experiment seed");
    cmd->add_option("--out", f.out, "output directory");
}

ExperimentConfig load_config(const CommonFlags& f, Mode mode) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(f.config + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) {
            throw ConfigError(f.config + ": top level must be a JSON object");
        }
    }
    j["mode"] = mode_name(mode);
    if (f.seed) {
        j["seed"] = *f.seed;
    }
    if (!f.out.empty()) {
        j["output_dir"] = f.out;
    }
    return ExperimentConfig::from_json(j);
}

void summarize(const ExperimentConfig& c, const nlohmann::ordered_json& m) {
    std::cout << mode_name(c.mode) << " run written to " << c.output_dir.string() << "\n";
    if (m.contains("average")) {
        const auto& a = m["average"];
        std::cout << "  test mse " << a["mse"].get<double>() << "  mae " << a["mae"].get<double>()
                  << "  (persistence mse " << a["persistence_mse"].get<double>() << ")\n";
    }
    if (m.contains("results")) {
        for (const auto& r : m["results"]) {
            std::cout << "  " << r["task"].get<std::string>() << ": max rel. error "
                      << r["max_rel_error"].get<double>() << " (" << r["worst_param"].get<std::string>() << ") "
                      << (r["passed"].get<bool>() ? "ok" : "FAILED") << "\n";
        }
    }
    if (m.contains("table")) {
        std::cout << "  " << m["table"].dump() << "\n";
    }
    if (m.contains("sweep")) {
        for (const auto& p : m["sweep"]) {
            std::cout << "  subset " << p["subset_size"].get<std::size_t>() << ": VE mse "
                      << p["VE"]["mse"].get<double>() << "  NoVE mse " << p["NoVE"]["mse"].get<double>() << "\n";
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated PiXTime forecasting: training, evaluation and ablations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(build_id()));

    struct Command {
        const char* name;
        const char* help;
        Mode mode;
        bool evaluate_only;
    };
    const Command commands[] = {
        {"train-central", "train one node on the full training split", Mode::Central, false},
        {"train-fed", "run federated training", Mode::Federated, false},
        {"evaluate", "evaluate untrained models and the persistence baseline", Mode::Federated, true},
        {"gradcheck", "compare autodiff gradients with finite differences", Mode::GradCheck, false},
        {"ablate-granularity", "fine + coarse federation against each node alone", Mode::AblateGranularity, false},
        {"ablate-ve", "paired runs with and without the VE table", Mode::AblateVe, false},
    };
    CommonFlags flags;
    std::string eval_mode = "federated";
    const Command* chosen = nullptr;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, flags);
        if (c.evaluate_only) {
            sub->add_option("--mode", eval_mode, "central or federated layout")
                ->check(CLI::IsMember({"central", "federated"}));
        }
        sub->callback([&chosen, &c] { chosen = &c; });
    }

    SyntheticSpec spec;
    std::string synth_out = ".";
    std::string synth_name = "synthetic.csv";
    CLI::App* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset as CSV");
    gen->add_option("--n-vars", spec.n_vars, "variables including the target");
    gen->add_option("--length", spec.length, "rows");
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_option("--noise", spec.noise, "Gaussian noise sigma");
    gen->add_option("--out", synth_out, "output directory");
    gen->add_option("--name", synth_name, "file name inside the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            std::filesystem::create_directories(synth_out);
            const std::filesystem::path path = std::filesystem::path(synth_out) / synth_name;
            write_csv(path, generate_synthetic(spec));
            std::cout << "wrote " << path.string() << " (" << spec.length << " rows, " << spec.n_vars << " columns)\n";
            return 0;
        }
        Mode mode = chosen->mode;
        if (chosen->evaluate_only) {
            mode = parse_mode(eval_mode);
        }
        ExperimentConfig config = load_config(flags, mode);
        if (chosen->evaluate_only) {
            config.rounds = 0;
            config.optimizer.epochs = 0;
        }
        const ExperimentOutput out = run_experiment(config);
        summarize(config, out.metrics);
        if (config.mode == Mode::GradCheck && !out.metrics["passed"].get<bool>()) {
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged on node " << e.node_id() << " at step " << e.step() << ": " << e.what()
                  << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
