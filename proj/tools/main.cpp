#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "panelml/errors.hpp"
#include "panelml/harness.hpp"

namespace {

struct CliArgs {
    std::string codebook;
    std::string data;
    std::string config_path;
    std::string out;
    std::int64_t seed = -1;  // -1 = not given on the command line
};

// Config file first, command-line flags override.
panelml::HarnessConfig resolve(const CliArgs& args) {
    panelml::Config config;
    if (!args.config_path.empty()) config = panelml::Config::load(args.config_path);
    if (!args.codebook.empty()) config.set("codebook", args.codebook);
    if (!args.data.empty()) config.set("data", args.data);
    if (!args.out.empty()) config.set("out", args.out);
    if (args.seed >= 0) config.set("seed", std::to_string(args.seed));
    return panelml::HarnessConfig::from_config(config);
}

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--codebook", args.codebook, "variable codebook CSV");
    cmd->add_option("--data", args.data, "wide-format survey extract CSV");
    cmd->add_option("--config", args.config_path, "key = value experiment config");
    cmd->add_option("--seed", args.seed, "run seed (overrides the config)");
    cmd->add_option("--out", args.out, "output directory for artifacts");
}

int run_bundle(const CliArgs& args,
               panelml::ReportBundle (*runner)(const panelml::HarnessConfig&)) {
    panelml::HarnessConfig cfg = resolve(args);
    panelml::ReportBundle bundle = runner(cfg);
    panelml::write_bundle(bundle, cfg.out_dir);
    if (!bundle.markdown.empty()) std::cout << bundle.markdown;
    for (const auto& [name, content] : bundle.artifacts) {
        std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / name).string() << "\n";
    }
    return 0;
}

int run_synth(const CliArgs& args) {
    panelml::Config config;
    if (!args.config_path.empty()) config = panelml::Config::load(args.config_path);
    panelml::SynthSpec spec = panelml::SynthSpec::from_config(config);
    std::uint64_t seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed)
                                        : static_cast<std::uint64_t>(config.get_int("seed", 0));
    std::string csv = panelml::generate_synthetic(spec, seed);
    if (args.out.empty()) {
        std::cout << csv;
        return 0;
    }
    std::filesystem::path path = args.out;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw panelml::DataError("cannot write " + path.string());
    out << csv;
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panelml: longitudinal survey income classification"};
    app.require_subcommand(1);

    CliArgs args;
    struct Sub {
        const char* name;
        const char* help;
        panelml::ReportBundle (*runner)(const panelml::HarnessConfig&);
    };
    const Sub subs[] = {
        {"ingest", "load, unroll and summarize the dataset", panelml::run_ingest},
        {"explore", "correlation matrix and pruning decisions", panelml::run_explore},
        {"baseline", "majority-class reference run", panelml::run_baseline},
        {"compare", "train and score every configured model", panelml::run_model_comparison},
        {"longitudinal", "single-year vs multi-year task comparison", panelml::run_longitudinal_compare},
        {"ablate", "drop one variable at a time and rescore", panelml::run_ablation},
        {"explain", "per-variable attributions on test instances", panelml::run_explain},
    };
    for (const auto& sub : subs) add_common(app.add_subcommand(sub.name, sub.help), args);
    add_common(app.add_subcommand("synth", "generate a synthetic survey extract"), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.get_subcommand("synth")->parsed()) return run_synth(args);
        for (const auto& sub : subs) {
            if (app.get_subcommand(sub.name)->parsed()) return run_bundle(args, sub.runner);
        }
        return 1;
    } catch (const panelml::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const panelml::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const panelml::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
