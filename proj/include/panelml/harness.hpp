#pragma once

#include <cstdint>
#include <optional>

#include "panelml/metrics.hpp"
#include "panelml/recode.hpp"
#include "panelml/shap.hpp"
#include "panelml/stats.hpp"

namespace panelml {

/// Flat key-value experiment configuration: one `key = value` per line,
/// `#` starts a comment, later keys override earlier ones.
struct Config {
    std::vector<std::pair<std::string, std::string>> entries;

    static Config parse_string(const std::string& text, const std::string& origin);
    static Config load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback = "") const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_flag(const std::string& key, bool fallback) const;
    void set(const std::string& key, const std::string& value);

    /// Order-independent content hash, recorded in run metadata.
    std::uint64_t hash() const;
};

/// Generative model for an NLSY-style extract: persistent per-individual
/// effects, planted per-variable income weights, raw dollar incomes.
struct SynthSpec {
    std::size_t individuals = 1500;
    std::vector<int> years = {2015, 2017, 2019, 2021};

    // Planted effect weights on (standardized) income, strongest first.
    double effect_degree = 1.0;
    double effect_occupation = 0.65;
    double effect_sex = 0.45;
    double effect_work_weeks = 0.12;
    double effect_work_hours = 0.08;
    double effect_parental_income = 0.08;
    double effect_age = 0.05;
    double effect_race = 0.04;
    double effect_industry = 0.03;
    double effect_grades = 0.03;

    double persistence = 0.5;    // latent per-individual income component
    double noise = 0.25;         // per-year income noise
    double missing_rate = 0.05;  // chance an eligible feature cell is blank
    std::array<double, 2> class_boundaries = {50000.0, 100000.0};
    // Share of incomes below each boundary; the income curve is tuned so
    // binning lands on these.
    std::array<double, 2> boundary_quantiles = {0.576, 0.888};

    static SynthSpec from_config(const Config& config);
};

/// Wide-format CSV text that ingests under the shipped survey codebook.
/// Byte-identical per (spec, seed).
std::string generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

struct HarnessConfig {
    std::string codebook_path;
    std::string data_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;

    std::string model = "forest";  // majority | forest | svm | mlp
    std::vector<std::string> compare_models = {"majority", "forest", "svm", "mlp"};

    double train_fraction = 0.8;
    bool group_by_individual = false;

    double prune_threshold = 0.7;
    std::vector<std::string> keep_policy = {"degree", "res_father_grade", "res_mother_grade"};
    bool one_hot = true;
    bool missing_level = true;

    // Model hyperparameters.
    int trees = 100;
    int mtry = 0;
    int max_depth = 0;
    double svm_c = 1.0;
    std::string svm_kernel = "linear";
    double svm_gamma = 0.1;
    int mlp_hidden = 0;
    double mlp_rate = 0.3;
    double mlp_momentum = 0.2;
    int mlp_epochs = 500;

    // Attribution settings.
    int shap_samples = 128;
    std::size_t shap_background = 100;
    std::size_t explain_rows = 200;

    std::uint64_t config_hash = 0;

    static HarnessConfig from_config(const Config& config);

    SplitSpec split_spec() const;
};

/// Ingested, unrolled, filtered, missing-marked, recoded and pruned data.
struct PreparedData {
    Codebook codebook;
    LongTable table;
    std::size_t rows_before_filter = 0;
    std::size_t removed = 0;
    std::vector<std::pair<std::string, std::size_t>> uncovered;  // recode fallout
    CorrelationMatrix correlations;
    std::vector<std::string> kept;    // surviving feature variables
    std::vector<std::string> pruned;  // dropped by correlation pruning
};

PreparedData prepare_data(const HarnessConfig& config);
DesignMatrix build_matrix(const PreparedData& data, const HarnessConfig& config);

/// Trainer for one of the supported model names, seeded from the run seed.
Trainer make_trainer(const HarnessConfig& config, const std::string& model_name);

struct ReportBundle {
    std::vector<EvalReport> reports;
    std::string markdown;  // paper-style comparison table
    // filename -> content; written verbatim so reruns are byte-identical.
    std::vector<std::pair<std::string, std::string>> artifacts;
};

/// Write every artifact under out_dir, creating it if needed.
void write_bundle(const ReportBundle& bundle, const std::string& out_dir);

ReportBundle run_ingest(const HarnessConfig& config);
ReportBundle run_explore(const HarnessConfig& config);
ReportBundle run_baseline(const HarnessConfig& config);
ReportBundle run_model_comparison(const HarnessConfig& config);
ReportBundle run_longitudinal_compare(const HarnessConfig& config);
ReportBundle run_ablation(const HarnessConfig& config);
ReportBundle run_explain(const HarnessConfig& config);

}  // namespace panelml
