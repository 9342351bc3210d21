#include "panelml/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "panelml/errors.hpp"
#include "panelml/forest.hpp"
#include "panelml/majority.hpp"
#include "panelml/mlp.hpp"
#include "panelml/rng.hpp"
#include "panelml/svm.hpp"

namespace panelml {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ';' || c == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        config.entries.emplace_back(key, value);
    }
    return config;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

bool Config::has(const std::string& key) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const auto& e) { return e.first == key; });
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        if (it->first == key) return it->second;
    }
    return fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw UsageError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

double Config::get_real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool Config::get_flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = get(key);
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw UsageError("config key '" + key + "': expected a flag, got '" + v + "'");
}

void Config::set(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
}

std::uint64_t Config::hash() const {
    // Effective (last-wins) view, order-independent. The output
    // directory never affects results and stays out of the hash.
    std::map<std::string, std::string> effective;
    for (const auto& [k, v] : entries) {
        if (k != "out") effective[k] = v;
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& [k, v] : effective) {
        mix(k);
        mix(v);
    }
    return h;
}

SynthSpec SynthSpec::from_config(const Config& c) {
    SynthSpec s;
    s.individuals = static_cast<std::size_t>(c.get_int("synth_individuals", static_cast<long long>(s.individuals)));
    if (c.has("synth_years")) {
        s.years.clear();
        for (const auto& y : split_list(c.get("synth_years"))) s.years.push_back(std::stoi(y));
    }
    s.effect_degree = c.get_real("effect_degree", s.effect_degree);
    s.effect_occupation = c.get_real("effect_occupation", s.effect_occupation);
    s.effect_sex = c.get_real("effect_sex", s.effect_sex);
    s.effect_work_weeks = c.get_real("effect_work_weeks", s.effect_work_weeks);
    s.effect_work_hours = c.get_real("effect_work_hours", s.effect_work_hours);
    s.effect_parental_income = c.get_real("effect_parental_income", s.effect_parental_income);
    s.effect_age = c.get_real("effect_age", s.effect_age);
    s.effect_race = c.get_real("effect_race", s.effect_race);
    s.effect_industry = c.get_real("effect_industry", s.effect_industry);
    s.effect_grades = c.get_real("effect_grades", s.effect_grades);
    s.persistence = c.get_real("persistence", s.persistence);
    s.noise = c.get_real("noise", s.noise);
    s.missing_rate = c.get_real("missing_rate", s.missing_rate);
    if (s.missing_rate < 0.0 || s.missing_rate >= 1.0) {
        throw UsageError("missing_rate must be in [0,1)");
    }
    return s;
}

namespace {

// Representative raw codes per coarse group, matching the shipped
// census recode maps (one code inside each group's first range).
constexpr int kOccupationCodes[33] = {10,   210,  500,  800,  1000, 1300, 1600, 1800, 2000,
                                      2100, 2200, 2600, 3000, 3300, 3600, 3700, 4000, 4200,
                                      4300, 4700, 5000, 6000, 6200, 6600, 7000, 7700, 8340,
                                      9000, 9500, 9800, 9850, 9900, 9950};
constexpr int kIndustryCodes[18] = {170,  370,  570,  770,  1070, 4070, 4670, 6070, 6470,
                                    6870, 7070, 7270, 7570, 7860, 7970, 8560, 8770, 9370};

// Acklam's rational approximation to the standard normal quantile.
double probit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("probit: quantile must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        double q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

int clamp_round(double v, int lo, int hi) {
    return std::clamp(static_cast<int>(std::llround(v)), lo, hi);
}

struct SynthPerson {
    std::int64_t id;
    int sex, race, degree;
    int bio_father, bio_mother, res_father, res_mother;  // recorded grades (may be 95)
    double latent_res_father, latent_res_mother;
    int highest_grade;
    long long parental_income;
    int base_age;
    int occupation_group, industry_group;  // 0-based
    double work_weeks_base, work_hours_base;
    double latent;  // persistent income component
};

}  // namespace

std::string generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.individuals < 2) throw UsageError("synth: need at least 2 individuals");
    if (spec.years.empty()) throw UsageError("synth: need at least one year");
    auto eng = substream(seed, "synth");

    std::vector<SynthPerson> people;
    people.reserve(spec.individuals);
    const int degree_weights[8] = {5, 12, 30, 18, 15, 10, 6, 4};
    for (std::size_t i = 0; i < spec.individuals; ++i) {
        SynthPerson p{};
        p.id = 100000 + static_cast<std::int64_t>(i);
        p.sex = 1 + static_cast<int>(uniform_below(eng, 2));
        p.race = 1 + static_cast<int>(uniform_below(eng, 5));
        int draw = static_cast<int>(uniform_below(eng, 100));
        p.degree = 7;
        for (int d = 0, acc = 0; d < 8; ++d) {
            acc += degree_weights[d];
            if (draw < acc) {
                p.degree = d;
                break;
            }
        }
        p.latent_res_father = std::clamp(12.0 + normal(eng) * 3.0, 0.0, 20.0);
        p.latent_res_mother = std::clamp(12.0 + normal(eng) * 3.0, 0.0, 20.0);
        p.res_father = uniform_below(eng, 25) == 0 ? 95 : clamp_round(p.latent_res_father, 0, 20);
        p.res_mother = uniform_below(eng, 25) == 0 ? 95 : clamp_round(p.latent_res_mother, 0, 20);
        // Biological grades track the residential ones closely so the
        // correlation pruning stage has real work to do.
        p.bio_father = clamp_round(p.latent_res_father + normal(eng) * 1.0, 0, 20);
        p.bio_mother = clamp_round(p.latent_res_mother + normal(eng) * 1.0, 0, 20);
        p.highest_grade = clamp_round(p.degree * 2.0 + 6.0 + normal(eng) * 1.2, 0, 20);
        p.parental_income = std::llround(std::exp(10.8 + 0.6 * normal(eng)));
        p.base_age = 31 + static_cast<int>(uniform_below(eng, 5));
        p.occupation_group = static_cast<int>(uniform_below(eng, 33));
        p.industry_group = static_cast<int>(uniform_below(eng, 18));
        p.work_weeks_base = std::clamp(46.0 + normal(eng) * 8.0, 0.0, 52.0);
        p.work_hours_base = std::clamp(40.0 + normal(eng) * 9.0, 5.0, 80.0);
        p.latent = normal(eng);
        people.push_back(p);
    }

    // Per-(person, year) observations plus the planted income signal.
    std::size_t n_years = spec.years.size();
    struct YearObs {
        int occupation_group, industry_group;
        int work_weeks, work_hours, age;
        double signal;
    };
    std::vector<std::vector<YearObs>> obs(spec.individuals, std::vector<YearObs>(n_years));
    std::vector<double> signals;
    signals.reserve(spec.individuals * n_years);
    for (std::size_t i = 0; i < spec.individuals; ++i) {
        SynthPerson& p = people[i];
        int occ = p.occupation_group, ind = p.industry_group;
        for (std::size_t y = 0; y < n_years; ++y) {
            if (y > 0 && uniform_below(eng, 10) == 0) occ = static_cast<int>(uniform_below(eng, 33));
            if (y > 0 && uniform_below(eng, 12) == 0) ind = static_cast<int>(uniform_below(eng, 18));
            YearObs& o = obs[i][y];
            o.occupation_group = occ;
            o.industry_group = ind;
            o.work_weeks = clamp_round(p.work_weeks_base + normal(eng) * 2.0, 0, 52);
            o.work_hours = clamp_round(p.work_hours_base + normal(eng) * 3.0, 1, 90);
            o.age = p.base_age + (spec.years[y] - spec.years[0]);

            double s = spec.effect_degree * (p.degree - 3.0) / 2.0 +
                       spec.effect_occupation * (occ + 1 - 17.0) / 9.52 +
                       spec.effect_sex * (p.sex == 1 ? 1.0 : -1.0) +
                       spec.effect_work_weeks * (o.work_weeks - 46.0) / 8.0 +
                       spec.effect_work_hours * (o.work_hours - 40.0) / 9.0 +
                       spec.effect_parental_income *
                           (std::log(static_cast<double>(p.parental_income)) - 10.8) / 0.6 +
                       spec.effect_age * (o.age - 33.0) / 2.5 +
                       spec.effect_race * (p.race - 3.0) / 1.414 +
                       spec.effect_industry * (ind + 1 - 9.5) / 5.19 +
                       spec.effect_grades *
                           ((p.latent_res_father - 12.0) / 3.0 + (p.latent_res_mother - 12.0) / 3.0) / 2.0 +
                       spec.persistence * p.latent + spec.noise * normal(eng);
            o.signal = s;
            signals.push_back(s);
        }
    }

    // Standardize the signal, then map it through an exponential income
    // curve whose parameters put the class boundaries at the requested
    // quantiles of a standard normal.
    double mean = 0.0;
    for (double s : signals) mean += s;
    mean /= static_cast<double>(signals.size());
    double var = 0.0;
    for (double s : signals) var += (s - mean) * (s - mean);
    double sd = signals.size() > 1 ? std::sqrt(var / static_cast<double>(signals.size() - 1)) : 0.0;
    if (sd == 0.0) sd = 1.0;

    double z1 = probit(spec.boundary_quantiles[0]);
    double z2 = probit(spec.boundary_quantiles[1]);
    double b1 = spec.class_boundaries[0], b2 = spec.class_boundaries[1];
    double B = std::log(b2 / b1) / (z2 - z1);
    double A = b1 * std::exp(-B * z1);

    // Header mirroring the shipped codebook layout.
    std::ostringstream out;
    out << "individual_id,sex,race,degree,bio_father_grade,bio_mother_grade,"
           "res_father_grade,res_mother_grade,parental_income,highest_grade";
    auto yearly = [&](const std::string& var) {
        for (int y : spec.years) out << "," << var << "#" << y;
    };
    yearly("age");
    yearly("industry");
    yearly("occupation");
    yearly("work_weeks");
    yearly("work_hours");
    yearly("income");
    out << "\n";

    auto blank = [&]() { return spec.missing_rate > 0.0 && uniform_real(eng) < spec.missing_rate; };
    for (std::size_t i = 0; i < spec.individuals; ++i) {
        const SynthPerson& p = people[i];
        out << p.id;
        auto field = [&](long long v) {
            out << ",";
            if (!blank()) out << v;
        };
        field(p.sex);
        field(p.race);
        field(p.degree);
        field(p.bio_father);
        field(p.bio_mother);
        field(p.res_father);
        field(p.res_mother);
        field(p.parental_income);
        field(p.highest_grade);
        auto yearly_field = [&](auto&& pick) {
            for (std::size_t y = 0; y < n_years; ++y) field(pick(obs[i][y]));
        };
        yearly_field([](const YearObs& o) { return o.age; });
        yearly_field([](const YearObs& o) { return kIndustryCodes[o.industry_group]; });
        yearly_field([](const YearObs& o) { return kOccupationCodes[o.occupation_group]; });
        yearly_field([](const YearObs& o) { return o.work_weeks; });
        yearly_field([](const YearObs& o) { return o.work_hours; });
        for (std::size_t y = 0; y < n_years; ++y) {
            double z = (obs[i][y].signal - mean) / sd;
            out << "," << std::llround(A * std::exp(B * z));  // income is never blanked
        }
        out << "\n";
    }
    return out.str();
}

HarnessConfig HarnessConfig::from_config(const Config& c) {
    HarnessConfig h;
    h.codebook_path = c.get("codebook", "");
    h.data_path = c.get("data", "");
    h.out_dir = c.get("out", h.out_dir);
    h.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    h.model = c.get("model", h.model);
    if (c.has("compare_models")) h.compare_models = split_list(c.get("compare_models"));
    h.train_fraction = c.get_real("train_fraction", h.train_fraction);
    h.group_by_individual = c.get_flag("group_by_individual", h.group_by_individual);
    h.prune_threshold = c.get_real("prune_threshold", h.prune_threshold);
    if (c.has("keep_policy")) h.keep_policy = split_list(c.get("keep_policy"));
    h.one_hot = c.get_flag("one_hot", h.one_hot);
    h.missing_level = c.get_flag("missing_level", h.missing_level);
    h.trees = static_cast<int>(c.get_int("trees", h.trees));
    h.mtry = static_cast<int>(c.get_int("mtry", h.mtry));
    h.max_depth = static_cast<int>(c.get_int("max_depth", h.max_depth));
    h.svm_c = c.get_real("svm_c", h.svm_c);
    h.svm_kernel = c.get("svm_kernel", h.svm_kernel);
    h.svm_gamma = c.get_real("svm_gamma", h.svm_gamma);
    h.mlp_hidden = static_cast<int>(c.get_int("mlp_hidden", h.mlp_hidden));
    h.mlp_rate = c.get_real("mlp_rate", h.mlp_rate);
    h.mlp_momentum = c.get_real("mlp_momentum", h.mlp_momentum);
    h.mlp_epochs = static_cast<int>(c.get_int("mlp_epochs", h.mlp_epochs));
    h.shap_samples = static_cast<int>(c.get_int("shap_samples", h.shap_samples));
    h.shap_background = static_cast<std::size_t>(c.get_int("shap_background", static_cast<long long>(h.shap_background)));
    h.explain_rows = static_cast<std::size_t>(c.get_int("explain_rows", static_cast<long long>(h.explain_rows)));
    h.config_hash = c.hash();
    return h;
}

SplitSpec HarnessConfig::split_spec() const {
    SplitSpec s;
    s.fraction = train_fraction;
    s.seed = seed;
    s.group_by_individual = group_by_individual;
    return s;
}

PreparedData prepare_data(const HarnessConfig& config) {
    if (config.codebook_path.empty()) throw UsageError("no codebook path given (--codebook or codebook=)");
    if (config.data_path.empty()) throw UsageError("no data path given (--data or data=)");

    PreparedData data;
    data.codebook = load_codebook(config.codebook_path);
    WideTable wide = ingest_wide_csv(config.data_path, data.codebook);
    LongTable table = unroll_longitudinal(wide);
    data.rows_before_filter = table.row_count();
    auto [filtered, removed] = filter_invalid_target(table);
    data.removed = removed;
    table = mark_missing(filtered);

    // Recode maps live next to the codebook as <ref>_map.csv.
    std::vector<RecodeMap> maps;
    std::filesystem::path dir = std::filesystem::path(config.codebook_path).parent_path();
    for (const auto& var : data.codebook.variables) {
        if (var.recode_ref.empty()) continue;
        bool seen = std::any_of(maps.begin(), maps.end(),
                                [&](const RecodeMap& m) { return m.name == var.recode_ref; });
        if (seen) continue;
        maps.push_back(load_recode_map((dir / (var.recode_ref + "_map.csv")).string(), var.recode_ref));
    }
    if (!maps.empty()) {
        RecodeOutcome outcome = apply_recodes(table, maps);
        table = std::move(outcome.table);
        data.uncovered = std::move(outcome.uncovered);
    }

    data.correlations = correlation_matrix(table);
    std::vector<std::string> kept_all =
        prune_correlated(data.correlations, config.prune_threshold, config.keep_policy);
    const std::string target_name = data.codebook.target().name;
    for (const auto& name : table.column_names()) {
        if (name == target_name) continue;
        bool kept = std::find(kept_all.begin(), kept_all.end(), name) != kept_all.end();
        (kept ? data.kept : data.pruned).push_back(name);
    }
    data.table = std::move(table);
    return data;
}

DesignMatrix build_matrix(const PreparedData& data, const HarnessConfig& config) {
    return encode_design_matrix(data.table, data.kept, config.one_hot, config.missing_level);
}

Trainer make_trainer(const HarnessConfig& config, const std::string& model_name) {
    std::uint64_t model_seed = substream(config.seed, "model_" + model_name)();
    if (model_name == "majority") {
        return [](const DesignMatrix& train) -> std::unique_ptr<Model> {
            return std::make_unique<MajorityModel>(fit_majority(train.targets, train.columns));
        };
    }
    if (model_name == "forest") {
        ForestConfig fc;
        fc.trees = config.trees;
        fc.mtry = config.mtry;
        fc.max_depth = config.max_depth;
        fc.seed = model_seed;
        return [fc](const DesignMatrix& train) -> std::unique_ptr<Model> {
            return std::make_unique<ForestModel>(fit_forest(train, fc));
        };
    }
    if (model_name == "svm") {
        SmoConfig sc;
        sc.C = config.svm_c;
        if (config.svm_kernel == "linear") {
            sc.kernel.type = KernelSpec::Type::Linear;
        } else if (config.svm_kernel == "rbf") {
            sc.kernel.type = KernelSpec::Type::Rbf;
            sc.kernel.gamma = config.svm_gamma;
        } else {
            throw UsageError("unknown svm kernel '" + config.svm_kernel + "'");
        }
        sc.seed = model_seed;
        return [sc](const DesignMatrix& train) -> std::unique_ptr<Model> {
            return std::make_unique<MultiSvm>(fit_svm_multiclass(train, sc));
        };
    }
    if (model_name == "mlp") {
        MlpConfig mc;
        mc.hidden = config.mlp_hidden;
        mc.rate = config.mlp_rate;
        mc.momentum = config.mlp_momentum;
        mc.epochs = config.mlp_epochs;
        mc.seed = model_seed;
        return [mc](const DesignMatrix& train) -> std::unique_ptr<Model> {
            return std::make_unique<MlpModel>(fit_mlp(train, mc));
        };
    }
    throw UsageError("unknown model '" + model_name + "'");
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

std::string metadata_csv(const HarnessConfig& config, const PreparedData& data,
                         const std::string& experiment) {
    std::ostringstream out;
    out << "key,value\n";
    out << "experiment," << experiment << "\n";
    out << "seed," << config.seed << "\n";
    out << "config_hash," << hex64(config.config_hash) << "\n";
    out << "rows_before_filter," << data.rows_before_filter << "\n";
    out << "rows_removed," << data.removed << "\n";
    out << "rows," << data.table.row_count() << "\n";
    out << "kept_variables," << join(data.kept, ";") << "\n";
    out << "pruned_variables," << join(data.pruned, ";") << "\n";
    return out.str();
}

std::string summary_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "model,train_rows,test_rows,accuracy_percent,weighted_auc\n";
    for (const auto& r : reports) {
        out << r.model_name << "," << r.n_train << "," << r.n_test << "," << r.accuracy << ",";
        if (r.weighted) out << *r.weighted;
        out << "\n";
    }
    return out.str();
}

}  // namespace

void write_bundle(const ReportBundle& bundle, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, content] : bundle.artifacts) {
        std::filesystem::path path = std::filesystem::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path.string());
        out << content;
    }
}

ReportBundle run_ingest(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    DesignMatrix matrix = build_matrix(data, config);
    Scores dist = class_distribution(matrix.targets);

    std::ostringstream summary;
    summary << "key,value\n";
    summary << "individuals," << data.rows_before_filter / std::max<std::size_t>(1, data.codebook.repeated_years().size()) << "\n";
    summary << "rows_unrolled," << data.rows_before_filter << "\n";
    summary << "rows_removed_invalid_target," << data.removed << "\n";
    summary << "rows_final," << data.table.row_count() << "\n";
    for (int y : data.table.years_present()) {
        std::size_t n = 0;
        for (const auto& r : data.table.rows) n += r.year == y;
        summary << "rows_year_" << y << "," << n << "\n";
    }
    for (int k = 0; k < kNumClasses; ++k) {
        summary << "class_" << (k + 1) << "_share," << dist[static_cast<std::size_t>(k)] << "\n";
    }
    for (const auto& [var, n] : data.uncovered) {
        summary << "recode_uncovered_" << var << "," << n << "\n";
    }
    summary << "design_columns," << matrix.n_cols() << "\n";

    ReportBundle bundle;
    bundle.artifacts.emplace_back("dataset_summary.csv", summary.str());
    bundle.artifacts.emplace_back("design_matrix.csv", matrix.to_csv());
    bundle.artifacts.emplace_back("run_metadata.csv", metadata_csv(config, data, "ingest"));
    return bundle;
}

ReportBundle run_explore(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    std::ostringstream pruning;
    pruning << "variable,kept\n";
    for (const auto& v : data.kept) pruning << v << ",1\n";
    for (const auto& v : data.pruned) pruning << v << ",0\n";

    ReportBundle bundle;
    bundle.artifacts.emplace_back("correlations.csv", data.correlations.to_csv());
    bundle.artifacts.emplace_back("pruning.csv", pruning.str());
    bundle.artifacts.emplace_back("run_metadata.csv", metadata_csv(config, data, "explore"));
    return bundle;
}

ReportBundle run_baseline(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    DesignMatrix matrix = build_matrix(data, config);
    EvalReport report = evaluate(make_trainer(config, "majority"), matrix, config.split_spec(),
                                 "majority baseline");
    bool auc_defaulted = false;
    if (!report.weighted) {
        // Degenerate test side (single class): report chance level.
        report.weighted = 0.5;
        auc_defaulted = true;
    }

    ReportBundle bundle;
    bundle.reports.push_back(report);
    bundle.markdown = eval_markdown_table(bundle.reports);
    std::string meta = metadata_csv(config, data, "baseline");
    if (auc_defaulted) meta += "weighted_auc_defaulted,1\n";
    bundle.artifacts.emplace_back("baseline_report.csv", report.to_csv());
    bundle.artifacts.emplace_back("baseline_table.md", bundle.markdown);
    bundle.artifacts.emplace_back("run_metadata.csv", meta);
    return bundle;
}

ReportBundle run_model_comparison(const HarnessConfig& config) {
    if (config.compare_models.empty()) throw UsageError("compare: no models listed");
    PreparedData data = prepare_data(config);
    DesignMatrix matrix = build_matrix(data, config);

    ReportBundle bundle;
    for (const auto& name : config.compare_models) {
        bundle.reports.push_back(evaluate(make_trainer(config, name), matrix, config.split_spec(), name));
    }
    bundle.markdown = eval_markdown_table(bundle.reports);
    bundle.artifacts.emplace_back("compare_table.md", bundle.markdown);
    bundle.artifacts.emplace_back("compare_summary.csv", summary_csv(bundle.reports));
    for (const auto& r : bundle.reports) {
        bundle.artifacts.emplace_back("compare_" + r.model_name + "_report.csv", r.to_csv());
    }
    bundle.artifacts.emplace_back("run_metadata.csv", metadata_csv(config, data, "compare"));
    return bundle;
}

ReportBundle run_longitudinal_compare(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    std::vector<int> years = data.table.years_present();
    if (years.size() < 2) throw DataError("longitudinal: data spans fewer than 2 years");

    LongTable latest = filter_year(data.table, years.back());
    std::size_t n_years = years.size();
    std::size_t size = (latest.row_count() / n_years) * n_years;
    if (size == 0) throw DataError("longitudinal: not enough rows for equal-size tasks");

    // Equal entry counts: the single-year task is subsampled to the same
    // size as the balanced multi-year task.
    std::uint64_t seed1 = substream(config.seed, "task1")();
    std::uint64_t seed2 = substream(config.seed, "task2")();
    LongTable task1 = balanced_year_sample(latest, size, seed1);
    LongTable task2 = balanced_year_sample(data.table, size, seed2);

    Trainer trainer = make_trainer(config, config.model);
    DesignMatrix m1 = encode_design_matrix(task1, data.kept, config.one_hot, config.missing_level);
    DesignMatrix m2 = encode_design_matrix(task2, data.kept, config.one_hot, config.missing_level);

    ReportBundle bundle;
    bundle.reports.push_back(evaluate(trainer, m1, config.split_spec(),
                                      "single-year (" + std::to_string(years.back()) + ")"));
    bundle.reports.push_back(evaluate(trainer, m2, config.split_spec(), "multi-year balanced"));
    bundle.markdown = eval_markdown_table(bundle.reports);
    bundle.artifacts.emplace_back("longitudinal_table.md", bundle.markdown);
    bundle.artifacts.emplace_back("longitudinal_summary.csv", summary_csv(bundle.reports));
    std::string meta = metadata_csv(config, data, "longitudinal");
    meta += "task_rows," + std::to_string(size) + "\n";
    bundle.artifacts.emplace_back("run_metadata.csv", meta);
    return bundle;
}

ReportBundle run_ablation(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    if (data.kept.size() < 2) throw DataError("ablation: need at least 2 features");
    DesignMatrix matrix = build_matrix(data, config);
    Trainer trainer = make_trainer(config, config.model);
    SplitSpec spec = config.split_spec();

    ReportBundle bundle;
    // Row count never changes, so the seeded split assigns identical
    // train/test membership to every experiment.
    bundle.reports.push_back(evaluate(trainer, matrix, spec, "all features"));
    for (const auto& variable : data.kept) {
        bundle.reports.push_back(
            evaluate(trainer, matrix.without_variable(variable), spec, "without " + variable));
    }
    bundle.markdown = eval_markdown_table(bundle.reports);
    bundle.artifacts.emplace_back("ablation_table.md", bundle.markdown);
    bundle.artifacts.emplace_back("ablation_summary.csv", summary_csv(bundle.reports));
    bundle.artifacts.emplace_back("run_metadata.csv", metadata_csv(config, data, "ablate"));
    return bundle;
}

ReportBundle run_explain(const HarnessConfig& config) {
    PreparedData data = prepare_data(config);
    DesignMatrix matrix = build_matrix(data, config);
    Split split = percentage_split(matrix, config.split_spec());
    DesignMatrix train = matrix.subset(split.train);
    DesignMatrix test = matrix.subset(split.test);
    std::unique_ptr<Model> model = make_trainer(config, config.model)(train);

    std::size_t n_explain = std::min(config.explain_rows, test.n_rows);
    const auto* forest = dynamic_cast<const ForestModel*>(model.get());

    // Model-agnostic fallback operates on mean-imputed rows.
    ImputationPlan fill = make_imputation_plan(train, /*scale=*/false);
    std::vector<std::vector<double>> background;
    for (std::size_t r = 0; r < std::min(config.shap_background, train.n_rows); ++r) {
        background.push_back(fill.apply(train.row(r), train.row_missing(r)));
    }

    // Attributions are reported for the predicted class of each
    // instance; rows come from the test side.
    ShapMatrix sm;
    sm.names = source_variables(matrix.columns);
    std::vector<std::vector<Cell>> feature_values;

    std::map<std::pair<std::int64_t, int>, std::size_t> long_index;
    for (std::size_t r = 0; r < data.table.rows.size(); ++r) {
        long_index[{data.table.rows[r].id, data.table.rows[r].year}] = r;
    }
    std::vector<int> feature_cols;
    for (const auto& name : sm.names) feature_cols.push_back(data.table.col_of(name));

    for (std::size_t r = 0; r < n_explain; ++r) {
        auto [id, year] = test.row_ids[r];
        std::int64_t instance = id * 10000 + year;
        int cls = model->predict(test.row(r), test.row_missing(r)).first;

        ShapRow encoded;
        if (forest) {
            encoded = tree_shap(*forest, test.row(r), test.row_missing(r), cls, instance);
        } else {
            ScoreFn fn = [&](std::span<const double> x) {
                return model->score(x, {})[static_cast<std::size_t>(cls - 1)];
            };
            std::vector<double> x = fill.apply(test.row(r), test.row_missing(r));
            encoded = sampling_shap(fn, x, background, config.shap_samples,
                                    substream(config.seed, "shap", static_cast<std::uint64_t>(r))());
            encoded.target_class = cls;
            encoded.instance_id = instance;
        }
        ShapRow agg = aggregate_onehot(encoded, matrix.columns);
        sm.rows.push_back(std::move(agg));

        const LongRow& source = data.table.rows.at(long_index.at({id, year}));
        std::vector<Cell> cells;
        for (int c : feature_cols) cells.push_back(source.cells[static_cast<std::size_t>(c)]);
        feature_values.push_back(std::move(cells));
    }
    if (sm.rows.empty()) throw DataError("explain: empty test side");

    FeatureRanking ranking = mean_abs_ranking(sm);
    ReportBundle bundle;
    bundle.artifacts.emplace_back("shap_summary.csv", shap_summary_export(sm, feature_values));
    bundle.artifacts.emplace_back("shap_ranking.csv", ranking.to_csv());
    std::string meta = metadata_csv(config, data, "explain");
    meta += "explained_rows," + std::to_string(sm.rows.size()) + "\n";
    meta += "attribution_method," + std::string(forest ? "tree_path_exact" : "permutation_sampling") + "\n";
    meta += "attribution_target,predicted_class_score\n";
    bundle.artifacts.emplace_back("run_metadata.csv", meta);
    return bundle;
}

}  // namespace panelml
