#include "xaiaug_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "xaiaug/attribution.hpp"
#include "xaiaug/data_redistribution.hpp"
#include "xaiaug/errors.hpp"
#include "xaiaug/harness.hpp"
#include "xaiaug/model_augment.hpp"
#include "xaiaug/network_io.hpp"
#include "xaiaug/rng.hpp"
#include "xaiaug/toy_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace xaiaug::cli {

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("no manifest in " + dir.string());
    return json::parse(in);
}

namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

template <typename T>
T parse_env(const std::string& name, const std::string& value) {
    T out{};
    std::istringstream is(value);
    if (!(is >> out) || !is.eof()) throw UsageError("cannot parse " + name + "='" + value + "'");
    return out;
}

/// Collects everything a command reads and writes, then writes the one
/// manifest for the invocation.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> args)
        : command_(std::move(command)), args_(std::move(args)),
          started_(std::chrono::system_clock::now()), clock_(std::chrono::steady_clock::now()) {}

    void set_out(fs::path dir) { out_ = std::move(dir); }
    const fs::path& out() const { return out_; }

    void add_input(const fs::path& path) {
        inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
    }

    /// Writes `content` to out/rel and records its hash.
    void write_output(const fs::path& rel, const std::string& content) {
        const fs::path path = out_ / rel;
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path.string());
        f << content;
        f.close();
        if (!f) throw IoError("write failed: " + path.string());
        outputs_.push_back({{"path", rel.generic_string()}, {"sha256", sha256_hex(content)}});
    }

    void note_env(const std::string& name, const std::string& value) { env_[name] = value; }

    json config = json::object();
    std::vector<std::uint64_t> seeds;

    void finish(int exit_code, const std::string& error) {
        if (out_.empty()) return;
        const auto finished = std::chrono::system_clock::now();
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
        json doc = {
            {"tool", "xaiaug"},
            {"version", XAIAUG_VERSION},
            {"command", command_},
            {"args", args_},
            {"status", exit_code == 0 ? "ok" : "error"},
            {"exit_code", exit_code},
            {"config", config},
            {"seeds", seeds},
            {"environment", env_},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"started_at", utc_timestamp(started_)},
            {"finished_at", utc_timestamp(finished)},
            {"wall_clock_seconds", wall},
        };
        if (!error.empty()) doc["error"] = error;
        std::error_code ec;
        fs::create_directories(out_, ec);
        std::ofstream f(out_ / "manifest.json");
        if (f) f << doc.dump(2) << '\n';
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    std::chrono::system_clock::time_point started_;
    std::chrono::steady_clock::time_point clock_;
    fs::path out_;
    json inputs_ = json::array();
    json outputs_ = json::array();
    json env_ = json::object();
};

/// Flag > environment > config > default for one scalar setting.
class Resolver {
public:
    Resolver(const EnvLookup& env, Manifest& manifest) : env_(env), manifest_(manifest) {}

    template <typename T>
    std::optional<T> env(const std::string& key) {
        const std::string name = std::string(kEnvPrefix) + key;
        auto v = env_(name);
        if (!v) return std::nullopt;
        manifest_.note_env(name, *v);
        if constexpr (std::is_same_v<T, std::string>) {
            return *v;
        } else {
            return parse_env<T>(name, *v);
        }
    }

private:
    const EnvLookup& env_;
    Manifest& manifest_;
};

/// Seeds from a start and a count; either may be absent.
std::vector<std::uint64_t> resolve_seeds(std::vector<std::uint64_t> preset_seeds,
                                         std::optional<std::uint64_t> start,
                                         std::optional<std::size_t> count) {
    if (count && *count == 0) throw UsageError("--seeds must be at least 1");
    if (!start && !count) return preset_seeds;
    const std::uint64_t first = start ? *start : (preset_seeds.empty() ? 0 : preset_seeds.front());
    const std::size_t n = count ? *count : 1;
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = first + i;
    return seeds;
}

std::string shape(const LabeledDataset& d) {
    return std::to_string(d.size()) + "x" + std::to_string(d.dims());
}

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> jobs;
    std::optional<std::string> config;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "Run seed (first seed with --seeds)");
    cmd->add_option("--seeds", f.seeds, "Number of consecutive seeds");
    cmd->add_option("--jobs", f.jobs, "Parallel seeds (0 = hardware threads)");
    cmd->add_option("--config", f.config, "JSON config file");
    cmd->add_option("--out", f.out, "Output directory");
}

struct Common {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seeds;
    std::size_t jobs = 1;
    std::optional<fs::path> config;
    fs::path out = ".";
};

Common resolve_common(const CommonFlags& f, Resolver& r) {
    Common c;
    c.seed = f.seed ? f.seed : r.env<std::uint64_t>("SEED");
    c.seeds = f.seeds ? f.seeds : r.env<std::size_t>("SEEDS");
    if (auto j = f.jobs ? f.jobs : r.env<std::size_t>("JOBS")) c.jobs = *j;
    if (auto p = f.config ? f.config : r.env<std::string>("CONFIG")) c.config = fs::path(*p);
    if (auto o = f.out ? f.out : r.env<std::string>("OUT")) c.out = *o;
    return c;
}

ExperimentConfig experiment_config(ExperimentId id, const Common& c, Manifest& m) {
    ExperimentConfig cfg = preset(id);
    if (c.config) {
        m.add_input(*c.config);
        cfg = apply_config_json(cfg, read_json_file(*c.config));
    }
    return cfg;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    std::string experiment;
};

int cmd_gen_data(const GenDataArgs& a, const CommonFlags& flags, Resolver& r, Manifest& m,
                 std::ostream& out) {
    const Common c = resolve_common(flags, r);
    m.set_out(c.out);
    const ExperimentId id = experiment_id_from_string(a.experiment);
    if (id == ExperimentId::custom) throw UsageError("gen-data has no generator for 'custom'");
    ExperimentConfig cfg = experiment_config(id, c, m);
    cfg.seeds = resolve_seeds(cfg.seeds, c.seed, c.seeds);
    if (!c.seed && !c.seeds) cfg.seeds = {cfg.seeds.front()};
    m.config = to_json(cfg);
    m.seeds = cfg.seeds;
    for (const auto seed : cfg.seeds) {
        const TrainTestSplit data = experiment_data(cfg, seed);
        const std::string stem = a.experiment + "_seed" + std::to_string(seed);
        m.write_output(stem + "_train.csv", dataset_to_csv(data.train));
        m.write_output(stem + "_test.csv", dataset_to_csv(data.test));
        out << stem << ": train " << shape(data.train) << ", test " << shape(data.test) << '\n';
    }
    return 0;
}

// --------------------------------------------------------------------- run

struct RunArgs {
    std::string experiment;
    std::optional<std::string> augment;
    std::optional<std::size_t> iterations;
    std::optional<std::string> train_csv;
    std::optional<std::string> test_csv;
    bool sweep = false;
    bool no_attributions = false;
};

struct Variant {
    std::string name;
    ExperimentConfig config;
};

std::vector<Variant> sweep_variants(const ExperimentConfig& base) {
    auto with = [&](AugmentationFamily f) {
        ExperimentConfig c = base;
        c.augmentation.family = f;
        return c;
    };
    switch (base.id) {
        case ExperimentId::toy1:
            return {{"none", with(AugmentationFamily::none)},
                    {"attention_mask", with(AugmentationFamily::attention_mask)}};
        case ExperimentId::toy2:
            return {{"none", with(AugmentationFamily::none)},
                    {"xai_dropout", with(AugmentationFamily::xai_dropout)},
                    {"random_dropout", with(AugmentationFamily::random_dropout)}};
        case ExperimentId::toy3:
            return {{"none", with(AugmentationFamily::none)}, {"rrr_loss", with(AugmentationFamily::rrr_loss)}};
        case ExperimentId::equality: {
            std::vector<Variant> v{{"baseline", with(AugmentationFamily::none)}};
            auto redistribute = [&](MetricKind metric, bool higher) {
                ExperimentConfig c = with(AugmentationFamily::data_redistribution);
                c.augmentation.metric = metric;
                c.augmentation.higher_metric_gets_more = higher;
                return c;
            };
            v.push_back({"inverse_frequency", redistribute(MetricKind::inverse_frequency, true)});
            v.push_back({"entropy_higher_more", redistribute(MetricKind::entropy, true)});
            v.push_back({"entropy_higher_less", redistribute(MetricKind::entropy, false)});
            v.push_back({"mse_higher_more", redistribute(MetricKind::mse_distance, true)});
            v.push_back({"mse_higher_less", redistribute(MetricKind::mse_distance, false)});
            return v;
        }
        case ExperimentId::custom:
            break;
    }
    throw UsageError("--sweep is not defined for 'custom'");
}

GridSpec grid_around(const LabeledDataset& d) {
    GridSpec g;
    double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double hi[2] = {-lo[0], -lo[1]};
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            lo[k] = std::min(lo[k], d.features(i, k));
            hi[k] = std::max(hi[k], d.features(i, k));
        }
    }
    g.x_min = lo[0] - 0.5;
    g.x_max = hi[0] + 0.5;
    g.y_min = lo[1] - 0.5;
    g.y_max = hi[1] + 0.5;
    return g;
}

struct VariantSummary {
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::optional<double> balance;
};

VariantSummary write_run(const ExperimentConfig& cfg, const RunOptions& options, const fs::path& prefix,
                         Manifest& m, std::ostream& out, const std::string& label) {
    const auto logs = run_experiment(cfg, options);
    VariantSummary s;
    for (const auto& log : logs) {
        const std::string k = std::to_string(log.seed);
        m.write_output(prefix / ("metrics_seed" + k + ".csv"), metrics_to_csv(log));
        if (!log.miniepochs.empty()) {
            m.write_output(prefix / ("miniepochs_seed" + k + ".csv"), miniepochs_to_csv(log));
        }
        m.write_output(prefix / ("model_seed" + k + ".json"), dump_network(log.final_network) + "\n");
        if (log.prune_report) {
            m.write_output(prefix / ("prune_seed" + k + ".json"), log.prune_report->dump(2) + "\n");
        }
        if (log.dims == 2) {
            const auto data = experiment_data(cfg, log.seed);
            m.write_output(prefix / ("boundary_seed" + k + ".csv"),
                           boundary_to_csv(decision_boundary(log.final_network, grid_around(data.train))));
        }
        const auto& last = log.final_row(Split::test);
        s.test_accuracy += last.accuracy / static_cast<double>(logs.size());
        s.test_loss += last.loss / static_cast<double>(logs.size());
    }
    m.write_output(prefix / "aggregate.csv", aggregate_to_csv(aggregate_seeds(logs)));
    if (!logs.front().miniepochs.empty()) {
        const std::size_t tail = std::min<std::size_t>(10, logs.front().miniepochs.size());
        double b = 0.0;
        for (const auto& log : logs) b += mean_final_balance(log, tail) / static_cast<double>(logs.size());
        s.balance = b;
    }
    out << label << ": " << logs.size() << " seed(s), final test accuracy " << format_double(s.test_accuracy)
        << ", loss " << format_double(s.test_loss);
    if (s.balance) out << ", balance " << (std::isinf(*s.balance) ? "balanced" : format_double(*s.balance));
    out << '\n';
    return s;
}

int cmd_run(const RunArgs& a, const CommonFlags& flags, Resolver& r, Manifest& m, std::ostream& out) {
    const Common c = resolve_common(flags, r);
    m.set_out(c.out);
    const ExperimentId id = experiment_id_from_string(a.experiment);
    const auto augment = a.augment ? a.augment : r.env<std::string>("AUGMENT");
    if (a.sweep && augment) throw UsageError("--sweep and --augment are mutually exclusive");
    ExperimentConfig cfg = experiment_config(id, c, m);
    if (augment) cfg.augmentation.family = augmentation_family_from_string(*augment);
    if (auto t = a.iterations ? a.iterations : r.env<std::size_t>("ITERATIONS")) {
        if (*t == 0) throw UsageError("--iterations must be positive");
        cfg.train.iterations = *t;
    }
    if (a.train_csv) cfg.train_csv = *a.train_csv;
    if (a.test_csv) cfg.test_csv = *a.test_csv;
    if (id == ExperimentId::custom) {
        if (cfg.train_csv.empty() || cfg.test_csv.empty()) {
            throw UsageError("custom experiments need --train and --test");
        }
        m.add_input(cfg.train_csv);
        m.add_input(cfg.test_csv);
    } else if (a.train_csv || a.test_csv) {
        throw UsageError("--train/--test only apply to the custom experiment");
    }
    cfg.seeds = resolve_seeds(cfg.seeds, c.seed, c.seeds);

    RunOptions options;
    options.jobs = c.jobs;
    options.log_attributions = !a.no_attributions;
    m.seeds = cfg.seeds;

    if (!a.sweep) {
        cfg.validate();
        m.config = to_json(cfg);
        write_run(cfg, options, {}, m, out, a.experiment + "/" + to_string(cfg.augmentation.family));
        return 0;
    }
    const auto variants = sweep_variants(cfg);
    m.config = json::object();
    for (const auto& v : variants) {
        v.config.validate();
        m.config[v.name] = to_json(v.config);
    }
    std::ostringstream summary;
    summary << "variant,final_test_accuracy,final_test_loss,final_balance\n";
    for (const auto& v : variants) {
        const auto s = write_run(v.config, options, v.name, m, out, a.experiment + "/" + v.name);
        summary << v.name << ',' << format_double(s.test_accuracy) << ',' << format_double(s.test_loss) << ',';
        if (s.balance) summary << (std::isinf(*s.balance) ? "balanced" : format_double(*s.balance));
        summary << '\n';
    }
    m.write_output("summary.csv", summary.str());
    return 0;
}

// ----------------------------------------------------------------- explain

struct ExplainArgs {
    std::optional<std::string> model;
    std::optional<std::string> data;
    std::optional<std::string> method;
    std::optional<double> epsilon;
    std::optional<std::string> rule;
    std::optional<std::size_t> layer;
    std::optional<std::string> target;
    std::optional<std::string> normalize;
};

/// Value from the flag, else from the command's config document.
template <typename T>
std::optional<T> flag_or_config(const std::optional<T>& flag, const json& cfg, const char* key) {
    if (flag) return flag;
    if (cfg.contains(key)) {
        try {
            return cfg.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    }
    return std::nullopt;
}

json command_config(const Common& c, Manifest& m, const std::vector<std::string>& allowed) {
    if (!c.config) return json::object();
    m.add_input(*c.config);
    json doc = read_json_file(*c.config);
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    return doc;
}

AttributionTarget parse_target(const std::string& s) {
    if (s == "true") return AttributionTarget::true_class();
    if (s == "predicted") return AttributionTarget::predicted();
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw UsageError("--target must be 'true', 'predicted' or a class index");
    return AttributionTarget::explicit_class(v);
}

int cmd_explain(const ExplainArgs& flags_in, const CommonFlags& flags, Resolver& r, Manifest& m,
                std::ostream& out) {
    const Common c = resolve_common(flags, r);
    m.set_out(c.out);
    const json cfg = command_config(c, m, {"model", "data", "method", "epsilon", "rule", "layer", "target", "normalize"});
    const auto model = flag_or_config(flags_in.model, cfg, "model");
    const auto data_path = flag_or_config(flags_in.data, cfg, "data");
    if (!model || !data_path) throw UsageError("explain needs --model and --data");
    const std::string method_name = flag_or_config(flags_in.method, cfg, "method").value_or("lrp");
    const double epsilon = flag_or_config(flags_in.epsilon, cfg, "epsilon").value_or(kDefaultLrpEpsilon);
    const std::string rule = flag_or_config(flags_in.rule, cfg, "rule").value_or("epsilon");
    const std::size_t layer = flag_or_config(flags_in.layer, cfg, "layer").value_or(0);
    const std::string target = flag_or_config(flags_in.target, cfg, "target").value_or("true");
    const std::string normalize = flag_or_config(flags_in.normalize, cfg, "normalize").value_or("none");

    m.add_input(*model);
    m.add_input(*data_path);
    const DenseNetwork net = load_network(*model);
    const LabeledDataset data = read_dataset_csv(*data_path);
    if (data.dims() != net.input_dim()) {
        throw ConsistencyError("model expects " + std::to_string(net.input_dim()) + " inputs but " +
                               *data_path + " has " + std::to_string(data.dims()) + " columns");
    }
    if (layer >= net.layer_count()) {
        throw UsageError("--layer must be below " + std::to_string(net.layer_count()));
    }
    if (normalize != "none" && normalize != "signed" && normalize != "abs") {
        throw UsageError("--normalize must be none, signed or abs");
    }

    AttributionMethod method = AttributionMethod::of_kind(attribution_kind_from_string(method_name), parse_target(target));
    if (method.kind == AttributionKind::lrp) {
        if (rule == "epsilon") {
            method.default_rule = LrpRule::eps(epsilon);
        } else if (rule == "zplus") {
            method.default_rule = LrpRule::zplus();
        } else {
            throw UsageError("--rule must be epsilon or zplus");
        }
    } else if (flags_in.rule || flags_in.epsilon) {
        throw UsageError("--rule/--epsilon only apply to --method lrp");
    }
    method.validate();

    m.config = {{"method", method_name}, {"rule", rule},        {"epsilon", epsilon},
                {"layer", layer},        {"target", target},    {"normalize", normalize}};

    const ForwardTrace trace = forward(net, data.features);
    const RelevanceMaps maps = explain(net, trace, data.labels, method);
    Matrix rel = maps.at_input(layer);
    if (normalize == "signed") rel = normalize_signed(rel);
    if (normalize == "abs") rel = normalize_abs(rel);

    std::ostringstream csv;
    csv << "sample,label,target";
    for (std::size_t j = 0; j < rel.cols(); ++j) csv << ",r_" << j;
    csv << '\n';
    for (std::size_t i = 0; i < rel.rows(); ++i) {
        csv << i << ',' << data.labels[i] << ',' << maps.targets[i];
        for (std::size_t j = 0; j < rel.cols(); ++j) {
            if (!std::isfinite(rel(i, j))) throw NumericError("non-finite relevance at sample " + std::to_string(i));
            csv << ',' << format_double(rel(i, j));
        }
        csv << '\n';
    }
    m.write_output("relevance.csv", csv.str());
    out << "relevance " << rel.rows() << "x" << rel.cols() << " at the input of layer " << layer << '\n';
    return 0;
}

// ------------------------------------------------------------------- prune

struct PruneArgs {
    std::optional<std::string> model;
    std::optional<std::string> data;
    std::optional<std::size_t> count;
    std::optional<double> fraction;
    bool random = false;
    bool signed_scores = false;
    std::optional<std::size_t> finetune;
    std::optional<std::string> train;
    std::optional<std::string> test;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<double> momentum;
};

int cmd_prune(const PruneArgs& a, const CommonFlags& flags, Resolver& r, Manifest& m, std::ostream& out) {
    const Common c = resolve_common(flags, r);
    m.set_out(c.out);
    const json cfg = command_config(c, m, {"model", "data", "count", "fraction", "random", "signed", "finetune",
                                           "train", "test", "lr", "batch", "momentum"});
    const auto model = flag_or_config(a.model, cfg, "model");
    const auto data_path = flag_or_config(a.data, cfg, "data");
    if (!model || !data_path) throw UsageError("prune needs --model and --data");
    const auto count = flag_or_config(a.count, cfg, "count");
    const auto fraction = flag_or_config(a.fraction, cfg, "fraction");
    if (count && fraction) throw UsageError("--count and --fraction are mutually exclusive");
    if (!count && !fraction) throw UsageError("prune needs --count or --fraction");
    const bool random = a.random || cfg.value("random", false);
    const bool signed_scores = a.signed_scores || cfg.value("signed", false);
    const std::size_t finetune = flag_or_config(a.finetune, cfg, "finetune").value_or(0);
    const auto train_path = flag_or_config(a.train, cfg, "train");
    const auto test_path = flag_or_config(a.test, cfg, "test");
    const double lr = flag_or_config(a.lr, cfg, "lr").value_or(0.01);
    const std::size_t batch = flag_or_config(a.batch, cfg, "batch").value_or(32);
    const double momentum = flag_or_config(a.momentum, cfg, "momentum").value_or(0.9);
    if (finetune > 0 && !train_path) throw UsageError("--finetune needs --train");
    const std::uint64_t seed = c.seed.value_or(0);

    m.add_input(*model);
    m.add_input(*data_path);
    const DenseNetwork net = load_network(*model);
    const LabeledDataset refs = read_dataset_csv(*data_path);
    if (refs.dims() != net.input_dim()) {
        throw ConsistencyError("reference data has " + std::to_string(refs.dims()) + " columns, model expects " +
                               std::to_string(net.input_dim()));
    }
    std::optional<LabeledDataset> test;
    if (test_path) {
        m.add_input(*test_path);
        test = read_dataset_csv(*test_path);
        if (test->dims() != net.input_dim()) throw ConsistencyError("test data does not match the model input");
    }
    std::optional<LabeledDataset> train;
    if (train_path) {
        m.add_input(*train_path);
        train = read_dataset_csv(*train_path);
        if (train->dims() != net.input_dim()) throw ConsistencyError("train data does not match the model input");
    }

    std::vector<std::size_t> counts;
    if (count) {
        counts.assign(net.layer_count() - 1, *count);
    } else {
        if (!(*fraction >= 0.0 && *fraction < 1.0)) throw ConfigError("--fraction must be in [0, 1)");
        counts = prune_counts(net, *fraction);
    }

    m.seeds = {seed};
    m.config = {{"count", count ? json(*count) : json(nullptr)},
                {"fraction", fraction ? json(*fraction) : json(nullptr)},
                {"random", random},
                {"signed", signed_scores},
                {"finetune", finetune},
                {"lr", lr},
                {"batch", batch},
                {"momentum", momentum},
                {"seed", seed},
                {"counts_per_layer", counts}};

    NeuronImportance importance;
    if (random) {
        Rng rng = make_rng(seed, Stream::augmentation);
        importance = random_importance(net, rng);
    } else {
        importance = neuron_importance(net, refs, AttributionMethod::lrp_epsilon(), !signed_scores);
    }
    PruneResult result = prune_neurons(net, importance, counts);

    const LabeledDataset& eval_set = test ? *test : refs;
    json report = result.report();
    report["criterion"] = random ? "random" : (signed_scores ? "relevance_signed" : "relevance_abs");
    report["evaluated_on"] = test ? "test" : "references";
    report["accuracy_before"] = evaluate(net, eval_set);
    report["accuracy_after_prune"] = evaluate(result.network, eval_set);

    if (finetune > 0) {
        TrainConfig tc;
        tc.iterations = finetune;
        tc.batch_size = std::min(batch, train->size());
        tc.learning_rate = lr;
        tc.momentum = momentum;
        tc.seed = seed;
        tc.validate();
        BatchSampler sampler(train->size(), tc.batch_size, make_rng(seed, Stream::training));
        MomentumState state;
        for (std::size_t t = 0; t < finetune; ++t) {
            const LabeledDataset b = train->subset(sampler.next());
            const ForwardTrace trace = forward(result.network, b.features);
            sgd_momentum_step(result.network, backward(result.network, trace, b.labels), state, lr, momentum);
        }
        report["finetune_iterations"] = finetune;
        report["accuracy_after_finetune"] = evaluate(result.network, eval_set);
    }
    report["accuracy_delta"] = report.value("accuracy_after_finetune", report["accuracy_after_prune"].get<double>()) -
                               report["accuracy_before"].get<double>();

    m.write_output("model.json", dump_network(result.network) + "\n");
    m.write_output("report.json", report.dump(2) + "\n");
    out << "pruned";
    for (std::size_t h = 0; h < counts.size(); ++h) out << (h ? ", " : " ") << counts[h];
    out << " unit(s) per hidden layer; accuracy " << format_double(report["accuracy_before"].get<double>())
        << " -> " << format_double(report["accuracy_before"].get<double>() + report["accuracy_delta"].get<double>())
        << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"XAI-based model improvement: training, explanation and pruning on toy data", "xaiaug"};
    app.require_subcommand(1);
    app.set_version_flag("--version", XAIAUG_VERSION);

    CommonFlags common;
    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write train/test CSVs of an experiment");
    gen_cmd->add_option("experiment", gen.experiment, "toy1, toy2, toy3 or equality")->required();
    add_common(gen_cmd, common);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Train an experiment preset over one or more seeds");
    run_cmd->add_option("experiment", run.experiment, "toy1, toy2, toy3, equality or custom")->required();
    run_cmd->add_option("--augment", run.augment, "Augmentation family");
    run_cmd->add_option("--iterations", run.iterations, "Training iterations");
    run_cmd->add_option("--train", run.train_csv, "Training CSV (custom)");
    run_cmd->add_option("--test", run.test_csv, "Test CSV (custom)");
    run_cmd->add_flag("--sweep", run.sweep, "Run the experiment's comparison variants");
    run_cmd->add_flag("--no-attributions", run.no_attributions, "Skip per-iteration attribution logging");
    add_common(run_cmd, common);

    ExplainArgs ex;
    auto* ex_cmd = app.add_subcommand("explain", "Write per-sample relevance for a model and dataset");
    ex_cmd->add_option("--model", ex.model, "Model JSON");
    ex_cmd->add_option("--data", ex.data, "Dataset CSV");
    ex_cmd->add_option("--method", ex.method, "lrp, gradient, gradient_times_input or guided_backprop");
    ex_cmd->add_option("--epsilon", ex.epsilon, "LRP epsilon");
    ex_cmd->add_option("--rule", ex.rule, "LRP rule on every layer: epsilon or zplus");
    ex_cmd->add_option("--layer", ex.layer, "Explain the input of this dense layer");
    ex_cmd->add_option("--target", ex.target, "true, predicted or a class index");
    ex_cmd->add_option("--normalize", ex.normalize, "none, signed or abs");
    add_common(ex_cmd, common);

    PruneArgs pr;
    auto* pr_cmd = app.add_subcommand("prune", "Remove hidden units by relevance (or at random)");
    pr_cmd->add_option("--model", pr.model, "Model JSON");
    pr_cmd->add_option("--data", pr.data, "Reference CSV for relevance scores");
    auto* count_opt = pr_cmd->add_option("--count", pr.count, "Units removed per hidden layer");
    auto* frac_opt = pr_cmd->add_option("--fraction", pr.fraction, "Fraction of each hidden layer removed");
    count_opt->excludes(frac_opt);
    pr_cmd->add_flag("--random", pr.random, "Random pruning baseline");
    pr_cmd->add_flag("--signed", pr.signed_scores, "Rank by signed instead of absolute relevance");
    pr_cmd->add_option("--finetune", pr.finetune, "Fine-tuning iterations after pruning");
    pr_cmd->add_option("--train", pr.train, "Training CSV for fine-tuning");
    pr_cmd->add_option("--test", pr.test, "Evaluation CSV (defaults to the reference data)");
    pr_cmd->add_option("--lr", pr.lr, "Fine-tuning learning rate");
    pr_cmd->add_option("--batch", pr.batch, "Fine-tuning batch size");
    pr_cmd->add_option("--momentum", pr.momentum, "Fine-tuning momentum");
    add_common(pr_cmd, common);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    Manifest manifest(chosen->get_name(), args);
    Resolver resolver(env, manifest);
    int code = 0;
    std::string error;
    try {
        if (chosen == gen_cmd) code = cmd_gen_data(gen, common, resolver, manifest, out);
        if (chosen == run_cmd) code = cmd_run(run, common, resolver, manifest, out);
        if (chosen == ex_cmd) code = cmd_explain(ex, common, resolver, manifest, out);
        if (chosen == pr_cmd) code = cmd_prune(pr, common, resolver, manifest, out);
    } catch (const Error& e) {
        code = e.exit_code();
        error = e.what();
    } catch (const fs::filesystem_error& e) {
        code = 3;
        error = e.what();
    } catch (const std::exception& e) {
        code = 1;
        error = e.what();
    }
    if (!error.empty()) err << "error: " << error << '\n';
    manifest.finish(code, error);
    return code;
}

}  // namespace xaiaug::cli
