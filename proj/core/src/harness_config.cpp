#include <algorithm>
#include <set>

#include "xaiaug/harness.hpp"

namespace xaiaug {

std::string to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::toy1: return "toy1";
        case ExperimentId::toy2: return "toy2";
        case ExperimentId::toy3: return "toy3";
        case ExperimentId::equality: return "equality";
        case ExperimentId::custom: return "custom";
    }
    return "custom";
}

ExperimentId experiment_id_from_string(const std::string& name) {
    if (name == "toy1") return ExperimentId::toy1;
    if (name == "toy2") return ExperimentId::toy2;
    if (name == "toy3") return ExperimentId::toy3;
    if (name == "equality") return ExperimentId::equality;
    if (name == "custom") return ExperimentId::custom;
    throw UsageError("unknown experiment '" + name + "' (expected toy1, toy2, toy3, equality or custom)");
}

namespace {

constexpr std::pair<AugmentationFamily, const char*> kFamilyNames[] = {
    {AugmentationFamily::none, "none"},
    {AugmentationFamily::attention_mask, "attention_mask"},
    {AugmentationFamily::lrp_weighted, "lrp_weighted"},
    {AugmentationFamily::xai_dropout, "xai_dropout"},
    {AugmentationFamily::random_dropout, "random_dropout"},
    {AugmentationFamily::rrr_loss, "rrr_loss"},
    {AugmentationFamily::attribution_prior, "attribution_prior"},
    {AugmentationFamily::loss_scaling, "loss_scaling"},
    {AugmentationFamily::grad_feature_mask, "grad_feature_mask"},
    {AugmentationFamily::grad_weight_scaling, "grad_weight_scaling"},
    {AugmentationFamily::data_redistribution, "data_redistribution"},
    {AugmentationFamily::prune, "prune"},
};

}  // namespace

std::string to_string(AugmentationFamily family) {
    for (const auto& [f, name] : kFamilyNames) {
        if (f == family) return name;
    }
    return "none";
}

std::vector<std::string> augmentation_family_names() {
    std::vector<std::string> names;
    for (const auto& [f, name] : kFamilyNames) names.emplace_back(name);
    return names;
}

AugmentationFamily augmentation_family_from_string(const std::string& name) {
    if (name == "attention") return AugmentationFamily::attention_mask;
    if (name == "rrr") return AugmentationFamily::rrr_loss;
    for (const auto& [f, n] : kFamilyNames) {
        if (name == n) return f;
    }
    std::string valid;
    for (const auto& n : augmentation_family_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown augmentation family '" + name + "'; valid families: " + valid);
}

std::string to_string(Normalization n) { return n == Normalization::signed_max ? "signed_max" : "abs_max"; }

Normalization normalization_from_string(const std::string& name) {
    if (name == "signed_max") return Normalization::signed_max;
    if (name == "abs_max") return Normalization::abs_max;
    throw ConfigError("unknown normalization '" + name + "'");
}

void AugmentationSpec::validate(std::size_t layer_count, std::size_t input_dim) const {
    if (layer >= layer_count) {
        throw ConfigError("augmentation layer " + std::to_string(layer) + " but the network has " +
                          std::to_string(layer_count) + " layers");
    }
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(alpha >= 0.0 && beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
    if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) throw ConfigError("prune_fraction must lie in [0, 1)");
    switch (family) {
        case AugmentationFamily::rrr_loss:
            if (layer != 0 && ground_truth.empty()) throw ConfigError("rrr_loss needs a ground_truth mask");
            if (layer == 0 && ground_truth.size() != input_dim) {
                throw ConfigError("rrr_loss ground_truth must have one entry per input dimension");
            }
            for (double v : ground_truth) {
                if (v != 0.0 && v != 1.0) throw ConfigError("ground_truth must be binary");
            }
            break;
        case AugmentationFamily::attribution_prior:
            if (penalty != "l1" && penalty != "target_distance") throw ConfigError("unknown penalty '" + penalty + "'");
            break;
        case AugmentationFamily::loss_scaling:
            for (double f : class_factors) {
                if (!(f > 0.0)) throw ConfigError("class factors must be positive");
            }
            break;
        case AugmentationFamily::grad_feature_mask:
            if (layer == 0) throw ConfigError("grad_feature_mask needs a hidden layer (layer >= 1)");
            break;
        default: break;
    }
}

void ExperimentConfig::validate() const {
    train.validate();
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (layer_sizes.size() != activations.size() + 1) throw ConfigError("layer_sizes/activations length mismatch");
    for (std::size_t l = 0; l + 1 < activations.size(); ++l) {
        if (activations[l] == Activation::softmax) throw ConfigError("softmax is only allowed on the final layer");
    }
    if (activations.empty() || activations.back() != Activation::softmax) {
        throw ConfigError("experiments train with cross-entropy and need a softmax output layer");
    }
    attribution.validate();
    augmentation.validate(activations.size(), layer_sizes.front());
    if (miniepochs.size != 0 && miniepochs.size < train.batch_size) {
        throw ConfigError("mini-epoch size must be at least one batch");
    }
    if (augmentation.family == AugmentationFamily::data_redistribution && miniepochs.size == 0) {
        throw ConfigError("data_redistribution needs a mini-epoch size");
    }
    if (augmentation.family == AugmentationFamily::loss_scaling && augmentation.class_factors.empty() &&
        miniepochs.size == 0) {
        throw ConfigError("loss_scaling without class_factors derives them per mini-epoch and needs a mini-epoch size");
    }
    if (id == ExperimentId::custom && (train_csv.empty() || test_csv.empty())) {
        throw ConfigError("custom experiments need train_csv and test_csv");
    }
}

ExperimentConfig preset(ExperimentId id) {
    ExperimentConfig c;
    c.id = id;
    c.attribution = AttributionMethod::lrp_epsilon();
    switch (id) {
        case ExperimentId::toy1:
            c.layer_sizes = {5, 64, 32, 16, 2};
            c.activations = {Activation::relu, Activation::relu, Activation::relu, Activation::softmax};
            c.train = {500, 32, 0.01, 0.9, 0};
            c.augmentation.layer = 1;
            c.log_normalization = Normalization::signed_max;
            c.seeds = {1, 2, 3, 4, 5};
            break;
        case ExperimentId::toy2:
            c.layer_sizes = {4, 5, 2};
            c.activations = {Activation::relu, Activation::softmax};
            c.train = {200, 50, 0.01, 0.9, 0};
            // dropout acts on the units feeding the first dense layer, i.e. the
            // four input dimensions; one of them is the distractor
            c.augmentation.layer = 0;
            c.augmentation.rate = 0.25;
            c.log_normalization = Normalization::abs_max;
            c.seeds = {1, 2, 3, 4, 5};
            break;
        case ExperimentId::toy3:
            c.layer_sizes = {2, 2};
            c.activations = {Activation::softmax};
            c.train = {200, 50, 0.001, 0.9, 0};
            c.augmentation.layer = 0;
            c.augmentation.ground_truth = {1.0, 0.0};
            c.augmentation.mask_semantics = MaskSemantics::relevance_mask;
            c.augmentation.lambda = 1.0;
            c.log_normalization = Normalization::abs_max;
            c.seeds = {1, 2, 3, 4, 5};
            break;
        case ExperimentId::equality:
            c.layer_sizes = {5, 64, 32, 16, 2};
            c.activations = {Activation::relu, Activation::relu, Activation::relu, Activation::softmax};
            c.train = {400, 32, 0.01, 0.9, 0};
            c.augmentation.layer = 0;
            c.log_normalization = Normalization::abs_max;
            c.seeds = {1, 2, 3};
            c.miniepochs.size = 320;
            c.miniepochs.representatives_per_class = 5;
            break;
        case ExperimentId::custom:
            c.layer_sizes = {2, 16, 2};
            c.activations = {Activation::relu, Activation::softmax};
            c.train = {200, 32, 0.01, 0.9, 0};
            c.augmentation.layer = 1;
            break;
    }
    return c;
}

namespace {

nlohmann::json attribution_to_json(const AttributionMethod& m) {
    nlohmann::json j;
    j["kind"] = to_string(m.kind);
    auto rule_json = [](const LrpRule& r) -> nlohmann::json {
        if (r.kind == LrpRule::Kind::zplus) return {{"rule", "zplus"}};
        return {{"rule", "epsilon"}, {"epsilon", r.epsilon}};
    };
    if (m.default_rule) j["default_rule"] = rule_json(*m.default_rule);
    if (!m.lrp_rules.empty()) {
        nlohmann::json rules = nlohmann::json::object();
        for (const auto& [l, r] : m.lrp_rules) rules[std::to_string(l)] = rule_json(r);
        j["rules"] = rules;
    }
    switch (m.target.kind) {
        case AttributionTarget::Kind::true_class: j["target"] = "true_class"; break;
        case AttributionTarget::Kind::predicted_class: j["target"] = "predicted_class"; break;
        case AttributionTarget::Kind::explicit_class: j["target"] = m.target.class_index; break;
    }
    return j;
}

LrpRule rule_from_json(const nlohmann::json& j) {
    const auto name = j.at("rule").get<std::string>();
    if (name == "zplus") return LrpRule::zplus();
    if (name == "epsilon") return LrpRule::eps(j.value("epsilon", kDefaultLrpEpsilon));
    throw ConfigError("unknown LRP rule '" + name + "'");
}

AttributionMethod attribution_from_json(const nlohmann::json& j) {
    AttributionMethod m;
    m.kind = attribution_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("default_rule")) m.default_rule = rule_from_json(j["default_rule"]);
    if (j.contains("rules")) {
        for (const auto& [key, value] : j["rules"].items()) m.lrp_rules[std::stoul(key)] = rule_from_json(value);
    }
    if (m.kind == AttributionKind::lrp && !m.default_rule && m.lrp_rules.empty()) {
        m.default_rule = LrpRule::eps();
    }
    if (j.contains("target")) {
        const auto& t = j["target"];
        if (t.is_number_unsigned()) {
            m.target = AttributionTarget::explicit_class(t.get<std::size_t>());
        } else if (t.get<std::string>() == "true_class") {
            m.target = AttributionTarget::true_class();
        } else if (t.get<std::string>() == "predicted_class") {
            m.target = AttributionTarget::predicted();
        } else {
            throw ConfigError("unknown attribution target");
        }
    }
    return m;
}

nlohmann::json augmentation_to_json(const AugmentationSpec& a) {
    return {{"family", to_string(a.family)},
            {"layer", a.layer},
            {"rate", a.rate},
            {"lambda", a.lambda},
            {"alpha", a.alpha},
            {"beta", a.beta},
            {"gate_at_inference", a.gate_at_inference},
            {"ground_truth", a.ground_truth},
            {"mask_semantics", a.mask_semantics == MaskSemantics::relevance_mask ? "relevance_mask" : "irrelevance_mask"},
            {"penalty", a.penalty},
            {"penalty_target", a.penalty_target},
            {"class_factors", a.class_factors},
            {"metric", to_string(a.metric)},
            {"higher_metric_gets_more", a.higher_metric_gets_more},
            {"prune_fraction", a.prune_fraction},
            {"prune_references_per_class", a.prune_references_per_class},
            {"finetune_iterations", a.finetune_iterations},
            {"prune_signed", a.prune_signed}};
}

void apply_augmentation_json(AugmentationSpec& a, const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "family", "layer", "rate", "lambda", "alpha", "beta", "gate_at_inference", "ground_truth", "mask_semantics", "penalty",
        "penalty_target", "class_factors", "metric", "higher_metric_gets_more", "prune_fraction",
        "prune_references_per_class", "finetune_iterations", "prune_signed"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown augmentation key '" + key + "'");
    }
    if (j.contains("family")) a.family = augmentation_family_from_string(j["family"].get<std::string>());
    if (j.contains("layer")) a.layer = j["layer"].get<std::size_t>();
    if (j.contains("rate")) a.rate = j["rate"].get<double>();
    if (j.contains("lambda")) a.lambda = j["lambda"].get<double>();
    if (j.contains("alpha")) a.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) a.beta = j["beta"].get<double>();
    if (j.contains("gate_at_inference")) a.gate_at_inference = j["gate_at_inference"].get<bool>();
    if (j.contains("ground_truth")) a.ground_truth = j["ground_truth"].get<std::vector<double>>();
    if (j.contains("mask_semantics")) {
        const auto s = j["mask_semantics"].get<std::string>();
        if (s == "relevance_mask") {
            a.mask_semantics = MaskSemantics::relevance_mask;
        } else if (s == "irrelevance_mask") {
            a.mask_semantics = MaskSemantics::irrelevance_mask;
        } else {
            throw ConfigError("unknown mask_semantics '" + s + "'");
        }
    }
    if (j.contains("penalty")) a.penalty = j["penalty"].get<std::string>();
    if (j.contains("penalty_target")) a.penalty_target = j["penalty_target"].get<std::vector<double>>();
    if (j.contains("class_factors")) a.class_factors = j["class_factors"].get<std::vector<double>>();
    if (j.contains("metric")) a.metric = metric_kind_from_string(j["metric"].get<std::string>());
    if (j.contains("higher_metric_gets_more")) a.higher_metric_gets_more = j["higher_metric_gets_more"].get<bool>();
    if (j.contains("prune_fraction")) a.prune_fraction = j["prune_fraction"].get<double>();
    if (j.contains("prune_references_per_class")) {
        a.prune_references_per_class = j["prune_references_per_class"].get<std::size_t>();
    }
    if (j.contains("finetune_iterations")) a.finetune_iterations = j["finetune_iterations"].get<std::size_t>();
    if (j.contains("prune_signed")) a.prune_signed = j["prune_signed"].get<bool>();
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json acts = nlohmann::json::array();
    for (auto a : c.activations) acts.push_back(to_string(a));
    return {
        {"experiment", to_string(c.id)},
        {"augmentation", augmentation_to_json(c.augmentation)},
        {"train",
         {{"iterations", c.train.iterations},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"momentum", c.train.momentum}}},
        {"layer_sizes", c.layer_sizes},
        {"activations", acts},
        {"attribution", attribution_to_json(c.attribution)},
        {"log_normalization", to_string(c.log_normalization)},
        {"seeds", c.seeds},
        {"miniepochs", {{"size", c.miniepochs.size}, {"representatives_per_class", c.miniepochs.representatives_per_class}}},
        {"toy1",
         {{"train_size", c.toy1.train_size},
          {"test_size", c.toy1.test_size},
          {"cluster_offset", c.toy1.cluster_offset},
          {"cluster_std", c.toy1.cluster_std},
          {"noise_dims", c.toy1.noise_dims},
          {"label_noise", c.toy1.label_noise}}},
        {"toy2",
         {{"train_size", c.toy2.train_size},
          {"test_size", c.toy2.test_size},
          {"informative_offset", c.toy2.informative_offset},
          {"informative_std", c.toy2.informative_std},
          {"label_noise", c.toy2.label_noise}}},
        {"toy3",
         {{"train_size", c.toy3.train_size},
          {"test_size", c.toy3.test_size},
          {"dim0_offset", c.toy3.dim0_offset},
          {"dim0_std", c.toy3.dim0_std},
          {"dim1_low", c.toy3.dim1_low},
          {"dim1_high", c.toy3.dim1_high},
          {"dim1_split", c.toy3.dim1_split}}},
        {"equality",
         {{"train_counts", c.equality.train_counts},
          {"test_counts", c.equality.test_counts},
          {"cluster_std", c.equality.params.cluster_std},
          {"class_separation", c.equality.params.class_separation},
          {"noise_dims", c.equality.params.noise_dims}}},
        {"train_csv", c.train_csv.string()},
        {"test_csv", c.test_csv.string()},
        {"overrides", c.overrides},
    };
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j[key].get<T>();
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

}  // namespace

ExperimentConfig apply_config_json(ExperimentConfig c, const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
    check_keys(doc,
               {"experiment", "augmentation", "train", "layer_sizes", "activations", "attribution",
                "log_normalization", "seeds", "miniepochs", "toy1", "toy2", "toy3", "equality", "train_csv",
                "test_csv", "overrides"},
               "configuration");
    try {
        if (doc.contains("experiment")) {
            const auto id = experiment_id_from_string(doc["experiment"].get<std::string>());
            if (id != c.id) {
                auto overrides = c.overrides;
                c = preset(id);
                c.overrides = overrides;
            }
        }
        for (const auto& [key, value] : doc.items()) {
            if (key != "experiment" && key != "overrides" &&
                std::find(c.overrides.begin(), c.overrides.end(), key) == c.overrides.end()) {
                c.overrides.push_back(key);
            }
        }
        if (doc.contains("augmentation")) apply_augmentation_json(c.augmentation, doc["augmentation"]);
        if (doc.contains("train")) {
            const auto& t = doc["train"];
            check_keys(t, {"iterations", "batch_size", "learning_rate", "momentum"}, "train");
            take(t, "iterations", c.train.iterations);
            take(t, "batch_size", c.train.batch_size);
            take(t, "learning_rate", c.train.learning_rate);
            take(t, "momentum", c.train.momentum);
        }
        take(doc, "layer_sizes", c.layer_sizes);
        if (doc.contains("activations")) {
            c.activations.clear();
            for (const auto& a : doc["activations"]) c.activations.push_back(activation_from_string(a.get<std::string>()));
        }
        if (doc.contains("attribution")) c.attribution = attribution_from_json(doc["attribution"]);
        if (doc.contains("log_normalization")) {
            c.log_normalization = normalization_from_string(doc["log_normalization"].get<std::string>());
        }
        take(doc, "seeds", c.seeds);
        if (doc.contains("miniepochs")) {
            const auto& m = doc["miniepochs"];
            check_keys(m, {"size", "representatives_per_class"}, "miniepochs");
            take(m, "size", c.miniepochs.size);
            take(m, "representatives_per_class", c.miniepochs.representatives_per_class);
        }
        if (doc.contains("toy1")) {
            const auto& t = doc["toy1"];
            check_keys(t, {"train_size", "test_size", "cluster_offset", "cluster_std", "noise_dims", "label_noise"}, "toy1");
            take(t, "train_size", c.toy1.train_size);
            take(t, "test_size", c.toy1.test_size);
            take(t, "cluster_offset", c.toy1.cluster_offset);
            take(t, "cluster_std", c.toy1.cluster_std);
            take(t, "noise_dims", c.toy1.noise_dims);
            take(t, "label_noise", c.toy1.label_noise);
        }
        if (doc.contains("toy2")) {
            const auto& t = doc["toy2"];
            check_keys(t, {"train_size", "test_size", "informative_offset", "informative_std", "label_noise"}, "toy2");
            take(t, "train_size", c.toy2.train_size);
            take(t, "test_size", c.toy2.test_size);
            take(t, "informative_offset", c.toy2.informative_offset);
            take(t, "informative_std", c.toy2.informative_std);
            take(t, "label_noise", c.toy2.label_noise);
        }
        if (doc.contains("toy3")) {
            const auto& t = doc["toy3"];
            check_keys(t, {"train_size", "test_size", "dim0_offset", "dim0_std", "dim1_low", "dim1_high", "dim1_split"},
                       "toy3");
            take(t, "train_size", c.toy3.train_size);
            take(t, "test_size", c.toy3.test_size);
            take(t, "dim0_offset", c.toy3.dim0_offset);
            take(t, "dim0_std", c.toy3.dim0_std);
            take(t, "dim1_low", c.toy3.dim1_low);
            take(t, "dim1_high", c.toy3.dim1_high);
            take(t, "dim1_split", c.toy3.dim1_split);
        }
        if (doc.contains("equality")) {
            const auto& e = doc["equality"];
            check_keys(e, {"train_counts", "test_counts", "cluster_std", "class_separation", "noise_dims"}, "equality");
            take(e, "train_counts", c.equality.train_counts);
            take(e, "test_counts", c.equality.test_counts);
            take(e, "cluster_std", c.equality.params.cluster_std);
            take(e, "class_separation", c.equality.params.class_separation);
            take(e, "noise_dims", c.equality.params.noise_dims);
        }
        if (doc.contains("train_csv")) c.train_csv = doc["train_csv"].get<std::string>();
        if (doc.contains("test_csv")) c.test_csv = doc["test_csv"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid configuration value: ") + e.what());
    }
    return c;
}

}  // namespace xaiaug
