#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaiaug/attribution.hpp"
#include "xaiaug/data_redistribution.hpp"
#include "xaiaug/dense_net.hpp"
#include "xaiaug/loss_augment.hpp"
#include "xaiaug/toy_data.hpp"

namespace xaiaug {

enum class ExperimentId { toy1, toy2, toy3, equality, custom };

std::string to_string(ExperimentId id);
ExperimentId experiment_id_from_string(const std::string& name);

enum class AugmentationFamily {
    none,
    attention_mask,
    lrp_weighted,
    xai_dropout,
    random_dropout,
    rrr_loss,
    attribution_prior,
    loss_scaling,
    grad_feature_mask,
    grad_weight_scaling,
    data_redistribution,
    prune,
};

std::string to_string(AugmentationFamily family);
/// Accepts the canonical names plus the short aliases "attention" and "rrr".
AugmentationFamily augmentation_family_from_string(const std::string& name);
std::vector<std::string> augmentation_family_names();

/// How logged attributions are made relative before averaging.
enum class Normalization { signed_max, abs_max };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& name);

/// One augmentation family and its parameters; fields not used by the
/// selected family are ignored.
struct AugmentationSpec {
    AugmentationFamily family = AugmentationFamily::none;
    /// Layer whose input features are explained/augmented.
    std::size_t layer = 1;
    /// Dropout rate.
    double rate = 0.25;
    /// Weight of rrr/prior regularizers and of the feature-gradient mask.
    double lambda = 1.0;
    /// Dual objective weights for lrp_weighted.
    double alpha = 1.0;
    double beta = 1.0;
    /// attention_mask / lrp_weighted: also gate when evaluating, using
    /// predicted-class explanations.
    bool gate_at_inference = false;
    /// Ground-truth mask row for rrr_loss.
    std::vector<double> ground_truth;
    MaskSemantics mask_semantics = MaskSemantics::relevance_mask;
    /// Penalty for attribution_prior: "l1" or "target_distance".
    std::string penalty = "l1";
    std::vector<double> penalty_target;
    /// Fixed loss_scaling factors; empty means "derive from class metrics".
    std::vector<double> class_factors;
    /// Class metric and orientation for data_redistribution / loss_scaling.
    MetricKind metric = MetricKind::entropy;
    bool higher_metric_gets_more = true;
    /// Pruning after training.
    double prune_fraction = 0.25;
    std::size_t prune_references_per_class = 20;
    std::size_t finetune_iterations = 0;
    bool prune_signed = false;

    void validate(std::size_t layer_count, std::size_t input_dim) const;
};

/// Mini-epoch schedule used for class-balance bookkeeping and resampling.
struct MiniEpochConfig {
    /// Samples per mini-epoch; 0 disables mini-epoch rows.
    std::size_t size = 0;
    std::size_t representatives_per_class = 5;
};

struct EqualityDataConfig {
    std::vector<std::size_t> train_counts{300, 50};
    std::vector<std::size_t> test_counts{100, 100};
    ImbalancedParams params;
};

struct ExperimentConfig {
    ExperimentId id = ExperimentId::custom;
    AugmentationSpec augmentation;
    TrainConfig train;
    std::vector<std::size_t> layer_sizes;
    std::vector<Activation> activations;
    AttributionMethod attribution = AttributionMethod::lrp_epsilon();
    Normalization log_normalization = Normalization::signed_max;
    std::vector<std::uint64_t> seeds{0};
    MiniEpochConfig miniepochs;

    Toy1Params toy1;
    Toy2Params toy2;
    Toy3Params toy3;
    EqualityDataConfig equality;
    /// Dataset files for ExperimentId::custom.
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;

    /// Keys that differ from the preset; recorded in run metadata.
    std::vector<std::string> overrides;

    void validate() const;
};

/// Locked hyperparameters of each experiment.
ExperimentConfig preset(ExperimentId id);

nlohmann::json to_json(const ExperimentConfig& config);
/// Applies the keys present in `doc` on top of `base`; unknown keys are a
/// ConfigError. Changed top-level keys are appended to `overrides`.
ExperimentConfig apply_config_json(ExperimentConfig base, const nlohmann::json& doc);

struct IterationRow {
    std::size_t iteration = 0;
    Split split = Split::train;
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> attribution;
    std::vector<double> attribution_smoothed;
};

struct MiniEpochRow {
    std::size_t miniepoch = 0;
    std::vector<double> proportions;
    std::vector<double> classwise_accuracy;
    BalanceScore balance;
};

/// Everything recorded for one seeded run.
struct MetricsLog {
    std::uint64_t seed = 0;
    std::size_t dims = 0;
    std::size_t classes = 0;
    std::vector<IterationRow> rows;
    std::vector<MiniEpochRow> miniepochs;
    std::optional<nlohmann::json> prune_report;
    DenseNetwork final_network;

    /// Rows of one split in iteration order.
    std::vector<const IterationRow*> split_rows(Split split) const;
    const IterationRow& final_row(Split split) const;
};

struct RunOptions {
    /// Parallel seeds; 0 means one per hardware thread.
    std::size_t jobs = 1;
    /// Attribution logging every iteration; disabling it only skips the
    /// attr_* columns (they are written as 0) and never changes training.
    bool log_attributions = true;
};

/// Runs every seed of `config`; logs are returned in seed order.
std::vector<MetricsLog> run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs a single seed.
MetricsLog run_seed(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

/// Train/test datasets the configured experiment uses for `seed`.
TrainTestSplit experiment_data(const ExperimentConfig& config, std::uint64_t seed);

/// out[t] = mean(in[0..t]).
std::vector<double> cumulative_mean(const std::vector<double>& series);

struct GridSpec {
    double x_min = -3.0, x_max = 3.0;
    double y_min = -3.0, y_max = 3.0;
    std::size_t nx = 50, ny = 50;
};

/// Predicted class at the nodes of a rectangular grid (row j = y_j).
struct BoundaryGrid {
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<std::vector<std::size_t>> predicted;
};

BoundaryGrid decision_boundary(const DenseNetwork& net, const GridSpec& grid);
std::string boundary_to_csv(const BoundaryGrid& grid);

struct AggregateRow {
    std::size_t iteration = 0;
    Split split = Split::train;
    /// Metric name -> (mean, population std) in column order.
    std::vector<std::pair<double, double>> values;
};

struct AggregateLog {
    std::vector<std::string> columns;
    std::vector<AggregateRow> rows;
};

/// Per-iteration mean and population std of every metric across seeds.
AggregateLog aggregate_seeds(const std::vector<MetricsLog>& logs);

/// Header: iteration,split,loss,accuracy,attr_dim_0..,attr_smooth_dim_0..
std::string metrics_to_csv(const MetricsLog& log);
/// Header: miniepoch,p_0..,acc_0..,balance
std::string miniepochs_to_csv(const MetricsLog& log);
/// Header: iteration,split,<metric>_mean,<metric>_std,...
std::string aggregate_to_csv(const AggregateLog& agg);

/// Mean of the last `count` mini-epoch balance scores (perfect balance
/// counts as +inf).
double mean_final_balance(const MetricsLog& log, std::size_t count);

}  // namespace xaiaug
