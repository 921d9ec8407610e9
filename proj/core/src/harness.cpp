#include "xaiaug/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "xaiaug/feature_augment.hpp"
#include "xaiaug/gradient_augment.hpp"
#include "xaiaug/log.hpp"
#include "xaiaug/model_augment.hpp"

namespace xaiaug {

namespace {

// splitmix64 finalizer; gives the equality test set its own seed.
std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Matrix normalize(const Matrix& r, Normalization n) {
    return n == Normalization::signed_max ? normalize_signed(r) : normalize_abs(r);
}

std::vector<double> label_frequencies(const Labels& labels, std::size_t classes) {
    std::vector<double> p(classes, 0.0);
    for (auto y : labels) p[y] += 1.0;
    for (auto& v : p) v /= static_cast<double>(labels.size());
    return p;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <typename E>
[[noreturn]] void throw_prefixed(const E& e, const std::string& prefix) {
    throw E(prefix + e.what());
}

[[noreturn]] void rethrow_with_context(const std::string& prefix) {
    try {
        throw;
    } catch (const NumericError& e) {
        throw e.with_prefix(prefix);
    } catch (const DegenerateImportanceError& e) {
        throw_prefixed(e, prefix);
    } catch (const ConfigError& e) {
        throw_prefixed(e, prefix);
    } catch (const UsageError& e) {
        throw_prefixed(e, prefix);
    } catch (const DimensionError& e) {
        throw_prefixed(e, prefix);
    } catch (const IndexError& e) {
        throw_prefixed(e, prefix);
    } catch (const ConsistencyError& e) {
        throw_prefixed(e, prefix);
    } catch (const DataError& e) {
        throw_prefixed(e, prefix);
    } catch (const PreconditionError& e) {
        throw_prefixed(e, prefix);
    } catch (const IoError& e) {
        throw_prefixed(e, prefix);
    }
}

class SeedRun {
public:
    SeedRun(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options)
        : config_(config),
          spec_(config.augmentation),
          options_(options),
          data_(experiment_data(config, seed)),
          net_(build_network(config.layer_sizes, config.activations, seed)),
          train_rng_(make_rng(seed, Stream::training)),
          aug_rng_(make_rng(seed, Stream::augmentation)),
          sampler_(data_.train.size(), config.train.batch_size, make_rng(seed, Stream::training)) {
        log_.seed = seed;
        log_.dims = data_.train.dims();
        classes_ = std::max({data_.train.num_classes(), data_.test.num_classes(), net_.output_dim()});
        log_.classes = classes_;
        if (data_.train.dims() != net_.input_dim() || data_.test.dims() != net_.input_dim()) {
            throw ConsistencyError("dataset has " + std::to_string(data_.train.dims()) +
                                   " dims but the network expects " + std::to_string(net_.input_dim()));
        }
        if (classes_ > net_.output_dim()) throw ConsistencyError("dataset has more classes than network outputs");
        explain_method_ = config.attribution;
        log_method_ = config.attribution;
        log_method_.target = AttributionTarget::true_class();
        if (!spec_.class_factors.empty()) validate_class_factors(spec_.class_factors, data_.train.labels);
        if (spec_.family == AugmentationFamily::rrr_loss) {
            const std::size_t dims = config.layer_sizes.at(spec_.layer);
            if (spec_.ground_truth.size() != dims) {
                throw ConfigError("ground_truth has " + std::to_string(spec_.ground_truth.size()) +
                                  " entries but layer " + std::to_string(spec_.layer) + " has " +
                                  std::to_string(dims) + " features");
            }
            mask_ = GroundTruthMask{Matrix::row_vector(spec_.ground_truth), spec_.mask_semantics};
            mask_.validate();
        }
        if (spec_.family == AugmentationFamily::attribution_prior) {
            penalty_ = make_penalty(spec_.penalty, spec_.penalty_target);
        }
        if (uses_representatives()) {
            reps_ = RepresentativeSet(data_.train, classes_, config.miniepochs.representatives_per_class, aug_rng_);
        }
        proportions_ = label_frequencies(data_.train.labels, classes_);
        sums_[0].assign(log_.dims, 0.0);
        sums_[1].assign(log_.dims, 0.0);
    }

    MetricsLog run() {
        const std::size_t T = config_.train.iterations;
        const std::size_t B = config_.train.batch_size;
        const std::size_t me_size = config_.miniepochs.size;
        const std::size_t per_me = me_size == 0 ? 0 : std::max<std::size_t>(1, me_size / B);
        std::size_t t = 0;
        try {
            for (t = 1; t <= T; ++t) {
                if (per_me != 0 && (t - 1) % per_me == 0) begin_miniepoch(per_me * B);
                const auto batch = next_batch(B);
                train_step(data_.train.features.select_rows(batch), gather(data_.train.labels, batch));
                log_iteration(t);
                if (per_me != 0 && (t % per_me == 0 || t == T)) end_miniepoch();
            }
            if (spec_.family == AugmentationFamily::prune) {
                prune();
                for (std::size_t k = 1; k <= spec_.finetune_iterations; ++k, ++t) {
                    const auto batch = sampler_.next();
                    plain_step(data_.train.features.select_rows(batch), gather(data_.train.labels, batch));
                    log_iteration(T + k);
                }
            }
        } catch (const Error&) {
            rethrow_with_context("seed " + std::to_string(log_.seed) + ", iteration " + std::to_string(t) + ": ");
        }
        log_.final_network = net_;
        return std::move(log_);
    }

private:
    bool uses_representatives() const {
        const bool derived = spec_.family == AugmentationFamily::data_redistribution ||
                             (spec_.family == AugmentationFamily::loss_scaling && spec_.class_factors.empty());
        return derived && spec_.metric != MetricKind::inverse_frequency;
    }

    static Labels gather(const Labels& labels, const std::vector<std::size_t>& idx) {
        Labels out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(labels[i]);
        return out;
    }

    std::vector<std::size_t> next_batch(std::size_t B) {
        if (spec_.family != AugmentationFamily::data_redistribution) return sampler_.next();
        // batches are consecutive slices of the resampled mini-epoch
        std::vector<std::size_t> batch(miniepoch_indices_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                       miniepoch_indices_.begin() + static_cast<std::ptrdiff_t>(cursor_ + B));
        cursor_ += B;
        return batch;
    }

    void begin_miniepoch(std::size_t samples) {
        const bool derived = spec_.family == AugmentationFamily::data_redistribution ||
                             (spec_.family == AugmentationFamily::loss_scaling && spec_.class_factors.empty());
        if (derived) {
            ClassMetricTable table;
            if (spec_.metric == MetricKind::inverse_frequency) {
                table = inverse_frequency_metrics(data_.train.labels, classes_);
            } else {
                const auto refs = data_.train.subset(reps_.indices());
                const auto trace = forward(net_, refs.features);
                const auto maps = explain(net_, trace, refs.labels, log_method_);
                reps_.record(normalize_abs(maps.at_input(spec_.layer)));
                table = reps_.class_metrics(spec_.metric);
            }
            proportions_ = class_proportions(table, spec_.higher_metric_gets_more);
        }
        if (spec_.family == AugmentationFamily::loss_scaling && spec_.class_factors.empty()) {
            factors_.resize(classes_);
            for (std::size_t c = 0; c < classes_; ++c) factors_[c] = static_cast<double>(classes_) * proportions_[c];
        }
        if (spec_.family == AugmentationFamily::data_redistribution) {
            miniepoch_indices_ = resample_miniepoch(data_.train, proportions_, samples, train_rng_);
            cursor_ = 0;
        }
    }

    void end_miniepoch() {
        MiniEpochRow row;
        row.miniepoch = log_.miniepochs.size() + 1;
        row.proportions = proportions_;
        row.classwise_accuracy = classwise_accuracy(net_, data_.test, classes_);
        row.balance = balance_score(row.classwise_accuracy);
        log_.miniepochs.push_back(std::move(row));
    }

    void plain_step(const Matrix& X, const Labels& y) {
        const auto trace = forward(net_, X);
        apply(backward(net_, trace, y));
    }

    void apply(const Gradients& grads) {
        sgd_momentum_step(net_, grads, momentum_, config_.train.learning_rate, config_.train.momentum);
    }

    Gradients regularizer_gradients(const ForwardTrace& trace, const RelevanceMaps& maps, const Matrix& grad_r,
                                    double scale) {
        Matrix g = grad_r;
        for (auto& v : g.data()) v *= scale;
        return lrp_epsilon_vjp(net_, trace, maps, explain_method_, spec_.layer, g);
    }

    void train_step(const Matrix& X, const Labels& y) {
        const std::size_t l = spec_.layer;
        const double B = static_cast<double>(y.size());
        switch (spec_.family) {
            case AugmentationFamily::none:
            case AugmentationFamily::data_redistribution:
            case AugmentationFamily::prune:
                plain_step(X, y);
                return;
            case AugmentationFamily::attention_mask: {
                const auto base = forward(net_, X);
                const auto maps = explain(net_, base, y, explain_method_);
                FeatureGates gates{{l, attention_mask(normalize_signed(maps.at_input(l))).values}};
                const auto gated = forward(net_, X, gates);
                apply(backward(net_, gated, y));
                return;
            }
            case AugmentationFamily::lrp_weighted: {
                const auto base = forward(net_, X);
                const auto maps = explain(net_, base, y, explain_method_);
                FeatureGates gates{{l, lrp_weight_mask(normalize_signed(maps.at_input(l))).values}};
                const auto gated = forward(net_, X, gates);
                const double loss = dual_objective(cross_entropy(base.output, y), cross_entropy(gated.output, y),
                                                   spec_.alpha, spec_.beta);
                if (!std::isfinite(loss)) throw NumericError("non-finite dual objective");
                auto grads = backward(net_, base, y);
                for (auto& lg : grads.layers) {
                    for (auto& v : lg.weights.data()) v *= spec_.alpha;
                    for (auto& v : lg.biases) v *= spec_.alpha;
                }
                grads.add_scaled(backward(net_, gated, y), spec_.beta);
                apply(grads);
                return;
            }
            case AugmentationFamily::xai_dropout: {
                const auto base = forward(net_, X);
                const auto maps = explain(net_, base, y, explain_method_);
                auto drop = xai_guided_dropout(base.inputs[l], normalize_abs(maps.at_input(l)), spec_.rate);
                const auto gated = forward(net_, X, FeatureGates{{l, std::move(drop.gate)}});
                apply(backward(net_, gated, y));
                return;
            }
            case AugmentationFamily::random_dropout: {
                const auto base = forward(net_, X);
                auto drop = random_dropout(base.inputs[l], spec_.rate, aug_rng_);
                const auto gated = forward(net_, X, FeatureGates{{l, std::move(drop.gate)}});
                apply(backward(net_, gated, y));
                return;
            }
            case AugmentationFamily::rrr_loss: {
                const auto trace = forward(net_, X);
                const auto maps = explain(net_, trace, y, explain_method_);
                const Matrix& r = maps.at_input(l);
                const Matrix g = normalize_abs_backward(r, rrr_reason_loss_grad(normalize_abs(r), mask_));
                auto grads = backward(net_, trace, y);
                grads.add_scaled(regularizer_gradients(trace, maps, g, spec_.lambda / B), 1.0);
                apply(grads);
                return;
            }
            case AugmentationFamily::attribution_prior: {
                const auto trace = forward(net_, X);
                const auto maps = explain(net_, trace, y, explain_method_);
                const Matrix& r = maps.at_input(l);
                Matrix g(r.rows(), r.cols());
                for (std::size_t i = 0; i < r.rows(); ++i) penalty_->gradient(r.row(i), g.row(i));
                auto grads = backward(net_, trace, y);
                grads.add_scaled(regularizer_gradients(trace, maps, g, spec_.lambda / B), 1.0);
                apply(grads);
                return;
            }
            case AugmentationFamily::loss_scaling: {
                const auto& factors = spec_.class_factors.empty() ? factors_ : spec_.class_factors;
                std::vector<double> w;
                w.reserve(y.size());
                for (auto c : y) w.push_back(factors.at(c));
                const auto trace = forward(net_, X);
                apply(backward(net_, trace, y, w));
                return;
            }
            case AugmentationFamily::grad_feature_mask: {
                const auto trace = forward(net_, X);
                const auto maps = explain(net_, trace, y, explain_method_);
                const Matrix mask = normalize_abs(maps.at_input(l));
                const double lambda = spec_.lambda;
                auto hook = [&](std::size_t layer, Matrix& grad) {
                    if (layer == l) grad = mask_feature_gradient(grad, mask, lambda);
                };
                apply(backward(net_, trace, y, {}, hook));
                return;
            }
            case AugmentationFamily::grad_weight_scaling: {
                const auto trace = forward(net_, X);
                const auto maps = explain(net_, trace, y, explain_method_);
                const auto r_in = mean_per_feature(maps.at_input(l));
                const auto r_out = mean_per_feature(maps.relevance.at(l + 1));
                WeightImportance importance;
                try {
                    importance = weight_importance_scores(r_in, r_out);
                } catch (const DegenerateImportanceError&) {
                    importance = uniform_weight_importance(r_out.size(), r_in.size());
                }
                auto grads = backward(net_, trace, y);
                const double n = static_cast<double>(importance.scores.size());
                auto& gw = grads.layers[l].weights;
                for (std::size_t i = 0; i < gw.size(); ++i) gw.data()[i] *= n * importance.scores.data()[i];
                apply(grads);
                return;
            }
        }
    }

    void prune() {
        std::vector<std::size_t> refs;
        for (const auto& group : data_.train.indices_by_class(classes_)) {
            std::sample(group.begin(), group.end(), std::back_inserter(refs),
                        static_cast<std::ptrdiff_t>(spec_.prune_references_per_class), aug_rng_);
        }
        const auto references = data_.train.subset(refs);
        const double before = evaluate(net_, data_.test);
        const auto importance = neuron_importance(net_, references, log_method_, !spec_.prune_signed);
        auto result = prune_neurons(net_, importance, prune_counts(net_, spec_.prune_fraction));
        net_ = result.network;
        momentum_ = MomentumState{};
        auto report = result.report();
        report["test_accuracy_before"] = before;
        report["test_accuracy_after"] = evaluate(net_, data_.test);
        report["reference_samples"] = refs.size();
        log_.prune_report = std::move(report);
    }

    // Evaluation runs the plain network unless gate_at_inference asks for the
    // gated forward. Labels are unavailable at evaluation, so that mask
    // explains the predicted class.
    ForwardTrace model_forward(const Matrix& X) const {
        const bool gated = spec_.family == AugmentationFamily::attention_mask ||
                           spec_.family == AugmentationFamily::lrp_weighted;
        auto base = forward(net_, X);
        if (!gated || !spec_.gate_at_inference) return base;
        AttributionMethod m = explain_method_;
        m.target = AttributionTarget::predicted();
        const auto maps = explain(net_, base, {}, m);
        const Matrix rn = normalize_signed(maps.at_input(spec_.layer));
        const Matrix gate = spec_.family == AugmentationFamily::attention_mask ? attention_mask(rn).values
                                                                               : lrp_weight_mask(rn).values;
        return forward(net_, X, FeatureGates{{spec_.layer, gate}});
    }

    void log_iteration(std::size_t t) {
        for (const LabeledDataset* data : {&data_.train, &data_.test}) {
            const auto trace = model_forward(data->features);
            IterationRow row;
            row.iteration = t;
            row.split = data->split;
            row.loss = cross_entropy(trace.output, data->labels);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < data->size(); ++i) {
                const auto p = trace.output.row(i);
                const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
                if (best == data->labels[i]) ++correct;
            }
            row.accuracy = static_cast<double>(correct) / static_cast<double>(data->size());
            if (options_.log_attributions) {
                const auto maps = explain(net_, trace, data->labels, log_method_);
                row.attribution = mean_per_feature(normalize(maps.at_input(0), config_.log_normalization));
            } else {
                row.attribution.assign(log_.dims, 0.0);
            }
            auto& sum = sums_[data->split == Split::train ? 0 : 1];
            const double count = static_cast<double>(t);
            row.attribution_smoothed.resize(log_.dims);
            for (std::size_t j = 0; j < log_.dims; ++j) {
                sum[j] += row.attribution[j];
                row.attribution_smoothed[j] = sum[j] / count;
            }
            if (!std::isfinite(row.loss) || !all_finite(row.attribution)) {
                throw NumericError("non-finite metric on the " + to_string(row.split) + " split");
            }
            log_.rows.push_back(std::move(row));
        }
    }

    const ExperimentConfig& config_;
    const AugmentationSpec& spec_;
    RunOptions options_;
    TrainTestSplit data_;
    DenseNetwork net_;
    Rng train_rng_;
    Rng aug_rng_;
    BatchSampler sampler_;
    MomentumState momentum_;
    AttributionMethod explain_method_;
    AttributionMethod log_method_;
    GroundTruthMask mask_;
    std::unique_ptr<PenaltyFunction> penalty_;
    RepresentativeSet reps_;
    std::vector<double> proportions_;
    std::vector<double> factors_;
    std::vector<std::size_t> miniepoch_indices_;
    std::size_t cursor_ = 0;
    std::size_t classes_ = 0;
    std::vector<double> sums_[2];
    MetricsLog log_;
};

}  // namespace

std::vector<const IterationRow*> MetricsLog::split_rows(Split split) const {
    std::vector<const IterationRow*> out;
    for (const auto& r : rows) {
        if (r.split == split) out.push_back(&r);
    }
    return out;
}

const IterationRow& MetricsLog::final_row(Split split) const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        if (it->split == split) return *it;
    }
    throw UsageError("log has no " + to_string(split) + " rows");
}

TrainTestSplit experiment_data(const ExperimentConfig& config, std::uint64_t seed) {
    switch (config.id) {
        case ExperimentId::toy1: return gen_toy1(seed, config.toy1);
        case ExperimentId::toy2: return gen_toy2(seed, config.toy2);
        case ExperimentId::toy3: return gen_toy3(seed, config.toy3);
        case ExperimentId::equality: {
            TrainTestSplit s;
            s.train = gen_imbalanced(seed, config.equality.train_counts, config.equality.params);
            s.test = gen_imbalanced(mix_seed(seed), config.equality.test_counts, config.equality.params);
            s.train.split = Split::train;
            s.test.split = Split::test;
            return s;
        }
        case ExperimentId::custom: {
            TrainTestSplit s;
            s.train = read_dataset_csv(config.train_csv);
            s.test = read_dataset_csv(config.test_csv);
            s.train.split = Split::train;
            s.test.split = Split::test;
            return s;
        }
    }
    throw UsageError("unknown experiment");
}

MetricsLog run_seed(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
    config.validate();
    SeedRun run(config, seed, options);
    return run.run();
}

std::vector<MetricsLog> run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const std::size_t n = config.seeds.size();
    std::vector<MetricsLog> logs(n);
    std::vector<std::exception_ptr> errors(n);
    std::size_t jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
    jobs = std::min(jobs, n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                logs[i] = run_seed(config, config.seeds[i], options);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return logs;
}

std::vector<double> cumulative_mean(const std::vector<double>& series) {
    if (series.empty()) throw UsageError("cumulative_mean of an empty series");
    std::vector<double> out(series.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        sum += series[t];
        out[t] = sum / static_cast<double>(t + 1);
    }
    return out;
}

namespace {

std::vector<double> grid_axis(double lo, double hi, std::size_t n) {
    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i) {
        axis[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return axis;
}

}  // namespace

BoundaryGrid decision_boundary(const DenseNetwork& net, const GridSpec& grid) {
    if (net.input_dim() != 2) {
        throw UsageError("decision boundaries need a 2-D input model, got " + std::to_string(net.input_dim()) + " inputs");
    }
    if (grid.nx == 0 || grid.ny == 0) throw UsageError("grid resolution must be positive");
    if (!(grid.x_max >= grid.x_min && grid.y_max >= grid.y_min)) throw UsageError("grid bounds are inverted");
    BoundaryGrid out;
    out.xs = grid_axis(grid.x_min, grid.x_max, grid.nx);
    out.ys = grid_axis(grid.y_min, grid.y_max, grid.ny);
    Matrix points(grid.nx * grid.ny, 2);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            points(j * grid.nx + i, 0) = out.xs[i];
            points(j * grid.nx + i, 1) = out.ys[j];
        }
    }
    const auto labels = predict(net, points);
    out.predicted.assign(grid.ny, std::vector<std::size_t>(grid.nx));
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) out.predicted[j][i] = labels[j * grid.nx + i];
    }
    return out;
}

std::string boundary_to_csv(const BoundaryGrid& grid) {
    std::string out = "x,y,predicted\n";
    for (std::size_t j = 0; j < grid.ys.size(); ++j) {
        for (std::size_t i = 0; i < grid.xs.size(); ++i) {
            out += format_double(grid.xs[i]) + "," + format_double(grid.ys[j]) + "," +
                   std::to_string(grid.predicted[j][i]) + "\n";
        }
    }
    return out;
}

namespace {

std::vector<double> row_values(const IterationRow& r) {
    std::vector<double> v{r.loss, r.accuracy};
    v.insert(v.end(), r.attribution.begin(), r.attribution.end());
    v.insert(v.end(), r.attribution_smoothed.begin(), r.attribution_smoothed.end());
    return v;
}

std::vector<std::string> metric_columns(std::size_t dims) {
    std::vector<std::string> cols{"loss", "accuracy"};
    for (std::size_t j = 0; j < dims; ++j) cols.push_back("attr_dim_" + std::to_string(j));
    for (std::size_t j = 0; j < dims; ++j) cols.push_back("attr_smooth_dim_" + std::to_string(j));
    return cols;
}

std::string join_header(const std::vector<std::string>& cols) {
    std::string out;
    for (const auto& c : cols) out += (out.empty() ? "" : ",") + c;
    return out;
}

}  // namespace

AggregateLog aggregate_seeds(const std::vector<MetricsLog>& logs) {
    if (logs.empty()) throw UsageError("aggregate_seeds needs at least one log");
    const auto& first = logs.front();
    for (const auto& log : logs) {
        if (log.rows.size() != first.rows.size() || log.dims != first.dims) {
            throw ConsistencyError("logs differ in length or dimensionality");
        }
    }
    AggregateLog agg;
    agg.columns = metric_columns(first.dims);
    const double n = static_cast<double>(logs.size());
    for (std::size_t k = 0; k < first.rows.size(); ++k) {
        AggregateRow row;
        row.iteration = first.rows[k].iteration;
        row.split = first.rows[k].split;
        std::vector<double> sum(agg.columns.size(), 0.0), sq(agg.columns.size(), 0.0);
        std::vector<std::vector<double>> values;
        for (const auto& log : logs) {
            const auto& r = log.rows[k];
            if (r.iteration != row.iteration || r.split != row.split) {
                throw ConsistencyError("logs are not aligned at row " + std::to_string(k));
            }
            values.push_back(row_values(r));
            if (values.back().size() != agg.columns.size()) throw ConsistencyError("row width mismatch");
        }
        for (std::size_t c = 0; c < agg.columns.size(); ++c) {
            double mean = 0.0;
            for (const auto& v : values) mean += v[c];
            mean /= n;
            double var = 0.0;
            for (const auto& v : values) var += (v[c] - mean) * (v[c] - mean);
            row.values.emplace_back(mean, std::sqrt(var / n));
        }
        agg.rows.push_back(std::move(row));
    }
    return agg;
}

std::string metrics_to_csv(const MetricsLog& log) {
    std::string out = "iteration,split," + join_header(metric_columns(log.dims)) + "\n";
    for (const auto& r : log.rows) {
        out += std::to_string(r.iteration) + "," + to_string(r.split);
        for (double v : row_values(r)) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string miniepochs_to_csv(const MetricsLog& log) {
    std::string out = "miniepoch";
    for (std::size_t c = 0; c < log.classes; ++c) out += ",p_" + std::to_string(c);
    for (std::size_t c = 0; c < log.classes; ++c) out += ",acc_" + std::to_string(c);
    out += ",balance\n";
    for (const auto& r : log.miniepochs) {
        out += std::to_string(r.miniepoch);
        for (double v : r.proportions) out += "," + format_double(v);
        for (double v : r.classwise_accuracy) out += "," + format_double(v);
        out += "," + r.balance.to_string() + "\n";
    }
    return out;
}

std::string aggregate_to_csv(const AggregateLog& agg) {
    std::string out = "iteration,split";
    for (const auto& c : agg.columns) out += "," + c + "_mean," + c + "_std";
    out += "\n";
    for (const auto& r : agg.rows) {
        out += std::to_string(r.iteration) + "," + to_string(r.split);
        for (const auto& [mean, sd] : r.values) out += "," + format_double(mean) + "," + format_double(sd);
        out += "\n";
    }
    return out;
}

double mean_final_balance(const MetricsLog& log, std::size_t count) {
    if (count == 0 || log.miniepochs.empty()) throw UsageError("no mini-epoch rows to average");
    const std::size_t n = std::min(count, log.miniepochs.size());
    double sum = 0.0;
    for (std::size_t k = log.miniepochs.size() - n; k < log.miniepochs.size(); ++k) {
        sum += log.miniepochs[k].balance.as_double();
    }
    return sum / static_cast<double>(n);
}

}  // namespace xaiaug
