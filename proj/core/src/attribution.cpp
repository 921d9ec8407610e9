#include "xaiaug/attribution.hpp"

#include <algorithm>
#include <cmath>

namespace xaiaug {

std::string to_string(AttributionKind kind) {
    switch (kind) {
        case AttributionKind::lrp: return "lrp";
        case AttributionKind::gradient: return "gradient";
        case AttributionKind::gradient_times_input: return "gradient_times_input";
        case AttributionKind::guided_backprop: return "guided_backprop";
    }
    return "lrp";
}

AttributionKind attribution_kind_from_string(const std::string& name) {
    if (name == "lrp") return AttributionKind::lrp;
    if (name == "gradient") return AttributionKind::gradient;
    if (name == "gradient_times_input") return AttributionKind::gradient_times_input;
    if (name == "guided_backprop") return AttributionKind::guided_backprop;
    throw ConfigError("unknown attribution method '" + name + "'");
}

AttributionMethod AttributionMethod::lrp_epsilon(double epsilon, AttributionTarget target) {
    AttributionMethod m;
    m.kind = AttributionKind::lrp;
    m.default_rule = LrpRule::eps(epsilon);
    m.target = target;
    return m;
}

AttributionMethod AttributionMethod::of_kind(AttributionKind kind, AttributionTarget target) {
    if (kind == AttributionKind::lrp) return lrp_epsilon(kDefaultLrpEpsilon, target);
    AttributionMethod m;
    m.kind = kind;
    m.target = target;
    return m;
}

void AttributionMethod::validate() const {
    const bool has_rules = !lrp_rules.empty() || default_rule.has_value();
    if (kind == AttributionKind::lrp && !has_rules) throw ConfigError("LRP method without rules");
    if (kind != AttributionKind::lrp && has_rules) throw ConfigError("LRP rules given for a non-LRP method");
    auto check = [](const LrpRule& r) {
        if (r.kind == LrpRule::Kind::epsilon && !(r.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    };
    for (const auto& [l, rule] : lrp_rules) check(rule);
    if (default_rule) check(*default_rule);
}

LrpRule AttributionMethod::rule_for(std::size_t l) const {
    if (auto it = lrp_rules.find(l); it != lrp_rules.end()) return it->second;
    if (default_rule) return *default_rule;
    throw ConfigError("no LRP rule configured for layer " + std::to_string(l));
}

namespace {

double sign_plus(double z) { return z >= 0.0 ? 1.0 : -1.0; }

void check_layer_shapes(const DenseLayer& layer, const Matrix& in_acts, const Matrix& out_relevance) {
    if (in_acts.cols() != layer.in_units() || out_relevance.cols() != layer.out_units() ||
        in_acts.rows() != out_relevance.rows()) {
        throw DimensionError("LRP shapes: inputs " + shape_string(in_acts) + ", relevance " +
                             shape_string(out_relevance) + " for layer " + std::to_string(layer.out_units()) + "x" +
                             std::to_string(layer.in_units()));
    }
}

Labels resolve_targets(const ForwardTrace& trace, const Labels& labels, const AttributionTarget& target) {
    const std::size_t batch = trace.batch_size();
    const std::size_t classes = trace.output.cols();
    Labels out(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        switch (target.kind) {
            case AttributionTarget::Kind::true_class:
                if (labels.size() != batch) throw DimensionError("true-class attribution needs one label per sample");
                out[i] = labels[i];
                break;
            case AttributionTarget::Kind::predicted_class: {
                auto row = trace.logits().row(i);
                out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
                break;
            }
            case AttributionTarget::Kind::explicit_class: out[i] = target.class_index; break;
        }
        if (out[i] >= classes) throw IndexError("attribution target " + std::to_string(out[i]) + " out of range");
    }
    return out;
}

// Gradient of the target logits w.r.t. every layer input. `guided` additionally
// zeroes negative backward signals at ReLUs.
std::vector<Matrix> input_gradients(const DenseNetwork& net, const ForwardTrace& trace, const Labels& targets,
                                    bool guided) {
    const std::size_t batch = trace.batch_size();
    std::vector<Matrix> grads(net.layer_count());
    Matrix dz(batch, net.output_dim());
    for (std::size_t i = 0; i < batch; ++i) dz(i, targets[i]) = 1.0;
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const auto& layer = net.layer(l);
        Matrix da(batch, layer.in_units());
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t k = 0; k < layer.out_units(); ++k) {
                const double g = dz(i, k);
                if (g == 0.0) continue;
                auto w = layer.weights.row(k);
                auto dai = da.row(i);
                for (std::size_t j = 0; j < layer.in_units(); ++j) dai[j] += g * w[j];
            }
        }
        if (l == 0) {
            grads[0] = std::move(da);
            break;
        }
        Matrix through = trace.gates.count(l) ? hadamard(da, trace.gates.at(l)) : da;
        const auto& prev = net.layer(l - 1);
        if (prev.activation == Activation::relu) {
            const Matrix& z = trace.pre_activations[l - 1];
            for (std::size_t i = 0; i < through.size(); ++i) {
                if (!(z.data()[i] > 0.0) || (guided && through.data()[i] < 0.0)) through.data()[i] = 0.0;
            }
        }
        // guided relevance at a hidden unit is the rectified signal it passes on
        grads[l] = guided ? through : std::move(da);
        dz = std::move(through);
    }
    return grads;
}

}  // namespace

Matrix lrp_dense_epsilon(const DenseLayer& layer, const Matrix& in_acts, const Matrix& out_relevance,
                         double epsilon) {
    check_layer_shapes(layer, in_acts, out_relevance);
    const std::size_t batch = in_acts.rows();
    Matrix in_rel(batch, layer.in_units());
    for (std::size_t i = 0; i < batch; ++i) {
        auto a = in_acts.row(i);
        auto r = in_rel.row(i);
        for (std::size_t k = 0; k < layer.out_units(); ++k) {
            const double rk = out_relevance(i, k);
            if (rk == 0.0) continue;
            auto w = layer.weights.row(k);
            double z = layer.biases[k];
            for (std::size_t j = 0; j < a.size(); ++j) z += a[j] * w[j];
            const double denom = z + epsilon * sign_plus(z);
            if (denom == 0.0) continue;
            const double s = rk / denom;
            for (std::size_t j = 0; j < a.size(); ++j) r[j] += a[j] * w[j] * s;
        }
    }
    return in_rel;
}

Matrix lrp_dense_zplus(const DenseLayer& layer, const Matrix& in_acts, const Matrix& out_relevance) {
    check_layer_shapes(layer, in_acts, out_relevance);
    const std::size_t batch = in_acts.rows();
    Matrix in_rel(batch, layer.in_units());
    for (std::size_t i = 0; i < batch; ++i) {
        auto a = in_acts.row(i);
        auto r = in_rel.row(i);
        for (std::size_t k = 0; k < layer.out_units(); ++k) {
            const double rk = out_relevance(i, k);
            if (rk == 0.0) continue;
            auto w = layer.weights.row(k);
            double z = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) z += a[j] * std::max(w[j], 0.0);
            if (z == 0.0) z = kZPlusStabilizer;
            const double s = rk / z;
            for (std::size_t j = 0; j < a.size(); ++j) r[j] += a[j] * std::max(w[j], 0.0) * s;
        }
    }
    return in_rel;
}

RelevanceMaps explain(const DenseNetwork& net, const ForwardTrace& trace, const Labels& labels,
                      const AttributionMethod& method) {
    method.validate();
    if (trace.inputs.size() != net.layer_count()) throw ConsistencyError("trace does not belong to this network");
    RelevanceMaps maps;
    maps.targets = resolve_targets(trace, labels, method.target);
    const std::size_t L = net.layer_count();
    const std::size_t batch = trace.batch_size();
    maps.relevance.resize(L + 1);

    Matrix seed(batch, net.output_dim());
    if (method.kind == AttributionKind::lrp) {
        for (std::size_t i = 0; i < batch; ++i) seed(i, maps.targets[i]) = trace.logits()(i, maps.targets[i]);
        maps.relevance[L] = seed;
        Matrix current = std::move(seed);
        for (std::size_t l = L; l-- > 0;) {
            const LrpRule rule = method.rule_for(l);
            current = rule.kind == LrpRule::Kind::epsilon
                          ? lrp_dense_epsilon(net.layer(l), trace.inputs[l], current, rule.epsilon)
                          : lrp_dense_zplus(net.layer(l), trace.inputs[l], current);
            if (!current.all_finite()) throw NumericError("non-finite relevance", l);
            maps.relevance[l] = current;
        }
        return maps;
    }

    for (std::size_t i = 0; i < batch; ++i) seed(i, maps.targets[i]) = 1.0;
    maps.relevance[L] = std::move(seed);
    auto grads = input_gradients(net, trace, maps.targets, method.kind == AttributionKind::guided_backprop);
    for (std::size_t l = 0; l < L; ++l) {
        maps.relevance[l] = method.kind == AttributionKind::gradient_times_input
                                ? hadamard(grads[l], trace.inputs[l])
                                : std::move(grads[l]);
        if (!maps.relevance[l].all_finite()) throw NumericError("non-finite relevance", l);
    }
    return maps;
}

namespace {

Matrix normalize_rows(const Matrix& r, bool absolute) {
    Matrix out(r.rows(), r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        auto src = r.row(i);
        double peak = 0.0;
        for (double v : src) peak = std::max(peak, std::abs(v));
        if (peak == 0.0) continue;
        auto dst = out.row(i);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] = (absolute ? std::abs(src[j]) : src[j]) / peak;
    }
    return out;
}

}  // namespace

Matrix normalize_signed(const Matrix& r) { return normalize_rows(r, false); }
Matrix normalize_abs(const Matrix& r) { return normalize_rows(r, true); }

std::vector<double> mean_per_feature(const Matrix& r) {
    std::vector<double> mean(r.cols(), 0.0);
    if (r.rows() == 0) return mean;
    for (std::size_t i = 0; i < r.rows(); ++i) {
        auto row = r.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
    }
    for (auto& m : mean) m /= static_cast<double>(r.rows());
    return mean;
}

Matrix normalize_abs_backward(const Matrix& r, const Matrix& grad_wrt_normalized) {
    require_same_shape(r, grad_wrt_normalized, "normalize_abs_backward");
    Matrix out(r.rows(), r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        auto src = r.row(i);
        double peak = 0.0;
        for (double v : src) peak = std::max(peak, std::abs(v));
        if (peak == 0.0) continue;
        for (std::size_t j = 0; j < src.size(); ++j) {
            const double s = src[j] > 0.0 ? 1.0 : (src[j] < 0.0 ? -1.0 : 0.0);
            out(i, j) = grad_wrt_normalized(i, j) * s / peak;
        }
    }
    return out;
}

Gradients lrp_epsilon_vjp(const DenseNetwork& net, const ForwardTrace& trace, const RelevanceMaps& maps,
                          const AttributionMethod& method, std::size_t layer, const Matrix& relevance_grad) {
    const std::size_t L = net.layer_count();
    if (method.kind != AttributionKind::lrp) throw ConfigError("lrp_epsilon_vjp needs an LRP method");
    if (layer >= L) throw ConfigError("relevance layer " + std::to_string(layer) + " out of range");
    if (maps.relevance.size() != L + 1 || trace.inputs.size() != L) {
        throw ConsistencyError("relevance maps/trace do not match the network");
    }
    require_same_shape(relevance_grad, trace.inputs[layer], "relevance gradient");
    const std::size_t batch = trace.batch_size();

    Gradients grads = Gradients::zeros_like(net);
    std::vector<Matrix> grad_act(L), grad_z(L);
    for (std::size_t k = 0; k < L; ++k) {
        grad_act[k] = Matrix(batch, net.layer(k).in_units());
        grad_z[k] = Matrix(batch, net.layer(k).out_units());
    }

    // Relevance chain, bottom (layer) to top.
    Matrix grad_rel = relevance_grad;
    for (std::size_t k = layer; k < L; ++k) {
        const LrpRule rule = method.rule_for(k);
        if (rule.kind != LrpRule::Kind::epsilon) {
            throw ConfigError("differentiable LRP supports only the epsilon rule (layer " + std::to_string(k) + ")");
        }
        const auto& lay = net.layer(k);
        const Matrix& a = trace.inputs[k];
        const Matrix& z = trace.pre_activations[k];
        const Matrix& r_out = maps.relevance[k + 1];
        Matrix grad_rel_out(batch, lay.out_units());
        for (std::size_t i = 0; i < batch; ++i) {
            auto ai = a.row(i);
            auto gi = grad_rel.row(i);
            for (std::size_t o = 0; o < lay.out_units(); ++o) {
                const double d = z(i, o) + rule.epsilon * sign_plus(z(i, o));
                if (d == 0.0) continue;
                const double s = r_out(i, o) / d;
                auto w = lay.weights.row(o);
                auto gw = grads.layers[k].weights.row(o);
                double grad_s = 0.0;
                for (std::size_t j = 0; j < lay.in_units(); ++j) {
                    // R_in_j = a_j * c_j with c_j = sum_o w_oj s_o.
                    const double grad_c = gi[j] * ai[j];
                    grad_act[k](i, j) += gi[j] * w[j] * s;
                    gw[j] += s * grad_c;
                    grad_s += w[j] * grad_c;
                }
                grad_rel_out(i, o) = grad_s / d;
                grad_z[k](i, o) += -grad_s * s / d;
            }
        }
        grad_rel = std::move(grad_rel_out);
    }
    // Seed: R^L[target] = logit[target].
    for (std::size_t i = 0; i < batch; ++i) {
        const auto t = maps.targets.at(i);
        grad_z[L - 1](i, t) += grad_rel(i, t);
    }

    // Forward-pass adjoint, top to bottom.
    for (std::size_t k = L; k-- > 0;) {
        const auto& lay = net.layer(k);
        const Matrix& a = trace.inputs[k];
        for (std::size_t i = 0; i < batch; ++i) {
            auto ai = a.row(i);
            for (std::size_t o = 0; o < lay.out_units(); ++o) {
                const double g = grad_z[k](i, o);
                if (g == 0.0) continue;
                grads.layers[k].biases[o] += g;
                auto w = lay.weights.row(o);
                auto gw = grads.layers[k].weights.row(o);
                for (std::size_t j = 0; j < lay.in_units(); ++j) {
                    gw[j] += g * ai[j];
                    grad_act[k](i, j) += g * w[j];
                }
            }
        }
        if (k == 0) break;
        Matrix g_prev = grad_act[k];
        if (auto it = trace.gates.find(k); it != trace.gates.end()) g_prev = hadamard(g_prev, it->second);
        const auto& prev = net.layer(k - 1);
        if (prev.activation == Activation::relu) {
            const Matrix& zp = trace.pre_activations[k - 1];
            for (std::size_t i = 0; i < g_prev.size(); ++i) {
                if (!(zp.data()[i] > 0.0)) g_prev.data()[i] = 0.0;
            }
        } else if (prev.activation == Activation::softmax) {
            throw ConfigError("softmax in a hidden layer");
        }
        for (std::size_t i = 0; i < g_prev.size(); ++i) grad_z[k - 1].data()[i] += g_prev.data()[i];
    }
    return grads;
}

}  // namespace xaiaug
