#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "testkit.hpp"
#include "xaiaug/attribution.hpp"
#include "xaiaug/data_redistribution.hpp"
#include "xaiaug/errors.hpp"
#include "xaiaug/feature_augment.hpp"
#include "xaiaug/gradient_augment.hpp"
#include "xaiaug/harness.hpp"
#include "xaiaug/loss_augment.hpp"
#include "xaiaug/model_augment.hpp"
#include "xaiaug/network_io.hpp"
#include "xaiaug/toy_data.hpp"
#include "xaiaug_cli/cli.hpp"

namespace testkit {

bool CaseCheck::expect(bool ok, std::string_view what) {
    if (!ok && message_.empty()) message_ = std::string(what);
    return ok;
}

bool CaseCheck::expect_near(double actual, double expected, double tol, std::string_view what) {
    const bool ok = std::abs(actual - expected) <= tol;
    if (!ok && message_.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": got " << actual << ", expected " << expected << " (tol " << tol << ")";
        message_ = os.str();
    }
    return ok;
}

PropertyOutcome run_cases(const std::string& name, std::size_t cases, std::uint64_t seed, const CaseBody& body) {
    PropertyOutcome out;
    out.name = name;
    out.cases = cases;
    for (std::size_t c = 0; c < cases; ++c) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(c), 0x5eedu};
        Rng rng(seq);
        CaseCheck check;
        try {
            body(rng, check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("unexpected exception: ") + e.what());
        }
        if (check.failed()) {
            ++out.failures;
            ++out.checked;
            if (out.first_failure.empty()) out.first_failure = "case " + std::to_string(c) + ": " + check.message();
        } else if (!check.skipped()) {
            ++out.checked;
        }
    }
    return out;
}

namespace {

using namespace xaiaug;

bool same_bits(const Matrix& a, const Matrix& b) { return a == b; }

double rel_tol(double expected, double tol) { return tol * std::max(1.0, std::abs(expected)); }

Matrix random_batch(const DenseNetwork& net, Rng& rng, std::size_t max_rows = 6) {
    return random_matrix(1 + uniform_index(max_rows, rng), net.input_dim(), rng, -2.0, 2.0);
}

// ------------------------------------------------------------ dense_net

PropertyOutcome backward_matches_fd(std::size_t cases, std::uint64_t seed) {
    return run_cases("backward matches finite differences", cases, seed, [](Rng& rng, CaseCheck& c) {
        NetShape shape;
        shape.max_width = uniform_index(4, rng) == 0 ? 64 : 12;
        shape.allow_identity_hidden = true;
        const DenseNetwork net = random_net(rng, shape);
        const Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const Gradients g = backward(net, forward(net, x), y);
        const auto loss = [&](const DenseNetwork& n) { return ce_loss(n, x, y); };
        const auto pattern = [&](const DenseNetwork& n) { return relu_pattern(n, x); };
        std::size_t probed = 0;
        for (int k = 0; k < 10; ++k) {
            const ParamRef p = random_param(net, rng);
            const auto fd = central_difference(net, p, loss, pattern);
            if (!fd) continue;
            ++probed;
            const double err = relative_error(grad_of(g, p), *fd);
            if (!c.expect(err < 1e-4, "parameter gradient relative error " + std::to_string(err))) return;
        }
        if (probed == 0) c.skip();
    });
}

PropertyOutcome input_gradient_matches_fd(std::size_t cases, std::uint64_t seed) {
    return run_cases("feature gradient matches finite differences", cases, seed, [](Rng& rng, CaseCheck& c) {
        const DenseNetwork net = random_net(rng);
        Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const Gradients g = backward(net, forward(net, x), y);
        std::size_t probed = 0;
        for (int k = 0; k < 5; ++k) {
            const std::size_t i = uniform_index(x.rows(), rng), j = uniform_index(x.cols(), rng);
            Matrix xp = x, xm = x;
            xp(i, j) += kFdStep;
            xm(i, j) -= kFdStep;
            const auto base = relu_pattern(net, x);
            if (relu_pattern(net, xp) != base || relu_pattern(net, xm) != base) continue;
            ++probed;
            const double fd = (ce_loss(net, xp, y) - ce_loss(net, xm, y)) / (2 * kFdStep);
            const double err = relative_error(g.features[0](i, j), fd);
            if (!c.expect(err < 1e-4, "input gradient relative error " + std::to_string(err))) return;
        }
        if (probed == 0) c.skip();
    });
}

PropertyOutcome softmax_and_relu_ranges(std::size_t cases, std::uint64_t seed) {
    return run_cases("softmax rows sum to one, relu outputs non-negative", cases, seed, [](Rng& rng, CaseCheck& c) {
        const DenseNetwork net = random_net(rng, {}, 1.0 + 4.0 * uniform(rng));
        const auto trace = forward(net, random_batch(net, rng, 16));
        for (std::size_t i = 0; i < trace.output.rows(); ++i) {
            double s = 0.0;
            for (double v : trace.output.row(i)) s += v;
            c.expect_near(s, 1.0, 1e-6, "softmax row sum");
        }
        for (std::size_t l = 1; l < net.layer_count(); ++l) {
            if (net.layer(l - 1).activation != Activation::relu) continue;
            for (double v : trace.inputs[l].data()) c.expect(v >= 0.0, "negative relu output");
        }
    });
}

PropertyOutcome training_is_deterministic(std::size_t cases, std::uint64_t seed) {
    return run_cases("identical seed gives identical parameter trajectory", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::uint64_t s = rng();
        const std::vector<std::size_t> sizes{1 + uniform_index(6, rng), 1 + uniform_index(8, rng), 2};
        const std::vector<Activation> acts{Activation::relu, Activation::softmax};
        const Matrix x = random_matrix(12, sizes[0], rng);
        const Labels y = random_labels(12, 2, rng);
        auto train = [&] {
            DenseNetwork net = build_network(sizes, acts, s);
            MomentumState state;
            BatchSampler sampler(12, 4, make_rng(s, Stream::training));
            for (int t = 0; t < 5; ++t) {
                const auto idx = sampler.next();
                const Matrix xb = x.select_rows(idx);
                Labels yb;
                for (auto i : idx) yb.push_back(y[i]);
                sgd_momentum_step(net, backward(net, forward(net, xb), yb), state, 0.1, 0.9);
            }
            return net;
        };
        c.expect(train() == train(), "two identical runs diverged");
        c.expect(build_network(sizes, acts, s) == build_network(sizes, acts, s), "initialization not deterministic");
    });
}

PropertyOutcome batch_loss_linearity(std::size_t cases, std::uint64_t seed) {
    return run_cases("batch loss is the count-weighted mean of sub-batch losses", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const DenseNetwork net = random_net(rng);
                         const Matrix a = random_batch(net, rng, 8), b = random_batch(net, rng, 8);
                         const Labels ya = random_labels(a.rows(), net.output_dim(), rng);
                         const Labels yb = random_labels(b.rows(), net.output_dim(), rng);
                         Labels yab = ya;
                         yab.insert(yab.end(), yb.begin(), yb.end());
                         const double na = static_cast<double>(a.rows()), nb = static_cast<double>(b.rows());
                         const double expected = (na * ce_loss(net, a, ya) + nb * ce_loss(net, b, yb)) / (na + nb);
                         c.expect_near(ce_loss(net, vstack(a, b), yab), expected, 1e-10, "concatenated loss");
                     });
}

// ---------------------------------------------------------- attribution

AttributionMethod random_method(Rng& rng) {
    const auto target = uniform_index(2, rng) == 0 ? AttributionTarget::true_class() : AttributionTarget::predicted();
    switch (uniform_index(5, rng)) {
        case 0: return AttributionMethod::lrp_epsilon(kDefaultLrpEpsilon, target);
        case 1: {
            auto m = AttributionMethod::of_kind(AttributionKind::lrp, target);
            m.default_rule = LrpRule::zplus();
            m.lrp_rules[0] = LrpRule::eps(0.01);
            return m;
        }
        case 2: return AttributionMethod::of_kind(AttributionKind::gradient, target);
        case 3: return AttributionMethod::of_kind(AttributionKind::gradient_times_input, target);
        default: return AttributionMethod::of_kind(AttributionKind::guided_backprop, target);
    }
}

PropertyOutcome lrp_conservation(std::size_t cases, std::uint64_t seed) {
    return run_cases("LRP-0 conserves the target logit on zero-bias nets", cases, seed, [](Rng& rng, CaseCheck& c) {
        NetShape shape;
        shape.zero_bias = true;
        shape.allow_identity_hidden = true;
        const DenseNetwork net = random_net(rng, shape);
        const Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const auto trace = forward(net, x);
        const auto maps = explain(net, trace, y, AttributionMethod::lrp_epsilon(0.0));
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double logit = trace.logits()(i, y[i]);
            double total = 0.0;
            for (double v : maps.at_input(0).row(i)) total += v;
            const double err = std::abs(total - logit) / std::max(std::abs(logit), 1e-12);
            c.expect(err <= 1e-6, "relevance sum " + std::to_string(total) + " vs logit " + std::to_string(logit));
        }
    });
}

PropertyOutcome lrp_zero_equals_grad_times_input(std::size_t cases, std::uint64_t seed) {
    return run_cases("LRP-0 equals gradient x input on zero-bias ReLU nets", cases, seed, [](Rng& rng, CaseCheck& c) {
        NetShape shape;
        shape.zero_bias = true;
        const DenseNetwork net = random_net(rng, shape);
        const Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const auto trace = forward(net, x);
        const auto lrp = explain(net, trace, y, AttributionMethod::lrp_epsilon(0.0));
        const auto gxi = explain(net, trace, y, AttributionMethod::of_kind(AttributionKind::gradient_times_input));
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            const Matrix& a = lrp.at_input(l);
            const Matrix& b = gxi.at_input(l);
            for (std::size_t k = 0; k < a.size(); ++k) {
                if (!c.expect_near(a.data()[k], b.data()[k], rel_tol(b.data()[k], 1e-6), "LRP-0 vs grad x input")) return;
            }
        }
    });
}

PropertyOutcome guided_zero_at_inactive(std::size_t cases, std::uint64_t seed) {
    return run_cases("guided backprop is zero where the ReLU was inactive", cases, seed, [](Rng& rng, CaseCheck& c) {
        NetShape shape;
        shape.min_layers = 2;
        const DenseNetwork net = random_net(rng, shape);
        const Matrix x = random_batch(net, rng);
        const auto trace = forward(net, x);
        const auto maps = explain(net, trace, {}, AttributionMethod::of_kind(AttributionKind::guided_backprop,
                                                                              AttributionTarget::predicted()));
        for (std::size_t l = 1; l < net.layer_count(); ++l) {
            const Matrix& z = trace.pre_activations[l - 1];
            for (std::size_t k = 0; k < z.size(); ++k) {
                if (z.data()[k] <= 0.0) c.expect(maps.at_input(l).data()[k] == 0.0, "nonzero guided relevance");
            }
        }
    });
}

PropertyOutcome explain_per_sample_independence(std::size_t cases, std::uint64_t seed) {
    return run_cases("explaining a batch equals explaining single samples", cases, seed, [](Rng& rng, CaseCheck& c) {
        const DenseNetwork net = random_net(rng);
        const Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const AttributionMethod method = random_method(rng);
        const auto batch = explain(net, forward(net, x), y, method);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const std::vector<std::size_t> one{i};
            const auto single = explain(net, forward(net, x.select_rows(one)), Labels{y[i]}, method);
            for (std::size_t l = 0; l < batch.relevance.size(); ++l) {
                const auto br = batch.relevance[l].row(i);
                const auto sr = single.relevance[l].row(0);
                for (std::size_t j = 0; j < br.size(); ++j) {
                    c.expect_near(br[j], sr[j], 1e-12, "batch vs single relevance");
                }
            }
        }
    });
}

PropertyOutcome explain_is_deterministic(std::size_t cases, std::uint64_t seed) {
    return run_cases("explain is deterministic", cases, seed, [](Rng& rng, CaseCheck& c) {
        const DenseNetwork net = random_net(rng);
        const Matrix x = random_batch(net, rng);
        const Labels y = random_labels(x.rows(), net.output_dim(), rng);
        const AttributionMethod method = random_method(rng);
        const auto a = explain(net, forward(net, x), y, method);
        const auto b = explain(net, forward(net, x), y, method);
        for (std::size_t l = 0; l < a.relevance.size(); ++l) {
            c.expect(same_bits(a.relevance[l], b.relevance[l]), "relevance differs between calls");
        }
        c.expect(a.targets == b.targets, "targets differ");
    });
}

PropertyOutcome normalization_ranges(std::size_t cases, std::uint64_t seed) {
    return run_cases("normalizations reach max |r'| = 1 and keep zero rows", cases, seed, [](Rng& rng, CaseCheck& c) {
        Matrix r = random_matrix(1 + uniform_index(6, rng), 1 + uniform_index(8, rng), rng, -5.0, 5.0);
        for (std::size_t i = 0; i < r.rows(); ++i) {
            if (uniform_index(4, rng) == 0) std::fill(r.row(i).begin(), r.row(i).end(), 0.0);
        }
        const Matrix s = normalize_signed(r), a = normalize_abs(r);
        for (std::size_t i = 0; i < r.rows(); ++i) {
            double m = 0.0, ms = 0.0, ma = 0.0;
            for (std::size_t j = 0; j < r.cols(); ++j) {
                m = std::max(m, std::abs(r(i, j)));
                ms = std::max(ms, std::abs(s(i, j)));
                ma = std::max(ma, a(i, j));
                c.expect(a(i, j) >= 0.0 && a(i, j) <= 1.0, "abs-normalized value outside [0, 1]");
                c.expect(std::abs(a(i, j)) == std::abs(s(i, j)), "abs and signed normalizations disagree in magnitude");
            }
            if (m == 0.0) {
                c.expect(ms == 0.0 && ma == 0.0, "zero row not kept at zero");
            } else {
                c.expect_near(ms, 1.0, 1e-15, "signed max");
                c.expect_near(ma, 1.0, 1e-15, "abs max");
            }
        }
    });
}

// ------------------------------------------------------ feature_augment

Matrix signed_norm_relevance(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix r = random_matrix(rows, cols, rng, -3.0, 3.0);
    for (auto& v : r.data()) {
        if (uniform_index(8, rng) == 0) v = 0.0;
    }
    return normalize_signed(r);
}

Matrix activations(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix f = random_matrix(rows, cols, rng, 0.0, 3.0);
    for (auto& v : f.data()) {
        if (uniform_index(5, rng) == 0) v = 0.0;
    }
    return f;
}

PropertyOutcome attention_mask_range(std::size_t cases, std::uint64_t seed) {
    return run_cases("attention mask lies in [0.5, 1.5] and is neutral at zero", cases, seed, [](Rng& rng, CaseCheck& c) {
        const Matrix r = signed_norm_relevance(rng, 1 + uniform_index(5, rng), 1 + uniform_index(8, rng));
        const Matrix m = attention_mask(r).values;
        for (std::size_t k = 0; k < r.size(); ++k) {
            c.expect(m.data()[k] >= 0.5 && m.data()[k] <= 1.5, "mask outside [0.5, 1.5]");
            c.expect_near(m.data()[k], 0.5 + (r.data()[k] + 1.0) / 2.0, 1e-15, "mask formula");
            if (r.data()[k] == 0.0) c.expect(m.data()[k] == 1.0, "neutral relevance changed the feature");
        }
        Matrix bad = r;
        bad.data()[uniform_index(bad.size(), rng)] = 1.0 + 1e-3 + uniform(rng);
        bool threw = false;
        try {
            attention_mask(bad);
        } catch (const PreconditionError&) {
            threw = true;
        }
        c.expect(threw, "out-of-range relevance accepted");
    });
}

void check_dropout(const Matrix& f, const DropoutResult& d, double rate, CaseCheck& c) {
    const std::size_t k = drop_count(rate, f.cols());
    for (std::size_t i = 0; i < f.rows(); ++i) {
        std::size_t dropped = 0;
        double in = 0.0, out = 0.0, survivors = 0.0;
        for (std::size_t j = 0; j < f.cols(); ++j) {
            if (d.gate(i, j) == 0.0) {
                ++dropped;
            } else {
                survivors += f(i, j);
            }
            in += f(i, j);
            out += d.features(i, j);
            c.expect(d.features(i, j) == f(i, j) * d.gate(i, j), "features != input * gate");
        }
        c.expect(dropped == k, "dropped " + std::to_string(dropped) + " units, expected " + std::to_string(k));
        if (survivors != 0.0) c.expect_near(out, in, 1e-9 * std::max(1.0, in), "activation sum");
    }
}

PropertyOutcome xai_dropout_properties(std::size_t cases, std::uint64_t seed) {
    return run_cases("xai dropout drops the most relevant units and keeps sums", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t n = 1 + uniform_index(10, rng), rows = 1 + uniform_index(5, rng);
        const Matrix f = activations(rng, rows, n);
        const Matrix r = normalize_abs(random_matrix(rows, n, rng, -1.0, 1.0));
        const double rate = uniform(rng, 0.0, 0.99);
        const auto d = xai_guided_dropout(f, r, rate);
        check_dropout(f, d, rate, c);
        for (std::size_t i = 0; i < rows; ++i) {
            double min_dropped = 2.0, max_kept = -1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (d.gate(i, j) == 0.0) {
                    min_dropped = std::min(min_dropped, r(i, j));
                } else {
                    max_kept = std::max(max_kept, r(i, j));
                }
            }
            if (min_dropped <= 1.0 && max_kept >= 0.0) c.expect(min_dropped >= max_kept, "a less relevant unit was dropped");
        }
    });
}

PropertyOutcome random_dropout_properties(std::size_t cases, std::uint64_t seed) {
    return run_cases("random dropout keeps counts and sums and is reproducible", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t n = 1 + uniform_index(10, rng), rows = 1 + uniform_index(5, rng);
        const Matrix f = activations(rng, rows, n);
        const double rate = uniform(rng, 0.0, 0.99);
        const std::uint64_t s = rng();
        Rng a = make_rng(s, Stream::augmentation), b = make_rng(s, Stream::augmentation);
        const auto d1 = random_dropout(f, rate, a);
        const auto d2 = random_dropout(f, rate, b);
        check_dropout(f, d1, rate, c);
        c.expect(d1.gate == d2.gate, "same seed gave a different mask");
    });
}

PropertyOutcome masks_commute_with_sample_order(std::size_t cases, std::uint64_t seed) {
    return run_cases("feature masks commute with sample order", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t rows = 2 + uniform_index(6, rng), n = 1 + uniform_index(8, rng);
        const Matrix f = activations(rng, rows, n);
        const Matrix r = signed_norm_relevance(rng, rows, n);
        std::vector<std::size_t> perm(rows);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const Matrix fp = f.select_rows(perm), rp = r.select_rows(perm);
        const double rate = uniform(rng, 0.0, 0.99);
        c.expect(attention_mask(rp).values == attention_mask(r).values.select_rows(perm), "attention mask");
        c.expect(lrp_weighted_features(fp, rp) == lrp_weighted_features(f, r).select_rows(perm), "lrp weighting");
        c.expect(binary_relevance_mask(rp, rate, RelevanceMaskMode::zero_most_relevant).values ==
                     binary_relevance_mask(r, rate, RelevanceMaskMode::zero_most_relevant).values.select_rows(perm),
                 "binary mask");
        c.expect(xai_guided_dropout(fp, normalize_abs(rp), rate).features ==
                     xai_guided_dropout(f, normalize_abs(r), rate).features.select_rows(perm),
                 "xai dropout");
    });
}

PropertyOutcome binary_mask_counts_and_partition(std::size_t cases, std::uint64_t seed) {
    return run_cases("binary masks zero the stated count and complementary modes partition", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const std::size_t n = 1 + uniform_index(10, rng), rows = 1 + uniform_index(4, rng);
                         // distinct magnitudes: no ties
                         Matrix r(rows, n);
                         for (std::size_t i = 0; i < rows; ++i) {
                             std::vector<double> v(n);
                             std::iota(v.begin(), v.end(), 1.0);
                             std::shuffle(v.begin(), v.end(), rng);
                             for (std::size_t j = 0; j < n; ++j) v[j] *= uniform_index(2, rng) ? 1.0 : -1.0;
                             std::copy(v.begin(), v.end(), r.row(i).begin());
                         }
                         const std::size_t k = uniform_index(n + 1, rng);
                         const double frac = static_cast<double>(k) / static_cast<double>(n);
                         const auto least = binary_relevance_mask(r, frac, RelevanceMaskMode::zero_least_relevant);
                         const auto most = binary_relevance_mask(r, 1.0 - frac, RelevanceMaskMode::zero_most_relevant);
                         for (std::size_t i = 0; i < rows; ++i) {
                             std::size_t zl = 0, zm = 0;
                             for (std::size_t j = 0; j < n; ++j) {
                                 const double a = least.values(i, j), b = most.values(i, j);
                                 c.expect((a == 0.0 || a == 1.0) && (b == 0.0 || b == 1.0), "mask not binary");
                                 zl += a == 0.0;
                                 zm += b == 0.0;
                                 c.expect((a == 0.0) != (b == 0.0), "modes do not partition the coordinates");
                             }
                             c.expect(zl == k, "zero_least_relevant count");
                             c.expect(zm == n - k, "zero_most_relevant count");
                         }
                     });
}

// --------------------------------------------------------- loss_augment

GroundTruthMask random_mask(Rng& rng, std::size_t n) {
    GroundTruthMask m;
    m.values = Matrix(1, n);
    for (auto& v : m.values.data()) v = static_cast<double>(uniform_index(2, rng));
    m.semantics = uniform_index(2, rng) ? MaskSemantics::relevance_mask : MaskSemantics::irrelevance_mask;
    return m;
}

PropertyOutcome rrr_nonnegative(std::size_t cases, std::uint64_t seed) {
    return run_cases("reason loss is non-negative and zero iff forbidden relevance is zero", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const std::size_t n = 1 + uniform_index(6, rng), rows = 1 + uniform_index(4, rng);
                         const auto mask = random_mask(rng, n);
                         Matrix r = random_matrix(rows, n, rng, 0.0, 1.0);
                         for (std::size_t i = 0; i < rows; ++i) {
                             if (uniform_index(2, rng) == 0) continue;
                             const auto forb = mask.forbidden(i);
                             for (std::size_t j = 0; j < n; ++j) {
                                 if (forb[j] == 1.0) r(i, j) = 0.0;
                             }
                         }
                         const auto loss = rrr_reason_loss(r, mask);
                         for (std::size_t i = 0; i < rows; ++i) {
                             const auto forb = mask.forbidden(i);
                             bool clean = true;
                             for (std::size_t j = 0; j < n; ++j) clean = clean && (forb[j] == 0.0 || r(i, j) == 0.0);
                             c.expect(loss[i] >= 0.0, "negative reason loss");
                             c.expect((loss[i] == 0.0) == clean, "zero loss does not match clean forbidden coordinates");
                         }
                     });
}

PropertyOutcome prior_monotone_in_lambda(std::size_t cases, std::uint64_t seed) {
    return run_cases("attribution prior loss is nondecreasing in lambda", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t n = 1 + uniform_index(6, rng);
        const Matrix r = random_matrix(1, n, rng, -2.0, 2.0);
        const Matrix t = random_matrix(1, n, rng, -2.0, 2.0);
        const auto penalty = uniform_index(2, rng) ? make_penalty("l1")
                                                   : make_penalty("target_distance", t.data());
        const double pred = uniform(rng, 0.0, 3.0);
        double l1 = uniform(rng, 0.0, 5.0), l2 = uniform(rng, 0.0, 5.0);
        if (l1 > l2) std::swap(l1, l2);
        c.expect(penalty->value(r.row(0)) >= 0.0, "negative penalty");
        c.expect(attribution_prior_loss(pred, *penalty, r.row(0), l1) <=
                     attribution_prior_loss(pred, *penalty, r.row(0), l2),
                 "loss decreased with lambda");
        c.expect(attribution_prior_loss(pred, *penalty, r.row(0), 0.0) == pred, "lambda 0 changed the loss");
    });
}

PropertyOutcome dual_objective_bilinear(std::size_t cases, std::uint64_t seed) {
    return run_cases("dual objective is bilinear", cases, seed, [](Rng& rng, CaseCheck& c) {
        const double a1 = uniform(rng, 0, 2), a2 = uniform(rng, 0, 2), b1 = uniform(rng, 0.01, 2);
        const double l1 = uniform(rng, 0, 5), l2 = uniform(rng, 0, 5), l3 = uniform(rng, 0, 5);
        const double s = uniform(rng, 0, 3);
        c.expect_near(dual_objective(l1, l2, a1 + a2, b1), dual_objective(l1, l2, a1, b1) + dual_objective(l1, l2, a2, 0.0),
                      1e-12, "linear in alpha");
        c.expect_near(dual_objective(l1, l2, a1, s * b1), a1 * l1 + s * b1 * l2, 1e-12, "scaling beta");
        c.expect_near(dual_objective(l1 + l3, l2, a1, b1), dual_objective(l1, l2, a1, b1) + a1 * l3, 1e-12,
                      "linear in the original loss");
        c.expect_near(dual_objective(l1, s * l2, a1, b1), a1 * l1 + b1 * s * l2, 1e-12, "linear in the masked loss");
    });
}

/// Reason loss of the explained layer with each row divided by a fixed
/// per-row divisor (the detached max of the unperturbed net).
double detached_reason_loss(const DenseNetwork& net, const Matrix& x, const Labels& y, const AttributionMethod& m,
                            std::size_t layer, const std::vector<double>& divisor, const GroundTruthMask& mask) {
    const auto maps = explain(net, forward(net, x), y, m);
    Matrix rn = maps.at_input(layer);
    for (std::size_t i = 0; i < rn.rows(); ++i) {
        for (auto& v : rn.row(i)) v = divisor[i] > 0.0 ? std::abs(v) / divisor[i] : 0.0;
    }
    double total = 0.0;
    for (double v : rrr_reason_loss(rn, mask)) total += v;
    return total;
}

PropertyOutcome rrr_gradient_matches_fd(std::size_t cases, std::uint64_t seed) {
    return run_cases("reason loss parameter gradient matches finite differences", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         NetShape shape;
                         shape.max_layers = 3;
                         shape.max_width = 6;
                         shape.max_classes = 3;
                         const DenseNetwork net = random_net(rng, shape);
                         const Matrix x = random_batch(net, rng, 4);
                         const Labels y = random_labels(x.rows(), net.output_dim(), rng);
                         const double eps = std::array<double, 3>{kDefaultLrpEpsilon, 1e-2, 0.1}[uniform_index(3, rng)];
                         const auto method = AttributionMethod::lrp_epsilon(eps);
                         const std::size_t layer = uniform_index(net.layer_count(), rng);
                         const auto trace = forward(net, x);
                         const auto maps = explain(net, trace, y, method);
                         const Matrix& r = maps.at_input(layer);
                         const auto mask = random_mask(rng, r.cols());
                         std::vector<double> divisor(r.rows(), 0.0);
                         for (std::size_t i = 0; i < r.rows(); ++i) {
                             for (double v : r.row(i)) divisor[i] = std::max(divisor[i], std::abs(v));
                         }
                         const Matrix g = normalize_abs_backward(r, rrr_reason_loss_grad(normalize_abs(r), mask));
                         const Gradients analytic = lrp_epsilon_vjp(net, trace, maps, method, layer, g);

                         const auto loss = [&](const DenseNetwork& n) {
                             return detached_reason_loss(n, x, y, method, layer, divisor, mask);
                         };
                         // kinks: ReLU gates, stabilizer signs and |r|
                         const auto pattern = [&](const DenseNetwork& n) {
                             const auto t = forward(n, x);
                             std::vector<bool> p;
                             for (const auto& z : t.pre_activations) {
                                 for (double v : z.data()) p.push_back(v >= 0.0);
                             }
                             for (double v : explain(n, t, y, method).at_input(layer).data()) p.push_back(v >= 0.0);
                             return p;
                         };
                         std::size_t probed = 0;
                         for (int k = 0; k < 6; ++k) {
                             const ParamRef p = random_param(net, rng);
                             const auto fd = central_difference(net, p, loss, pattern);
                             if (!fd) continue;
                             ++probed;
                             const double err = relative_error(grad_of(analytic, p), *fd);
                             if (!c.expect(err < 1e-3, "regularizer gradient relative error " + std::to_string(err))) return;
                         }
                         if (probed == 0) c.skip();
                     });
}

// ----------------------------------------------------- gradient_augment

PropertyOutcome feature_gradient_mask_linear(std::size_t cases, std::uint64_t seed) {
    return run_cases("feature-gradient mask is the identity at lambda 0 and linear in grad", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const std::size_t rows = 1 + uniform_index(4, rng), n = 1 + uniform_index(8, rng);
                         const Matrix g1 = random_matrix(rows, n, rng), g2 = random_matrix(rows, n, rng);
                         const Matrix m = random_matrix(rows, n, rng, 0.0, 1.0);
                         const double lambda = uniform(rng, 0.0, 3.0), a = uniform(rng, -2, 2), b = uniform(rng, -2, 2);
                         c.expect(mask_feature_gradient(g1, m, 0.0) == g1, "lambda 0 changed the gradient");
                         Matrix combo(rows, n);
                         for (std::size_t k = 0; k < combo.size(); ++k) combo.data()[k] = a * g1.data()[k] + b * g2.data()[k];
                         const Matrix lhs = mask_feature_gradient(combo, m, lambda);
                         const Matrix m1 = mask_feature_gradient(g1, m, lambda), m2 = mask_feature_gradient(g2, m, lambda);
                         for (std::size_t k = 0; k < lhs.size(); ++k) {
                             c.expect_near(lhs.data()[k], a * m1.data()[k] + b * m2.data()[k], 1e-12, "linearity");
                         }
                     });
}

PropertyOutcome weight_importance_distribution(std::size_t cases, std::uint64_t seed) {
    return run_cases("weight importance is a scale-invariant distribution", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t in = 1 + uniform_index(6, rng), out = 1 + uniform_index(6, rng);
        const Matrix rin = random_matrix(1, in, rng, -2, 2), rout = random_matrix(1, out, rng, -2, 2);
        const auto imp = weight_importance_scores(rin.row(0), rout.row(0));
        c.expect(imp.normalized, "not flagged normalized");
        c.expect(imp.scores.rows() == out && imp.scores.cols() == in, "importance shape");
        double s = 0.0;
        for (double v : imp.scores.data()) {
            c.expect(v >= 0.0, "negative importance");
            s += v;
        }
        c.expect_near(s, 1.0, 1e-12, "importance sum");
        const double a = uniform(rng, 0.01, 10), b = uniform(rng, 0.01, 10);
        Matrix rin2 = rin, rout2 = rout;
        for (auto& v : rin2.data()) v *= a;
        for (auto& v : rout2.data()) v *= b;
        const auto imp2 = weight_importance_scores(rin2.row(0), rout2.row(0));
        c.expect(max_abs_diff(imp.scores, imp2.scores) <= 1e-12, "importance changed under rescaling");
    });
}

PropertyOutcome zero_importance_freezes_weight(std::size_t cases, std::uint64_t seed) {
    return run_cases("scaled update never moves zero-importance weights", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t in = 1 + uniform_index(6, rng), out = 1 + uniform_index(6, rng);
        Matrix rin = random_matrix(1, in, rng, -2, 2), rout = random_matrix(1, out, rng, -2, 2);
        rin(0, uniform_index(in, rng)) = 0.0;
        if (in > 1 || out > 1) rout(0, uniform_index(out, rng)) = uniform_index(2, rng) ? 0.0 : rout(0, 0);
        WeightImportance imp;
        try {
            imp = weight_importance_scores(rin.row(0), rout.row(0));
        } catch (const DegenerateImportanceError&) {
            imp = uniform_weight_importance(out, in);
            imp.scores(0, 0) = 0.0;
        }
        const Matrix w = random_matrix(out, in, rng), g = random_matrix(out, in, rng);
        const Matrix w2 = scaled_weight_update(w, g, imp, uniform(rng, 0.001, 1.0));
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (imp.scores.data()[k] == 0.0) c.expect(w2.data()[k] == w.data()[k], "frozen weight moved");
        }
    });
}

// --------------------------------------------------- data_redistribution

PropertyOutcome proportions_are_distributions(std::size_t cases, std::uint64_t seed) {
    return run_cases("class proportions are shift-invariant probability vectors", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         ClassMetricTable t;
                         t.values = random_matrix(1, 1 + uniform_index(6, rng), rng, -5, 5).data();
                         const bool higher = uniform_index(2, rng);
                         const auto p = class_proportions(t, higher);
                         double s = 0.0;
                         for (double v : p) {
                             c.expect(v > 0.0, "non-positive proportion");
                             s += v;
                         }
                         c.expect_near(s, 1.0, 1e-12, "proportions sum");
                         ClassMetricTable shifted = t;
                         const double k = uniform(rng, -10, 10);
                         for (auto& v : shifted.values) v += k;
                         const auto q = class_proportions(shifted, higher);
                         for (std::size_t i = 0; i < p.size(); ++i) c.expect_near(q[i], p[i], 1e-12, "shift invariance");
                         ClassMetricTable neg = t;
                         for (auto& v : neg.values) v = -v;
                         const auto r = class_proportions(neg, true);
                         const auto lower = class_proportions(t, false);
                         for (std::size_t i = 0; i < p.size(); ++i) c.expect_near(lower[i], r[i], 1e-12, "orientation");
                     });
}

LabeledDataset random_classes(Rng& rng, std::size_t classes) {
    Labels y;
    for (std::size_t cl = 0; cl < classes; ++cl) {
        const std::size_t n = 1 + uniform_index(12, rng);
        for (std::size_t i = 0; i < n; ++i) y.push_back(cl);
    }
    std::shuffle(y.begin(), y.end(), rng);
    return make_dataset(random_matrix(y.size(), 2, rng), y);
}

PropertyOutcome resampling_counts(std::size_t cases, std::uint64_t seed) {
    return run_cases("mini-epoch resampling returns exactly the apportioned counts", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const std::size_t classes = 2 + uniform_index(3, rng);
                         const auto data = random_classes(rng, classes);
                         std::vector<double> p(classes);
                         for (auto& v : p) v = uniform(rng, 0.0, 1.0);
                         if (uniform_index(3, rng) == 0) p[uniform_index(classes, rng)] = 0.0;
                         const std::size_t size = 1 + uniform_index(200, rng);
                         const auto counts = apportion(p, size);
                         c.expect(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == size, "apportion sum");
                         const std::uint64_t s = rng();
                         Rng a = make_rng(s, Stream::training), b = make_rng(s, Stream::training);
                         const auto idx = resample_miniepoch(data, p, size, a);
                         c.expect(idx.size() == size, "resampled size");
                         c.expect(idx == resample_miniepoch(data, p, size, b), "resampling not deterministic");
                         std::vector<std::size_t> got(classes, 0);
                         for (auto i : idx) {
                             if (!c.expect(i < data.size(), "index out of range")) return;
                             ++got[data.labels[i]];
                         }
                         c.expect(got == counts, "per-class counts differ from apportionment");
                     });
}

PropertyOutcome history_is_bounded(std::size_t cases, std::uint64_t seed) {
    return run_cases("attribution history keeps at most the last five mini-epochs", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const auto data = random_classes(rng, 2 + uniform_index(2, rng));
                         const std::size_t classes = data.num_classes();
                         RepresentativeSet reps(data, classes, 1 + uniform_index(3, rng), rng);
                         const std::size_t k = 1 + uniform_index(12, rng);
                         std::vector<Matrix> recorded;
                         for (std::size_t t = 0; t < k; ++t) {
                             recorded.push_back(random_matrix(reps.indices().size(), 3, rng));
                             reps.record(recorded.back());
                             c.expect(reps.history_size() <= RepresentativeSet::kHistoryLength, "history too long");
                         }
                         const std::size_t used = std::min<std::size_t>(k, RepresentativeSet::kHistoryLength);
                         Matrix mean(reps.indices().size(), 3);
                         for (std::size_t t = k - used; t < k; ++t) {
                             for (std::size_t e = 0; e < mean.size(); ++e) mean.data()[e] += recorded[t].data()[e] / used;
                         }
                         c.expect(max_abs_diff(reps.smoothed(), mean) <= 1e-12, "smoothed map is not the window mean");
                     });
}

PropertyOutcome balance_scale_invariance(std::size_t cases, std::uint64_t seed) {
    return run_cases("balance score is scale invariant and flags zero spread", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t n = 2 + uniform_index(5, rng);
        const Matrix perf = random_matrix(1, n, rng, 0.05, 1.0);
        const double k = uniform(rng, 0.1, 10);
        Matrix scaled = perf;
        for (auto& v : scaled.data()) v *= k;
        const auto a = balance_score(perf.row(0)), b = balance_score(scaled.row(0));
        c.expect(!a.perfectly_balanced, "spread flagged as balanced");
        c.expect_near(b.value, a.value, 1e-9 * std::max(1.0, a.value), "scale invariance");
        const std::vector<double> flat(n, perf(0, 0));
        const auto f = balance_score(flat);
        c.expect(f.perfectly_balanced && std::isinf(f.as_double()), "equal performances not flagged");
    });
}

// --------------------------------------------------------- model_augment

PropertyOutcome pruned_networks_are_valid(std::size_t cases, std::uint64_t seed) {
    return run_cases("pruning removes the lowest-scoring units and keeps a valid net", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         NetShape shape;
                         shape.min_layers = 2;
                         const DenseNetwork net = random_net(rng, shape);
                         NeuronImportance imp;
                         std::vector<std::size_t> counts;
                         for (std::size_t h = 0; h + 1 < net.layer_count(); ++h) {
                             const std::size_t w = net.layer(h).out_units();
                             imp.scores.push_back(random_matrix(1, w, rng, 0.0, 1.0).data());
                             counts.push_back(uniform_index(w, rng));
                         }
                         const auto res = prune_neurons(net, imp, counts);
                         res.network.validate();
                         for (std::size_t h = 0; h < counts.size(); ++h) {
                             c.expect(res.network.layer(h).out_units() == net.layer(h).out_units() - counts[h], "width");
                             c.expect(res.removed[h].size() == counts[h], "removed count");
                             double max_removed = -1.0, min_kept = 2.0;
                             std::set<std::size_t> removed(res.removed[h].begin(), res.removed[h].end());
                             for (std::size_t u = 0; u < imp.scores[h].size(); ++u) {
                                 if (removed.count(u)) {
                                     max_removed = std::max(max_removed, imp.scores[h][u]);
                                 } else {
                                     min_kept = std::min(min_kept, imp.scores[h][u]);
                                 }
                             }
                             if (!removed.empty()) c.expect(max_removed <= min_kept, "a higher-scoring unit was removed");
                         }
                         const Matrix x = random_batch(net, rng);
                         c.expect(forward(res.network, x).output.all_finite(), "pruned net output");
                     });
}

PropertyOutcome pruning_dead_unit_is_noop(std::size_t cases, std::uint64_t seed) {
    return run_cases("pruning a unit with zero outgoing weights leaves outputs unchanged", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         NetShape shape;
                         shape.min_layers = 2;
                         DenseNetwork net = random_net(rng, shape);
                         const std::size_t h = uniform_index(net.layer_count() - 1, rng);
                         if (net.layer(h).out_units() < 2) return c.skip();
                         const std::size_t unit = uniform_index(net.layer(h).out_units(), rng);
                         auto& next = net.layer(h + 1).weights;
                         for (std::size_t k = 0; k < next.rows(); ++k) next(k, unit) = 0.0;
                         NeuronImportance imp;
                         std::vector<std::size_t> counts(net.layer_count() - 1, 0);
                         for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
                             imp.scores.emplace_back(net.layer(l).out_units(), 1.0);
                         }
                         imp.scores[h][unit] = 0.0;
                         counts[h] = 1;
                         const auto res = prune_neurons(net, imp, counts);
                         const Matrix x = random_batch(net, rng);
                         c.expect(max_abs_diff(forward(res.network, x).output, forward(net, x).output) <= 1e-12,
                                  "outputs changed");
                     });
}

PropertyOutcome importance_mean_invariance(std::size_t cases, std::uint64_t seed) {
    return run_cases("neuron importance is non-negative and invariant to duplicated references", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         NetShape shape;
                         shape.min_layers = 2;
                         const DenseNetwork net = random_net(rng, shape);
                         const Matrix x = random_batch(net, rng);
                         const auto refs = make_dataset(x, random_labels(x.rows(), net.output_dim(), rng));
                         const auto twice = make_dataset(vstack(x, x), [&] {
                             Labels y = refs.labels;
                             y.insert(y.end(), refs.labels.begin(), refs.labels.end());
                             return y;
                         }());
                         const auto m = AttributionMethod::lrp_epsilon();
                         const auto a = neuron_importance(net, refs, m), b = neuron_importance(net, twice, m);
                         for (std::size_t h = 0; h < a.scores.size(); ++h) {
                             c.expect(a.scores[h].size() == net.layer(h).out_units(), "score length");
                             for (std::size_t u = 0; u < a.scores[h].size(); ++u) {
                                 c.expect(a.scores[h][u] >= 0.0 && std::isfinite(a.scores[h][u]), "score range");
                                 c.expect_near(b.scores[h][u], a.scores[h][u], 1e-12 * std::max(1.0, a.scores[h][u]),
                                               "duplicated references");
                             }
                         }
                     });
}

// -------------------------------------------------------------- toy_data

PropertyOutcome toy_data_structure(std::size_t cases, std::uint64_t seed) {
    return run_cases("toy generators are deterministic with the stated structure", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         const std::uint64_t s = rng();
                         const auto t1 = gen_toy1(s);
                         c.expect(t1.train.size() == 350 && t1.test.size() == 50 && t1.train.dims() == 5, "toy1 shape");
                         c.expect(dataset_to_csv(t1.train) == dataset_to_csv(gen_toy1(s).train), "toy1 determinism");
                         Toy2Params p2;
                         p2.label_noise = 0.0;
                         const auto t2 = gen_toy2(s, p2);
                         c.expect(t2.train.size() == 350 && t2.test.size() == 50 && t2.train.dims() == 4, "toy2 shape");
                         for (std::size_t i = 0; i < t2.train.size(); ++i) {
                             c.expect((t2.train.features(i, 3) > 0.0) == (t2.train.labels[i] == 1), "toy2 distractor sign");
                         }
                         c.expect(dataset_to_csv(gen_toy2(s).test) == dataset_to_csv(gen_toy2(s).test), "toy2 determinism");
                         const auto t3 = gen_toy3(s);
                         c.expect(t3.train.size() == 200 && t3.test.size() == 200 && t3.train.dims() == 2, "toy3 shape");
                         double lo = 1e300, hi = -1e300;
                         for (std::size_t i = 0; i < t3.train.size(); ++i) {
                             lo = std::min(lo, t3.train.features(i, 1));
                             hi = std::max(hi, t3.train.features(i, 1));
                         }
                         c.expect(hi > lo, "toy3 train dim 1 has no variance");
                         for (std::size_t i = 0; i < t3.test.size(); ++i) {
                             c.expect(t3.test.features(i, 1) == t3.test.features(0, 1), "toy3 test dim 1 varies");
                         }
                         const std::vector<std::size_t> counts{1 + uniform_index(300, rng), 1 + uniform_index(300, rng)};
                         const auto imb = gen_imbalanced(s, counts);
                         std::vector<std::size_t> got(2, 0);
                         for (auto y : imb.labels) ++got[y];
                         c.expect(got == counts, "imbalanced class counts");
                     });
}

// --------------------------------------------------------------- harness

ExperimentConfig small_config(Rng& rng) {
    ExperimentConfig cfg = preset(ExperimentId::toy2);
    cfg.train.iterations = 4 + uniform_index(6, rng);
    cfg.toy2.train_size = 60;
    cfg.toy2.test_size = 20;
    cfg.train.batch_size = 10;
    return cfg;
}

PropertyOutcome disabled_augmentation_is_transparent(std::size_t cases, std::uint64_t seed) {
    return run_cases("a disabled augmentation is bit-identical to no augmentation", cases, seed,
                     [](Rng& rng, CaseCheck& c) {
                         ExperimentConfig base = small_config(rng);
                         base.augmentation.family = AugmentationFamily::none;
                         ExperimentConfig off = base;
                         auto& a = off.augmentation;
                         switch (uniform_index(6, rng)) {
                             case 0: a.family = AugmentationFamily::grad_feature_mask; a.lambda = 0.0; a.layer = 1; break;
                             case 1: a.family = AugmentationFamily::xai_dropout; a.rate = 0.0; break;
                             case 2: a.family = AugmentationFamily::random_dropout; a.rate = 0.0; break;
                             case 3: a.family = AugmentationFamily::attribution_prior; a.lambda = 0.0; break;
                             case 4: a.family = AugmentationFamily::lrp_weighted; a.alpha = 1.0; a.beta = 0.0; break;
                             default:
                                 a.family = AugmentationFamily::rrr_loss;
                                 a.lambda = 0.0;
                                 a.ground_truth = {1, 1, 1, 0};
                                 break;
                         }
                         const std::uint64_t s = rng() % 1000;
                         const auto l0 = run_seed(base, s), l1 = run_seed(off, s);
                         c.expect(l0.final_network == l1.final_network, to_string(a.family) + ": final network differs");
                         c.expect(metrics_to_csv(l0) == metrics_to_csv(l1), to_string(a.family) + ": metrics differ");
                     });
}

PropertyOutcome logging_does_not_perturb(std::size_t cases, std::uint64_t seed) {
    return run_cases("attribution logging never changes training", cases, seed, [](Rng& rng, CaseCheck& c) {
        ExperimentConfig cfg = small_config(rng);
        const std::vector<AugmentationFamily> fams{AugmentationFamily::none, AugmentationFamily::random_dropout,
                                                   AugmentationFamily::xai_dropout, AugmentationFamily::attention_mask};
        cfg.augmentation.family = fams[uniform_index(fams.size(), rng)];
        const std::uint64_t s = rng() % 1000;
        RunOptions quiet;
        quiet.log_attributions = false;
        const auto a = run_seed(cfg, s), b = run_seed(cfg, s, quiet);
        c.expect(a.final_network == b.final_network, "final network differs");
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            c.expect(a.rows[i].loss == b.rows[i].loss && a.rows[i].accuracy == b.rows[i].accuracy, "logged metrics differ");
        }
    });
}

PropertyOutcome runs_are_deterministic(std::size_t cases, std::uint64_t seed) {
    return run_cases("identical config and seed give identical logs", cases, seed, [](Rng& rng, CaseCheck& c) {
        ExperimentConfig cfg = small_config(rng);
        cfg.augmentation.family = std::vector<AugmentationFamily>{
            AugmentationFamily::random_dropout, AugmentationFamily::attention_mask,
            AugmentationFamily::grad_weight_scaling, AugmentationFamily::lrp_weighted}[uniform_index(4, rng)];
        cfg.augmentation.layer = 1;
        const std::uint64_t s = rng() % 1000;
        c.expect(metrics_to_csv(run_seed(cfg, s)) == metrics_to_csv(run_seed(cfg, s)), "metrics CSV differs");
    });
}

PropertyOutcome aggregation_identities(std::size_t cases, std::uint64_t seed) {
    return run_cases("cumulative mean and seed aggregation identities", cases, seed, [](Rng& rng, CaseCheck& c) {
        const std::size_t n = 1 + uniform_index(30, rng);
        const auto series = random_matrix(1, n, rng, -5, 5).data();
        const auto cm = cumulative_mean(series);
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            s += series[t];
            c.expect_near(cm[t] * static_cast<double>(t + 1), s, 1e-9, "cumulative mean");
        }
        MetricsLog log;
        log.dims = 2;
        log.classes = 2;
        for (std::size_t t = 1; t <= 3; ++t) {
            IterationRow row;
            row.iteration = t;
            row.loss = uniform(rng, 0, 2);
            row.accuracy = uniform(rng, 0, 1);
            row.attribution = {uniform(rng), uniform(rng)};
            row.attribution_smoothed = row.attribution;
            log.rows.push_back(row);
        }
        const auto agg = aggregate_seeds({log, log, log});
        for (const auto& row : agg.rows) {
            for (const auto& [mean, sd] : row.values) c.expect(sd <= 1e-12, "identical logs gave nonzero std");
        }
        c.expect_near(agg.rows[0].values[0].first, log.rows[0].loss, 1e-12, "mean of identical logs");
    });
}

// ------------------------------------------------------------------- cli

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return cli::run_cli(args, out, err, [](const std::string&) { return std::nullopt; });
}

nlohmann::json output_hashes(const std::string& dir) {
    return cli::read_manifest(dir).at("outputs");
}

PropertyOutcome cli_is_idempotent(std::size_t cases, std::uint64_t seed) {
    const std::string root = temp_dir("cli_idem");
    auto out = run_cases("repeated CLI invocations give identical output hashes", cases, seed,
                         [&](Rng& rng, CaseCheck& c) {
                             const std::string s = std::to_string(rng() % 100000);
                             const std::string exp = std::vector<std::string>{"toy1", "toy2", "toy3", "equality"}[uniform_index(4, rng)];
                             const std::string a = root + "/a" + s, b = root + "/b" + s;
                             c.expect(cli({"gen-data", exp, "--seed", s, "--out", a}) == 0, "gen-data failed");
                             c.expect(cli({"gen-data", exp, "--seed", s, "--out", b}) == 0, "gen-data failed");
                             c.expect(output_hashes(a) == output_hashes(b), "gen-data hashes differ");
                             const auto data = gen_toy1(std::stoull(s));
                             const DenseNetwork net = build_network(std::vector<std::size_t>{5, 4, 2},
                                                                    std::vector<Activation>{Activation::relu, Activation::softmax},
                                                                    std::stoull(s));
                             save_network(net, a + "/model.json");
                             write_dataset_csv(data.test, a + "/test.csv");
                             const std::string method = std::vector<std::string>{"lrp", "gradient", "guided_backprop"}[uniform_index(3, rng)];
                             for (const auto& d : {a + "/ex1", a + "/ex2"}) {
                                 c.expect(cli({"explain", "--model", a + "/model.json", "--data", a + "/test.csv",
                                               "--method", method, "--out", d}) == 0,
                                          "explain failed");
                             }
                             c.expect(output_hashes(a + "/ex1") == output_hashes(a + "/ex2"), "explain hashes differ");
                             std::filesystem::remove_all(a);
                             std::filesystem::remove_all(b);
                         });
    std::filesystem::remove_all(root);
    return out;
}

PropertyOutcome cli_exit_codes(std::size_t cases, std::uint64_t seed) {
    const std::string root = temp_dir("cli_codes");
    const DenseNetwork net = build_network(std::vector<std::size_t>{2, 3, 2},
                                           std::vector<Activation>{Activation::relu, Activation::softmax}, 1);
    save_network(net, root + "/net2.json");
    write_dataset_csv(gen_toy1(1).test, root + "/toy1.csv");
    write_dataset_csv(gen_toy3(1).test, root + "/toy3.csv");
    auto out = run_cases("CLI exit codes follow the error class", cases, seed, [&](Rng& rng, CaseCheck& c) {
        std::string junk;
        for (std::size_t k = 0, n = 1 + uniform_index(8, rng); k < n; ++k) junk += static_cast<char>('a' + uniform_index(26, rng));
        const std::string o = root + "/o" + std::to_string(uniform_index(1000000, rng));
        std::vector<std::pair<std::vector<std::string>, int>> scenarios{
            {{"gen-data", junk + "x", "--out", o}, 2},
            {{"run", "toy1", "--augment", junk + "_", "--out", o}, 2},
            {{"run", "toy2", "--sweep", "--augment", "none", "--out", o}, 2},
            {{junk + "-cmd"}, 2},
            {{"gen-data", "toy1", "--" + junk}, 2},
            {{"explain", "--model", root + "/net2.json", "--data", root + "/toy1.csv", "--out", o}, 3},
            {{"explain", "--model", root + "/net2.json", "--data", root + "/" + junk + ".csv", "--out", o}, 3},
            {{"prune", "--model", root + "/net2.json", "--data", root + "/toy3.csv", "--count", "3", "--out", o}, 2},
            {{"prune", "--model", root + "/net2.json", "--data", root + "/toy3.csv", "--count", "1", "--fraction", "0.5"}, 2},
            {{"explain", "--model", root + "/net2.json", "--data", root + "/toy3.csv", "--out", o}, 0},
            {{"--help"}, 0},
        };
        const auto& [args, expected] = scenarios[uniform_index(scenarios.size(), rng)];
        const int code = cli(args);
        c.expect(code == expected, "exit code " + std::to_string(code) + " for '" + args[0] + " ...', expected " +
                                       std::to_string(expected));
    });
    std::filesystem::remove_all(root);
    return out;
}

}  // namespace

const std::vector<Property>& all_properties() {
    static const std::vector<Property> props{
        {"backward_matches_fd", "dense_net", backward_matches_fd},
        {"input_gradient_matches_fd", "dense_net", input_gradient_matches_fd},
        {"softmax_and_relu_ranges", "dense_net", softmax_and_relu_ranges},
        {"training_is_deterministic", "dense_net", training_is_deterministic},
        {"batch_loss_linearity", "dense_net", batch_loss_linearity},
        {"lrp_conservation", "attribution", lrp_conservation},
        {"lrp_zero_equals_grad_times_input", "attribution", lrp_zero_equals_grad_times_input},
        {"guided_zero_at_inactive", "attribution", guided_zero_at_inactive},
        {"explain_per_sample_independence", "attribution", explain_per_sample_independence},
        {"explain_is_deterministic", "attribution", explain_is_deterministic},
        {"normalization_ranges", "attribution", normalization_ranges},
        {"attention_mask_range", "feature_augment", attention_mask_range},
        {"xai_dropout_properties", "feature_augment", xai_dropout_properties},
        {"random_dropout_properties", "feature_augment", random_dropout_properties},
        {"masks_commute_with_sample_order", "feature_augment", masks_commute_with_sample_order},
        {"binary_mask_counts_and_partition", "feature_augment", binary_mask_counts_and_partition},
        {"rrr_nonnegative", "loss_augment", rrr_nonnegative},
        {"prior_monotone_in_lambda", "loss_augment", prior_monotone_in_lambda},
        {"dual_objective_bilinear", "loss_augment", dual_objective_bilinear},
        {"rrr_gradient_matches_fd", "loss_augment", rrr_gradient_matches_fd},
        {"feature_gradient_mask_linear", "gradient_augment", feature_gradient_mask_linear},
        {"weight_importance_distribution", "gradient_augment", weight_importance_distribution},
        {"zero_importance_freezes_weight", "gradient_augment", zero_importance_freezes_weight},
        {"proportions_are_distributions", "data_redistribution", proportions_are_distributions},
        {"resampling_counts", "data_redistribution", resampling_counts},
        {"history_is_bounded", "data_redistribution", history_is_bounded},
        {"balance_scale_invariance", "data_redistribution", balance_scale_invariance},
        {"pruned_networks_are_valid", "model_augment", pruned_networks_are_valid},
        {"pruning_dead_unit_is_noop", "model_augment", pruning_dead_unit_is_noop},
        {"importance_mean_invariance", "model_augment", importance_mean_invariance},
        {"toy_data_structure", "toy_data", toy_data_structure},
        {"disabled_augmentation_is_transparent", "harness", disabled_augmentation_is_transparent},
        {"logging_does_not_perturb", "harness", logging_does_not_perturb},
        {"runs_are_deterministic", "harness", runs_are_deterministic},
        {"aggregation_identities", "harness", aggregation_identities},
        {"cli_is_idempotent", "cli", cli_is_idempotent},
        {"cli_exit_codes", "cli", cli_exit_codes},
    };
    return props;
}

}  // namespace testkit
