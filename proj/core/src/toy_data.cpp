#include "xaiaug/toy_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "xaiaug/rng.hpp"

namespace xaiaug {

namespace {

// Reassigns exactly round(fraction * n) labels to a uniformly drawn class.
void apply_label_noise(Labels& labels, double fraction, std::size_t classes, Rng& rng) {
    const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(labels.size())));
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(count), rng);
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    for (auto i : chosen) labels[i] = pick(rng);
}

TrainTestSplit split_rows(const Matrix& features, const Labels& labels, std::size_t train_size) {
    std::vector<std::size_t> train_idx(train_size), test_idx(labels.size() - train_size);
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    std::iota(test_idx.begin(), test_idx.end(), train_size);
    LabeledDataset all{features, labels, Split::train};
    TrainTestSplit out{all.subset(train_idx), all.subset(test_idx)};
    out.test.split = Split::test;
    return out;
}

// Balanced class assignment, shuffled.
Labels balanced_labels(std::size_t n, std::size_t classes, Rng& rng) {
    Labels labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % classes;
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

}  // namespace

TrainTestSplit gen_toy1(std::uint64_t seed, const Toy1Params& p) {
    Rng rng = make_rng(seed, Stream::data);
    const std::size_t n = p.train_size + p.test_size;
    const std::size_t dims = 2 + p.noise_dims;
    std::normal_distribution<double> cluster(0.0, p.cluster_std), noise(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    Labels labels = balanced_labels(n, 2, rng);
    Matrix x(n, dims);
    for (std::size_t i = 0; i < n; ++i) {
        // XOR layout: class 0 in quadrants (+,+),(-,-); class 1 in (+,-),(-,+).
        const double s0 = coin(rng) ? 1.0 : -1.0;
        const double s1 = labels[i] == 0 ? s0 : -s0;
        x(i, 0) = s0 * p.cluster_offset + cluster(rng);
        x(i, 1) = s1 * p.cluster_offset + cluster(rng);
        for (std::size_t d = 2; d < dims; ++d) x(i, d) = noise(rng);
    }
    apply_label_noise(labels, p.label_noise, 2, rng);
    return split_rows(x, labels, p.train_size);
}

TrainTestSplit gen_toy2(std::uint64_t seed, const Toy2Params& p) {
    Rng rng = make_rng(seed, Stream::data);
    const std::size_t n = p.train_size + p.test_size;
    std::normal_distribution<double> informative(0.0, p.informative_std), noise(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    Labels labels = balanced_labels(n, 2, rng);
    Matrix x(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = labels[i] == 1 ? 1.0 : -1.0;
        for (std::size_t d = 0; d < 3; ++d) x(i, d) = sign * p.informative_offset + informative(rng);
        const double magnitude = std::abs(noise(rng));
        const bool is_train = i < p.train_size;
        const double distractor_sign = is_train ? sign : (coin(rng) ? 1.0 : -1.0);
        x(i, 3) = distractor_sign * magnitude;
    }
    apply_label_noise(labels, p.label_noise, 2, rng);
    return split_rows(x, labels, p.train_size);
}

TrainTestSplit gen_toy3(std::uint64_t seed, const Toy3Params& p) {
    if (!(p.dim1_high > p.dim1_low) || !(p.dim1_split > 0.0 && p.dim1_split < 1.0)) {
        throw ConfigError("toy3: invalid dim-1 interval");
    }
    Rng rng = make_rng(seed, Stream::data);
    const std::size_t n = p.train_size + p.test_size;
    std::normal_distribution<double> along(0.0, p.dim0_std);
    const double cut = p.dim1_low + p.dim1_split * (p.dim1_high - p.dim1_low);
    std::uniform_real_distribution<double> lower(p.dim1_low, cut), upper(cut, p.dim1_high);
    const double midpoint = 0.5 * (p.dim1_low + p.dim1_high);
    Labels train_labels = balanced_labels(p.train_size, 2, rng);
    Labels test_labels = balanced_labels(p.test_size, 2, rng);
    Labels labels = train_labels;
    labels.insert(labels.end(), test_labels.begin(), test_labels.end());
    Matrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = labels[i] == 1 ? 1.0 : -1.0;
        x(i, 0) = sign * p.dim0_offset + along(rng);
        if (i < p.train_size) {
            x(i, 1) = labels[i] == 0 ? lower(rng) : upper(rng);
        } else {
            x(i, 1) = midpoint;
        }
    }
    return split_rows(x, labels, p.train_size);
}

std::vector<std::vector<double>> imbalanced_class_centers(std::size_t classes, const ImbalancedParams& p) {
    std::vector<std::vector<double>> centers(classes, std::vector<double>(2, 0.0));
    if (classes < 2) return centers;
    // Adjacent vertices of a regular polygon of radius R are 2 R sin(pi/C) apart.
    const double distance = p.class_separation * p.cluster_std;
    const double radius = distance / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
    for (std::size_t c = 0; c < classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
        centers[c] = {radius * std::cos(angle), radius * std::sin(angle)};
    }
    return centers;
}

LabeledDataset gen_imbalanced(std::uint64_t seed, const std::vector<std::size_t>& class_counts,
                              const ImbalancedParams& p) {
    if (class_counts.size() < 2) throw ConfigError("gen_imbalanced needs at least two classes");
    for (auto c : class_counts) {
        if (c == 0) throw ConfigError("gen_imbalanced: every class needs a positive count");
    }
    Rng rng = make_rng(seed, Stream::data);
    const auto centers = imbalanced_class_centers(class_counts.size(), p);
    const std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
    Labels labels;
    labels.reserve(n);
    for (std::size_t c = 0; c < class_counts.size(); ++c) labels.insert(labels.end(), class_counts[c], c);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::normal_distribution<double> cluster(0.0, p.cluster_std), noise(0.0, 1.0);
    Matrix x(n, 2 + p.noise_dims);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = centers[labels[i]][0] + cluster(rng);
        x(i, 1) = centers[labels[i]][1] + cluster(rng);
        for (std::size_t d = 2; d < x.cols(); ++d) x(i, d) = noise(rng);
    }
    return {std::move(x), std::move(labels), Split::train};
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw NumericError("cannot format value");
    return std::string(buf, end);
}

std::string dataset_to_csv(const LabeledDataset& data) {
    std::string out;
    for (std::size_t d = 0; d < data.dims(); ++d) out += "dim_" + std::to_string(d) + ",";
    out += "label,split\n";
    const std::string split = to_string(data.split);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) out += format_double(v) + ",";
        out += std::to_string(data.labels[i]) + "," + split + "\n";
    }
    return out;
}

void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << dataset_to_csv(data);
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
    }
    return v;
}

}  // namespace

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "split") {
        throw DataError(path.string() + ": header must end with label,split");
    }
    const std::size_t dims = header.size() - 2;
    for (std::size_t d = 0; d < dims; ++d) {
        if (header[d] != "dim_" + std::to_string(d)) throw DataError(path.string() + ": unexpected column " + header[d]);
    }
    std::vector<double> values;
    Labels labels;
    std::string split_name;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) throw DataError("line " + std::to_string(line_no) + ": wrong field count");
        for (std::size_t d = 0; d < dims; ++d) values.push_back(parse_double(fields[d], line_no));
        const double label = parse_double(fields[dims], line_no);
        if (label < 0.0 || label != std::floor(label)) throw DataError("line " + std::to_string(line_no) + ": bad label");
        labels.push_back(static_cast<std::size_t>(label));
        if (split_name.empty()) split_name = fields.back();
        if (fields.back() != split_name) throw DataError(path.string() + ": mixed splits in one file");
    }
    LabeledDataset data{Matrix(labels.size(), dims, std::move(values)), std::move(labels),
                        split_name.empty() ? Split::train : split_from_string(split_name)};
    data.validate();
    return data;
}

}  // namespace xaiaug
