#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xaiaug/dataset.hpp"

namespace xaiaug {

struct TrainTestSplit {
    LabeledDataset train;
    LabeledDataset test;
};

/// Two classes in an XOR layout of four Gaussian clusters over dims 0-1
/// (two clusters per class), plus standard-normal noise dims.
struct Toy1Params {
    std::size_t train_size = 350;
    std::size_t test_size = 50;
    double cluster_offset = 1.5;
    double cluster_std = 0.5;
    std::size_t noise_dims = 3;
    double label_noise = 0.10;
};

/// Dims 0-2 carry class-dependent Gaussian means; dim 3 is a distractor
/// whose sign equals the (pre-noise) class sign in train and is random in test.
struct Toy2Params {
    std::size_t train_size = 350;
    std::size_t test_size = 50;
    double informative_offset = 0.5;
    double informative_std = 1.0;
    double label_noise = 0.05;
};

/// Classes separated along dim 0. In train, dim 1 is spread over
/// [dim1_low, dim1_high] with class 0 drawn from the lower part and class 1
/// from the upper part; in test dim 1 sits at the interval midpoint.
struct Toy3Params {
    std::size_t train_size = 200;
    std::size_t test_size = 200;
    double dim0_offset = 1.0;
    double dim0_std = 0.6;
    double dim1_low = 0.0;
    double dim1_high = 4.0;
    /// Fraction of the interval where class 0 ends and class 1 begins.
    double dim1_split = 0.35;
};

/// One Gaussian cluster per class over dims 0-1 with centers placed on a
/// circle so that adjacent class means are `class_separation` stds apart;
/// remaining dims are standard-normal noise.
struct ImbalancedParams {
    double cluster_std = 1.0;
    double class_separation = 2.0;
    std::size_t noise_dims = 3;
};

TrainTestSplit gen_toy1(std::uint64_t seed, const Toy1Params& params = {});
TrainTestSplit gen_toy2(std::uint64_t seed, const Toy2Params& params = {});
TrainTestSplit gen_toy3(std::uint64_t seed, const Toy3Params& params = {});
LabeledDataset gen_imbalanced(std::uint64_t seed, const std::vector<std::size_t>& class_counts,
                              const ImbalancedParams& params = {});

/// Class means of gen_imbalanced over dims 0-1 (row c = class c).
std::vector<std::vector<double>> imbalanced_class_centers(std::size_t classes, const ImbalancedParams& params = {});

/// CSV with header dim_0,...,dim_{D-1},label,split; doubles in shortest
/// round-trip form.
std::string dataset_to_csv(const LabeledDataset& data);
void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path);
/// Reads a dataset CSV. The split column must hold a single value.
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace xaiaug
