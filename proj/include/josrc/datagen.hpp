// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "josrc/types.hpp"

namespace josrc {

/// Gaussian blob generator parameters. Class means sit on the vertices of a
/// scaled simplex (dim >= classes), a scaled cross-polytope (classes <= 2*dim),
/// or a circle in the first two coordinates otherwise.
struct BlobSpec {
  std::size_t class_count = 10;
  std::size_t per_class = 100;
  std::size_t dim = 16;
  double spread = 0.5;
  std::uint64_t seed = 0;
};

/// Norm of the class means in the simplex and cross-polytope layouts. Every
/// layout keeps neighbouring means at least kBlobRadius * sqrt(2) apart.
inline constexpr double kBlobRadius = 2.0;

struct RawDataset {
  Matrix features;
  std::vector<int> true_labels;
  std::size_t class_count = 0;
  BlobSpec generator;

  std::size_t size() const noexcept { return true_labels.size(); }
};

enum class NoiseType { Symmetry, Asymmetry };

struct NoiseSpec {
  NoiseType noise_type = NoiseType::Symmetry;
  double closed_set_ratio = 0.5;
  bool open_set = true;
  std::size_t ood_class_count = 2;
};

enum class Provenance { Clean, IdNoisy, OodNoisy };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

/// Evaluation-only ground truth. Training code never reads it.
struct GroundTruth {
  std::vector<int> true_labels;
  std::vector<Provenance> provenance;
};

struct NoisyDataset {
  Matrix features;
  std::vector<int> given_labels;
  std::size_t class_count = 0;  ///< in-distribution classes
  GroundTruth truth;

  std::size_t size() const noexcept { return given_labels.size(); }
  std::size_t count(Provenance p) const;
};

/// Held-out set labelled with true in-distribution classes.
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

RawDataset make_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                      double spread, std::uint64_t seed);
RawDataset make_blobs(const BlobSpec& spec);

/// Class means used by make_blobs, one row per class.
Matrix blob_means(std::size_t class_count, std::size_t dim);

/// Number of samples corrupted at ratio n_c out of n (nearest integer).
std::size_t corruption_count(double n_c, std::size_t n);

/// Closed-set corruption: round(n_c * N) uniformly chosen samples get a
/// label drawn uniformly from the other C - 1 classes.
NoisyDataset corrupt_symmetric(const RawDataset& dataset, double n_c, std::uint64_t seed);

/// Closed-set corruption: the chosen samples get (true_label + 1) mod C.
NoisyDataset corrupt_asymmetric(const RawDataset& dataset, double n_c, std::uint64_t seed);

/// The last ood_class_count classes become OOD samples with uniformly drawn
/// labels in [0, C); the remaining samples are corrupted per spec.noise_type
/// at ratio n_c over C = C_total - ood_class_count classes.
NoisyDataset make_open_set(const RawDataset& raw, const NoiseSpec& spec, std::uint64_t seed);

/// Dispatches to make_open_set or the closed-set corruption for spec.noise_type.
NoisyDataset make_noisy(const RawDataset& raw, const NoiseSpec& spec, std::uint64_t seed);

/// Keeps only samples whose true class is below class_count.
LabeledSet in_distribution_subset(const RawDataset& raw, std::size_t class_count);

struct AugmentConfig {
  double sigma = 0.1;  ///< additive Gaussian jitter
  double rho = 0.1;    ///< coordinate dropout rate
};

/// Two independent draws of x_j -> b_j * (x_j + sigma * n_j), b_j ~ Bernoulli(1 - rho).
ViewPair augment(std::span<const double> x, Rng& rng, const AugmentConfig& config = {},
                 std::size_t source_index = 0);

// Dataset CSV: idx,feat_0..feat_{D-1},given_label,true_label,provenance
void write_dataset_csv(const NoisyDataset& data, const std::filesystem::path& path);
NoisyDataset read_dataset_csv(const std::filesystem::path& path, std::size_t class_count);

/// Held-out sets are written with given_label = true_label and provenance clean.
void write_dataset_csv(const LabeledSet& data, const std::filesystem::path& path);
LabeledSet read_labeled_csv(const std::filesystem::path& path, std::size_t class_count);

}  // namespace josrc
