// SPDX-License-Identifier: Apache-2.0
#include "josrc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "csv_util.hpp"
#include "josrc/error.hpp"

namespace josrc {

namespace {

void check_ratio(double n_c, const char* what) {
  if (!(n_c > 0.0 && n_c < 1.0)) {
    throw InvalidInput(std::string(what) + ": noise ratio must lie in (0,1)");
  }
}

// Corrupts round(n_c * |pool|) members of pool in place; labels live in [0, classes).
void corrupt_pool(std::span<const std::size_t> pool, double n_c, NoiseType type,
                  std::size_t classes, Rng& rng, NoisyDataset& out) {
  if (classes < 2) throw InvalidInput("corruption needs at least two classes");
  std::vector<std::size_t> order(pool.begin(), pool.end());
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t k = corruption_count(n_c, order.size());
  std::uniform_int_distribution<int> other(0, static_cast<int>(classes) - 2);
  for (std::size_t j = 0; j < k; ++j) {
    const auto i = order[j];
    const int truth = out.truth.true_labels[i];
    int label = 0;
    if (type == NoiseType::Symmetry) {
      label = other(rng);
      if (label >= truth) ++label;
    } else {
      label = (truth + 1) % static_cast<int>(classes);
    }
    out.given_labels[i] = label;
    out.truth.provenance[i] = Provenance::IdNoisy;
  }
}

NoisyDataset clean_copy(const RawDataset& raw, std::size_t classes) {
  NoisyDataset out;
  out.features = raw.features;
  out.given_labels = raw.true_labels;
  out.class_count = classes;
  out.truth.true_labels = raw.true_labels;
  out.truth.provenance.assign(raw.size(), Provenance::Clean);
  return out;
}

NoisyDataset corrupt_closed(const RawDataset& dataset, double n_c, NoiseType type,
                            std::uint64_t seed, const char* what) {
  check_ratio(n_c, what);
  auto out = clean_copy(dataset, dataset.class_count);
  std::vector<std::size_t> pool(dataset.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  corrupt_pool(pool, n_c, type, dataset.class_count, rng, out);
  return out;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Clean: return "clean";
    case Provenance::IdNoisy: return "id";
    case Provenance::OodNoisy: return "ood";
  }
  return "clean";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "clean") return Provenance::Clean;
  if (text == "id") return Provenance::IdNoisy;
  if (text == "ood") return Provenance::OodNoisy;
  throw InvalidInput("unknown provenance '" + std::string(text) + "'");
}

std::size_t NoisyDataset::count(Provenance p) const {
  return static_cast<std::size_t>(
      std::count(truth.provenance.begin(), truth.provenance.end(), p));
}

Matrix blob_means(std::size_t class_count, std::size_t dim) {
  Matrix means(class_count, dim);
  if (class_count <= dim) {
    for (std::size_t k = 0; k < class_count; ++k) means(k, k) = kBlobRadius;
  } else if (class_count <= 2 * dim) {
    for (std::size_t k = 0; k < class_count; ++k) {
      means(k, k % dim) = k < dim ? kBlobRadius : -kBlobRadius;
    }
  } else {
    // Adjacent chord matches the simplex spacing radius * sqrt(2).
    const double angle = std::numbers::pi / static_cast<double>(class_count);
    const double radius = kBlobRadius * std::numbers::sqrt2 / (2.0 * std::sin(angle));
    for (std::size_t k = 0; k < class_count; ++k) {
      const double theta = 2.0 * angle * static_cast<double>(k);
      means(k, 0) = radius * std::cos(theta);
      if (dim > 1) means(k, 1) = radius * std::sin(theta);
    }
  }
  return means;
}

RawDataset make_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                      double spread, std::uint64_t seed) {
  return make_blobs(BlobSpec{.class_count = class_count,
                             .per_class = per_class,
                             .dim = dim,
                             .spread = spread,
                             .seed = seed});
}

RawDataset make_blobs(const BlobSpec& spec) {
  if (spec.class_count == 0 || spec.per_class == 0 || spec.dim == 0) {
    throw InvalidInput("make_blobs: counts must be positive");
  }
  if (!(spec.spread >= 0.0)) throw InvalidInput("make_blobs: negative spread");
  const auto means = blob_means(spec.class_count, spec.dim);
  RawDataset out;
  out.class_count = spec.class_count;
  out.generator = spec;
  out.features = Matrix(spec.class_count * spec.per_class, spec.dim);
  out.true_labels.reserve(spec.class_count * spec.per_class);
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t i = 0;
  for (std::size_t k = 0; k < spec.class_count; ++k) {
    for (std::size_t s = 0; s < spec.per_class; ++s, ++i) {
      auto row = out.features.row(i);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        row[d] = means(k, d) + spec.spread * noise(rng);
      }
      out.true_labels.push_back(static_cast<int>(k));
    }
  }
  return out;
}

std::size_t corruption_count(double n_c, std::size_t n) {
  return static_cast<std::size_t>(std::llround(n_c * static_cast<double>(n)));
}

NoisyDataset corrupt_symmetric(const RawDataset& dataset, double n_c, std::uint64_t seed) {
  return corrupt_closed(dataset, n_c, NoiseType::Symmetry, seed, "corrupt_symmetric");
}

NoisyDataset corrupt_asymmetric(const RawDataset& dataset, double n_c, std::uint64_t seed) {
  return corrupt_closed(dataset, n_c, NoiseType::Asymmetry, seed, "corrupt_asymmetric");
}

NoisyDataset make_open_set(const RawDataset& raw, const NoiseSpec& spec, std::uint64_t seed) {
  if (!spec.open_set) throw InvalidInput("make_open_set: spec is closed-set");
  if (spec.ood_class_count < 1 || spec.ood_class_count >= raw.class_count) {
    throw InvalidInput("make_open_set: ood_class_count must lie in [1, C_total)");
  }
  check_ratio(spec.closed_set_ratio, "make_open_set");
  const std::size_t classes = raw.class_count - spec.ood_class_count;
  auto out = clean_copy(raw, classes);
  Rng rng(seed);
  std::uniform_int_distribution<int> any_label(0, static_cast<int>(classes) - 1);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (static_cast<std::size_t>(raw.true_labels[i]) >= classes) {
      out.given_labels[i] = any_label(rng);
      out.truth.provenance[i] = Provenance::OodNoisy;
    } else {
      pool.push_back(i);
    }
  }
  corrupt_pool(pool, spec.closed_set_ratio, spec.noise_type, classes, rng, out);
  return out;
}

NoisyDataset make_noisy(const RawDataset& raw, const NoiseSpec& spec, std::uint64_t seed) {
  if (spec.open_set) return make_open_set(raw, spec, seed);
  return spec.noise_type == NoiseType::Symmetry
             ? corrupt_symmetric(raw, spec.closed_set_ratio, seed)
             : corrupt_asymmetric(raw, spec.closed_set_ratio, seed);
}

LabeledSet in_distribution_subset(const RawDataset& raw, std::size_t class_count) {
  LabeledSet out;
  out.class_count = class_count;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (static_cast<std::size_t>(raw.true_labels[i]) < class_count) keep.push_back(i);
  }
  out.features = Matrix(keep.size(), raw.features.cols());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    std::ranges::copy(raw.features.row(keep[j]), out.features.row(j).begin());
    out.labels.push_back(raw.true_labels[keep[j]]);
  }
  return out;
}

ViewPair augment(std::span<const double> x, Rng& rng, const AugmentConfig& config,
                 std::size_t source_index) {
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::bernoulli_distribution keep(1.0 - config.rho);
  auto draw = [&] {
    std::vector<double> v(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double noisy = config.sigma > 0.0 ? x[j] + config.sigma * jitter(rng) : x[j];
      const bool kept = config.rho > 0.0 ? keep(rng) : true;
      v[j] = kept ? noisy : 0.0;
    }
    return v;
  };
  ViewPair pair;
  pair.v = draw();
  pair.v_prime = draw();
  pair.source_index = source_index;
  return pair;
}

namespace {

void write_rows(const Matrix& features, std::span<const int> given, std::span<const int> truth,
                std::span<const Provenance> provenance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "idx";
  for (std::size_t d = 0; d < features.cols(); ++d) out << ",feat_" << d;
  out << ",given_label,true_label,provenance\n";
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << i;
    for (double v : features.row(i)) out << ',' << csv::format(v);
    out << ',' << given[i] << ',' << truth[i] << ',' << to_string(provenance[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct CsvRows {
  Matrix features;
  std::vector<int> given;
  std::vector<int> truth;
  std::vector<Provenance> provenance;
};

CsvRows read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty file");
  const auto header = csv::split(line);
  if (header.size() < 5 || header.front() != "idx" || header.back() != "provenance") {
    throw InvalidInput(path.string() + ": unexpected header");
  }
  const std::size_t dim = header.size() - 4;
  std::vector<double> values;
  CsvRows rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw InvalidInput(path.string() + ": wrong field count on line " +
                         std::to_string(line_no));
    }
    for (std::size_t d = 0; d < dim; ++d) values.push_back(csv::parse_number<double>(fields[1 + d]));
    rows.given.push_back(csv::parse_number<int>(fields[dim + 1]));
    rows.truth.push_back(csv::parse_number<int>(fields[dim + 2]));
    rows.provenance.push_back(parse_provenance(fields[dim + 3]));
  }
  rows.features = Matrix(rows.given.size(), dim);
  std::ranges::copy(values, rows.features.data().begin());
  return rows;
}

}  // namespace

void write_dataset_csv(const NoisyDataset& data, const std::filesystem::path& path) {
  write_rows(data.features, data.given_labels, data.truth.true_labels, data.truth.provenance,
             path);
}

void write_dataset_csv(const LabeledSet& data, const std::filesystem::path& path) {
  const std::vector<Provenance> clean(data.size(), Provenance::Clean);
  write_rows(data.features, data.labels, data.labels, clean, path);
}

NoisyDataset read_dataset_csv(const std::filesystem::path& path, std::size_t class_count) {
  auto rows = read_rows(path);
  for (int label : rows.given) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw InvalidInput(path.string() + ": given_label outside [0, C)");
    }
  }
  NoisyDataset out;
  out.features = std::move(rows.features);
  out.given_labels = std::move(rows.given);
  out.class_count = class_count;
  out.truth.true_labels = std::move(rows.truth);
  out.truth.provenance = std::move(rows.provenance);
  return out;
}

LabeledSet read_labeled_csv(const std::filesystem::path& path, std::size_t class_count) {
  const auto rows = read_rows(path);
  LabeledSet out;
  out.class_count = class_count;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows.truth.size(); ++i) {
    const bool in_range =
        rows.truth[i] >= 0 && static_cast<std::size_t>(rows.truth[i]) < class_count;
    if (rows.provenance[i] != Provenance::OodNoisy && in_range) keep.push_back(i);
  }
  out.features = Matrix(keep.size(), rows.features.cols());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    std::ranges::copy(rows.features.row(keep[j]), out.features.row(j).begin());
    out.labels.push_back(rows.truth[keep[j]]);
  }
  return out;
}

}  // namespace josrc
