// SPDX-License-Identifier: Apache-2.0
#include "josrc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "josrc/error.hpp"

namespace josrc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T number(std::string_view key, std::string_view value) {
  try {
    return csv::parse_number<T>(value);
  } catch (const InvalidInput&) {
    throw ValidationError(std::string(key), std::string(key) + ": '" + std::string(value) +
                                                "' is not a valid number");
  }
}

bool boolean(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError(std::string(key), std::string(key) + ": expected true or false");
}

template <typename T>
std::vector<T> number_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  for (auto item : csv::split(value)) out.push_back(number<T>(key, trim(item)));
  return out;
}

using Setter = std::function<void(ExperimentSpec&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto dbl = [](double TrainConfig::*field) -> Setter {
      return [field](ExperimentSpec& s, std::string_view k, std::string_view v) {
        s.train.*field = number<double>(k, v);
      };
    };
    auto integer = [](int TrainConfig::*field) -> Setter {
      return [field](ExperimentSpec& s, std::string_view k, std::string_view v) {
        s.train.*field = number<int>(k, v);
      };
    };
    t["run_name"] = [](ExperimentSpec& s, std::string_view, std::string_view v) {
      s.run_name = std::string(v);
    };
    t["out_dir"] = [](ExperimentSpec& s, std::string_view, std::string_view v) {
      s.out_dir = std::string(v);
    };
    t["train_csv"] = [](ExperimentSpec& s, std::string_view, std::string_view v) {
      s.dataset.train_csv = std::string(v);
    };
    t["test_csv"] = [](ExperimentSpec& s, std::string_view, std::string_view v) {
      s.dataset.test_csv = std::string(v);
    };
    t["classes"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.blobs.class_count = number<std::size_t>(k, v);
    };
    t["per_class"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.blobs.per_class = number<std::size_t>(k, v);
    };
    t["test_per_class"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.test_per_class = number<std::size_t>(k, v);
    };
    t["dim"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.blobs.dim = number<std::size_t>(k, v);
    };
    t["spread"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.blobs.spread = number<double>(k, v);
    };
    t["data_seed"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.dataset.blobs.seed = number<std::uint64_t>(k, v);
    };
    t["noise_type"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      if (v == "symmetry") {
        s.noise.noise_type = NoiseType::Symmetry;
      } else if (v == "asymmetry") {
        s.noise.noise_type = NoiseType::Asymmetry;
      } else {
        throw ValidationError(std::string(k), "noise_type must be symmetry or asymmetry");
      }
    };
    t["n_c"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.noise.closed_set_ratio = number<double>(k, v);
    };
    t["open_set"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.noise.open_set = boolean(k, v);
    };
    t["ood_classes"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.noise.ood_class_count = number<std::size_t>(k, v);
    };
    t["arms"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.arms.clear();
      for (auto item : csv::split(v)) {
        try {
          s.arms.push_back(parse_arm(trim(item)));
        } catch (const InvalidInput& e) {
          throw ValidationError(std::string(k), e.what());
        }
      }
    };
    t["seeds"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.seeds = number_list<std::uint64_t>(k, v);
    };
    t["seed"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.seeds = {number<std::uint64_t>(k, v)};
    };
    t["checkpoint_every"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.checkpoint_every = number<int>(k, v);
    };
    t["selection_dump"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.selection_dump = boolean(k, v);
    };
    t["t_max"] = integer(&TrainConfig::t_max);
    t["t_w"] = integer(&TrainConfig::t_w);
    t["decay_start_epoch"] = integer(&TrainConfig::decay_start_epoch);
    t["batch_size"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.train.batch_size = number<std::size_t>(k, v);
    };
    t["base_lr"] = dbl(&TrainConfig::base_lr);
    t["omega"] = dbl(&TrainConfig::omega);
    t["epsilon"] = dbl(&TrainConfig::epsilon);
    t["s"] = dbl(&TrainConfig::s);
    t["alpha"] = dbl(&TrainConfig::alpha);
    t["tau_c"] = dbl(&TrainConfig::tau_c);
    t["tau_m"] = dbl(&TrainConfig::tau_m);
    t["tau_ood"] = dbl(&TrainConfig::tau_ood);
    t["sigma_aug"] = dbl(&TrainConfig::sigma_aug);
    t["rho_aug"] = dbl(&TrainConfig::rho_aug);
    t["delta_js"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.train.delta_js = number<double>(k, v);
    };
    t["drop_rate"] = dbl(&TrainConfig::drop_rate);
    t["hidden"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      s.train.hidden = v.empty() ? std::vector<std::size_t>{} : number_list<std::size_t>(k, v);
    };
    t["clean_view"] = [](ExperimentSpec& s, std::string_view k, std::string_view v) {
      if (v == "first") {
        s.train.mean_view_clean = false;
      } else if (v == "mean") {
        s.train.mean_view_clean = true;
      } else {
        throw ValidationError(std::string(k), "clean_view must be first or mean");
      }
    };
    return t;
  }();
  return table;
}

void validate(const ExperimentSpec& spec) {
  spec.train.validate();
  const auto& blobs = spec.dataset.blobs;
  if (!spec.dataset.train_csv) {
    if (blobs.class_count < 2) throw ValidationError("classes", "classes must be at least 2");
    if (blobs.per_class == 0) throw ValidationError("per_class", "per_class must be positive");
    if (blobs.dim == 0) throw ValidationError("dim", "dim must be positive");
    if (!(blobs.spread >= 0.0)) throw ValidationError("spread", "spread must be >= 0");
  }
  if (!spec.dataset.test_csv && spec.dataset.test_per_class == 0) {
    throw ValidationError("test_per_class", "test_per_class must be positive");
  }
  const double n_c = spec.noise.closed_set_ratio;
  if (!(n_c > 0.0 && n_c < 1.0)) throw ValidationError("n_c", "n_c out of (0,1)");
  if (spec.noise.open_set && (spec.noise.ood_class_count < 1 ||
                              spec.noise.ood_class_count + 2 > blobs.class_count)) {
    throw ValidationError("ood_classes", "ood_classes out of [1, classes - 2]");
  }
  if (spec.arms.empty()) throw ValidationError("arms", "at least one arm is required");
  if (spec.seeds.empty()) throw ValidationError("seeds", "at least one seed is required");
  if (spec.checkpoint_every < 0) {
    throw ValidationError("checkpoint_every", "checkpoint_every must be >= 0");
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t stream) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b * 0xBF58476D1CE4E5B9ULL + stream;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t in_distribution_classes(const ExperimentSpec& spec) {
  const auto total = spec.dataset.blobs.class_count;
  return spec.noise.open_set ? total - spec.noise.ood_class_count : total;
}

std::string optional_field(const std::optional<double>& v) {
  return v ? csv::format(*v) : std::string("NA");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunOutcome run_one(const ExperimentSpec& spec, Arm arm, std::uint64_t seed) {
  RunOutcome outcome;
  outcome.arm = arm;
  outcome.seed = seed;
  try {
    const auto dir = spec.out_dir / std::string(to_string(arm)) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    const auto data = prepare_data(spec, seed);
    auto config = spec.train;
    config.seed = seed;

    std::ostringstream selection;
    if (spec.selection_dump) selection << kSelectionHeader << '\n';
    TrainObserver observer;
    if (spec.checkpoint_every > 0) {
      observer.on_epoch_end = [&](const EpochRecord& r, const MlpModel& m, const MeanTeacher& t) {
        if (r.epoch % spec.checkpoint_every != 0) return;
        const auto path = dir / ("model_epoch" + std::to_string(r.epoch) + ".bin");
        save_checkpoint(m, path);
        save_checkpoint(t.params, path.string() + ".teacher");
      };
    }
    if (spec.selection_dump) {
      observer.on_selection = [&](int epoch, std::span<const SelectionEntry> entries) {
        for (const auto& e : entries) {
          selection << epoch << ',' << e.idx << ',' << csv::format(e.p_clean) << ','
                    << csv::format(e.p_ood) << ',' << to_string(e.assigned) << ','
                    << to_string(e.provenance) << '\n';
        }
      };
    }

    auto result = train(data.train, data.test, config, arm, &observer);
    write_text(dir / "metrics.csv", metrics_csv(result.records));
    if (spec.selection_dump) write_text(dir / "selection.csv", selection.str());
    save_checkpoint(result.model, dir / "model.bin");
    save_checkpoint(result.teacher.params, dir / "model.bin.teacher");
    outcome.records = std::move(result.records);
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

}  // namespace

ExperimentSpec parse_config_text(std::string_view text) {
  ExperimentSpec spec;
  std::vector<std::string> unknown;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key before '='", line_no);
    if (value.empty()) throw ParseError("missing value for '" + std::string(key) + "'", line_no);
    const auto it = setters().find(key);
    if (it == setters().end()) {
      unknown.emplace_back(key);
      continue;
    }
    it->second(spec, key, value);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ValidationError(list, "unknown keys: " + list);
  }
  validate(spec);
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

PreparedData prepare_data(const ExperimentSpec& spec, std::uint64_t seed) {
  const std::size_t classes = in_distribution_classes(spec);
  PreparedData out;
  const auto& blobs = spec.dataset.blobs;
  if (spec.dataset.train_csv) {
    out.train = read_dataset_csv(*spec.dataset.train_csv, classes);
  } else {
    auto train_blobs = blobs;
    train_blobs.seed = mix_seed(blobs.seed, seed, 1);
    out.train = make_noisy(make_blobs(train_blobs), spec.noise, mix_seed(blobs.seed, seed, 3));
  }
  if (spec.dataset.test_csv) {
    out.test = read_labeled_csv(*spec.dataset.test_csv, classes);
  } else {
    auto test_blobs = blobs;
    test_blobs.per_class = spec.dataset.test_per_class;
    test_blobs.seed = mix_seed(blobs.seed, seed, 2);
    out.test = in_distribution_subset(make_blobs(test_blobs), classes);
  }
  return out;
}

std::string metrics_csv(std::span<const EpochRecord> records) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << csv::format(r.lr) << ',' << csv::format(r.tau_clean) << ','
        << r.n_clean << ',' << r.n_id << ',' << r.n_ood << ',' << optional_field(r.precision.clean)
        << ',' << optional_field(r.precision.id) << ',' << optional_field(r.precision.ood) << ','
        << csv::format(r.loss_c) << ',' << csv::format(r.loss_o) << ','
        << csv::format(r.loss_total) << ',' << csv::format(r.test_acc) << '\n';
  }
  return out.str();
}

unsigned thread_budget() {
  unsigned budget = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("JOSRC_THREADS")) {
    try {
      const auto requested = csv::parse_number<unsigned>(trim(env));
      if (requested > 0) budget = requested;
    } catch (const InvalidInput&) {
      // ignore malformed values
    }
  }
  return budget;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  std::filesystem::create_directories(spec.out_dir);

  struct Task {
    Arm arm;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (auto arm : spec.arms) {
    for (auto seed : spec.seeds) tasks.push_back({arm, seed});
  }

  ExperimentOutcome outcome;
  outcome.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      outcome.runs[k] = run_one(spec, tasks[k].arm, tasks[k].seed);
    }
  };
  const auto workers = std::min<std::size_t>(thread_budget(), tasks.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  std::ostringstream summary;
  summary << kSummaryHeader << '\n';
  bool all_ok = true;
  for (auto arm : spec.arms) {
    std::vector<WindowStats> per_seed;
    bool arm_ok = true;
    for (const auto& run : outcome.runs) {
      if (run.arm != arm) continue;
      arm_ok = arm_ok && run.ok;
      if (run.ok) per_seed.push_back(final_window_accuracy(run.records));
    }
    all_ok = all_ok && arm_ok;
    WindowStats stats;
    if (per_seed.size() == 1) {
      stats = per_seed.front();
    } else if (!per_seed.empty()) {
      for (const auto& s : per_seed) stats.mean += s.mean;
      stats.mean /= static_cast<double>(per_seed.size());
      double var = 0.0;
      for (const auto& s : per_seed) var += (s.mean - stats.mean) * (s.mean - stats.mean);
      stats.stddev = std::sqrt(var / static_cast<double>(per_seed.size()));
    }
    summary << to_string(arm) << ',' << (arm_ok ? "ok" : "failed") << ',' << per_seed.size()
            << ',' << (per_seed.empty() ? "NA" : csv::format(stats.mean)) << ','
            << (per_seed.empty() ? "NA" : csv::format(stats.stddev)) << '\n';
  }
  write_text(spec.out_dir / "summary.csv", summary.str());
  outcome.exit_status = all_ok ? 0 : 1;
  return outcome;
}

}  // namespace josrc
