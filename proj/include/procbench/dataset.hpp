#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "procbench/config.hpp"
#include "procbench/sim_core.hpp"

namespace procbench {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetMeta {
  std::string env_name;
  std::string baseline_name;
  std::size_t trajectory_count = 0;
  std::size_t a_dim = 0;
  std::size_t o_dim = 0;
  int max_steps = 0;
  double error_reward = 0.0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  std::uint64_t seed = 0;
  int format_version = kDatasetFormatVersion;
  // Whether error_reward <= r_min * max_steps was verified for the source env.
  bool error_reward_checked = false;
  // Reward statistics are taken over individual steps, not episode returns.
  std::string reward_statistic = "per_step";
};

Json to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const Json& j);

// obs is the observation the action was taken from.
struct Transition {
  std::size_t episode_id = 0;
  int step = 0;
  Vector obs;
  Vector action;
  double reward = 0.0;
  bool terminal = false;
  bool timeout = false;

  bool operator==(const Transition&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Transition> rows;
};

// Append-only sink. Each episode starts at step 0 with a fresh id; a row with
// terminal or timeout closes its episode.
class DatasetRecorder {
 public:
  explicit DatasetRecorder(DatasetMeta meta);

  // Throws DimMismatch on wrong obs/action sizes and InvalidArgument on
  // ordering violations or rewards below error_reward.
  void record(const Transition& t);
  bool episode_open() const { return open_; }
  const Dataset& dataset() const { return data_; }
  // Fills trajectory_count and reward statistics; throws InvalidArgument if
  // an episode is still open.
  Dataset finish() &&;

 private:
  Dataset data_;
  bool open_ = false;
  bool any_ = false;
};

struct DatasetStats {
  double reward_mean = 0.0;
  double reward_std = 0.0;  // population
  double success_rate = 0.0;
  std::size_t episodes = 0;
  std::size_t rows = 0;
};

// Per-step mean/std over all rows; an episode fails when its closing row is a
// terminal carrying error_reward. Throws EmptyDataset.
DatasetStats compute_stats(const Dataset& d);

// Writes dir/meta.json and dir/data.csv (created if missing).
void write_dataset(const std::string& dir, const Dataset& d);
// Throws FormatVersionMismatch, CorruptRow or Io.
Dataset read_dataset(const std::string& dir);

std::string csv_header(std::size_t o_dim, std::size_t a_dim);

}  // namespace procbench
