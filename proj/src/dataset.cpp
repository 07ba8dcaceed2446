#include "procbench/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "procbench/error.hpp"

namespace procbench {

namespace {

void put_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

double parse_number(const std::string& field, std::size_t line) {
  if (field.empty()) throw Error(Errc::CorruptRow, "empty field on line " + std::to_string(line));
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || (errno == ERANGE && std::isinf(v))) {
    throw Error(Errc::CorruptRow, "bad number '" + field + "' on line " + std::to_string(line));
  }
  return v;
}

template <typename T>
T parse_integer(const std::string& field, std::size_t line) {
  const double v = parse_number(field, line);
  if (v < 0.0 || v != std::floor(v)) throw Error(Errc::CorruptRow, "bad integer on line " + std::to_string(line));
  return static_cast<T>(v);
}

bool parse_flag(const std::string& field, std::size_t line) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw Error(Errc::CorruptRow, "flag must be 0 or 1 on line " + std::to_string(line));
}

}  // namespace

Json to_json(const DatasetMeta& m) {
  return Json{{"env_name", m.env_name},
              {"baseline_name", m.baseline_name},
              {"trajectory_count", m.trajectory_count},
              {"a_dim", m.a_dim},
              {"o_dim", m.o_dim},
              {"max_steps", m.max_steps},
              {"error_reward", m.error_reward},
              {"reward_mean", m.reward_mean},
              {"reward_std", m.reward_std},
              {"seed", m.seed},
              {"format_version", m.format_version},
              {"error_reward_checked", m.error_reward_checked},
              {"reward_statistic", m.reward_statistic}};
}

DatasetMeta meta_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::CorruptRow, "meta.json is not an object");
  DatasetMeta m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw Error(Errc::FormatVersionMismatch, "dataset format " + std::to_string(m.format_version) + ", expected " +
                                                   std::to_string(kDatasetFormatVersion));
    }
    m.env_name = j.at("env_name").get<std::string>();
    m.baseline_name = j.at("baseline_name").get<std::string>();
    m.trajectory_count = j.at("trajectory_count").get<std::size_t>();
    m.a_dim = j.at("a_dim").get<std::size_t>();
    m.o_dim = j.at("o_dim").get<std::size_t>();
    m.max_steps = j.at("max_steps").get<int>();
    m.error_reward = j.at("error_reward").get<double>();
    m.reward_mean = j.at("reward_mean").get<double>();
    m.reward_std = j.at("reward_std").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.error_reward_checked = j.at("error_reward_checked").get<bool>();
    m.reward_statistic = j.at("reward_statistic").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptRow, std::string("meta.json: ") + e.what());
  }
  if (j.size() != to_json(m).size()) throw Error(Errc::CorruptRow, "meta.json has unexpected keys");
  return m;
}

DatasetRecorder::DatasetRecorder(DatasetMeta meta) { data_.meta = std::move(meta); }

void DatasetRecorder::record(const Transition& t) {
  const DatasetMeta& m = data_.meta;
  if (t.obs.size() != m.o_dim || t.action.size() != m.a_dim) {
    throw Error(Errc::DimMismatch, "transition has obs " + std::to_string(t.obs.size()) + ", action " +
                                       std::to_string(t.action.size()) + "; expected " + std::to_string(m.o_dim) +
                                       ", " + std::to_string(m.a_dim));
  }
  if (!std::isfinite(t.reward) || t.reward < m.error_reward) {
    throw Error(Errc::InvalidArgument, "reward below error_reward or not finite");
  }
  if (open_) {
    const Transition& prev = data_.rows.back();
    if (t.episode_id != prev.episode_id || t.step != prev.step + 1) {
      throw Error(Errc::InvalidArgument, "episode " + std::to_string(prev.episode_id) + " is still open");
    }
  } else {
    if (t.step != 0) throw Error(Errc::InvalidArgument, "a new episode must start at step 0");
    if (any_ && t.episode_id <= data_.rows.back().episode_id) {
      throw Error(Errc::InvalidArgument, "episode ids must increase; the previous episode is closed");
    }
  }
  if (m.max_steps > 0 && t.step >= m.max_steps) throw Error(Errc::InvalidArgument, "step beyond max_steps");
  data_.rows.push_back(t);
  open_ = !(t.terminal || t.timeout);
  any_ = true;
}

Dataset DatasetRecorder::finish() && {
  if (open_) throw Error(Errc::InvalidArgument, "last episode was not closed");
  std::size_t episodes = 0;
  for (const Transition& t : data_.rows) episodes += t.step == 0 ? 1 : 0;
  data_.meta.trajectory_count = episodes;
  if (!data_.rows.empty()) {
    const DatasetStats s = compute_stats(data_);
    data_.meta.reward_mean = s.reward_mean;
    data_.meta.reward_std = s.reward_std;
  } else {
    data_.meta.reward_mean = 0.0;
    data_.meta.reward_std = 0.0;
  }
  return std::move(data_);
}

DatasetStats compute_stats(const Dataset& d) {
  if (d.rows.empty()) throw Error(Errc::EmptyDataset, "no rows");
  DatasetStats s;
  s.rows = d.rows.size();
  double sum = 0.0;
  for (const Transition& t : d.rows) sum += t.reward;
  s.reward_mean = sum / static_cast<double>(s.rows);
  double ss = 0.0;
  for (const Transition& t : d.rows) ss += (t.reward - s.reward_mean) * (t.reward - s.reward_mean);
  s.reward_std = std::sqrt(ss / static_cast<double>(s.rows));

  std::size_t failures = 0;
  for (const Transition& t : d.rows) {
    if (t.step == 0) ++s.episodes;
    if (t.terminal && t.reward == d.meta.error_reward) ++failures;
  }
  s.success_rate = s.episodes ? static_cast<double>(s.episodes - failures) / static_cast<double>(s.episodes) : 0.0;
  return s;
}

std::string csv_header(std::size_t o_dim, std::size_t a_dim) {
  std::string h = "episode_id,step";
  for (std::size_t i = 0; i < o_dim; ++i) h += ",obs_" + std::to_string(i);
  for (std::size_t i = 0; i < a_dim; ++i) h += ",act_" + std::to_string(i);
  h += ",reward,terminal,timeout";
  return h;
}

void write_dataset(const std::string& dir, const Dataset& d) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);
  {
    std::ofstream meta(root / "meta.json", std::ios::binary);
    if (!meta) throw Error(Errc::Io, "cannot write meta.json in " + dir);
    meta << to_json(d.meta).dump(2) << '\n';
  }
  std::ofstream csv(root / "data.csv", std::ios::binary);
  if (!csv) throw Error(Errc::Io, "cannot write data.csv in " + dir);
  csv << csv_header(d.meta.o_dim, d.meta.a_dim) << '\n';
  std::string line;
  for (const Transition& t : d.rows) {
    line = std::to_string(t.episode_id) + ',' + std::to_string(t.step);
    for (double v : t.obs) put_number(line += ',', v);
    for (double v : t.action) put_number(line += ',', v);
    put_number(line += ',', t.reward);
    line += t.terminal ? ",1" : ",0";
    line += t.timeout ? ",1\n" : ",0\n";
    csv << line;
  }
  if (!csv) throw Error(Errc::Io, "write failed for " + dir);
}

Dataset read_dataset(const std::string& dir) {
  const std::filesystem::path root(dir);
  std::ifstream meta_in(root / "meta.json", std::ios::binary);
  if (!meta_in) throw Error(Errc::Io, "cannot read meta.json in " + dir);
  Json j;
  try {
    j = Json::parse(meta_in);
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptRow, std::string("meta.json: ") + e.what());
  }
  const DatasetMeta meta = meta_from_json(j);

  std::ifstream csv(root / "data.csv", std::ios::binary);
  if (!csv) throw Error(Errc::Io, "cannot read data.csv in " + dir);
  std::string line;
  if (!std::getline(csv, line) || line != csv_header(meta.o_dim, meta.a_dim)) {
    throw Error(Errc::CorruptRow, "data.csv header does not match meta.json");
  }
  DatasetRecorder rec(meta);
  const std::size_t n_fields = 2 + meta.o_dim + meta.a_dim + 3;
  std::vector<std::string> fields;
  for (std::size_t lineno = 2; std::getline(csv, line); ++lineno) {
    fields.clear();
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != n_fields) throw Error(Errc::CorruptRow, "wrong field count on line " + std::to_string(lineno));
    Transition t;
    std::size_t k = 0;
    t.episode_id = parse_integer<std::size_t>(fields[k++], lineno);
    t.step = parse_integer<int>(fields[k++], lineno);
    t.obs.resize(meta.o_dim);
    for (double& v : t.obs) v = parse_number(fields[k++], lineno);
    t.action.resize(meta.a_dim);
    for (double& v : t.action) v = parse_number(fields[k++], lineno);
    t.reward = parse_number(fields[k++], lineno);
    t.terminal = parse_flag(fields[k++], lineno);
    t.timeout = parse_flag(fields[k++], lineno);
    try {
      rec.record(t);
    } catch (const Error& e) {
      throw Error(Errc::CorruptRow, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (rec.episode_open()) throw Error(Errc::CorruptRow, "data.csv ends inside an episode");
  Dataset d;
  d.meta = meta;
  d.rows = rec.dataset().rows;
  std::size_t episodes = 0;
  for (const Transition& t : d.rows) episodes += t.step == 0 ? 1 : 0;
  if (episodes != meta.trajectory_count) throw Error(Errc::CorruptRow, "trajectory_count does not match data.csv");
  return d;
}

}  // namespace procbench
