#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "procbench/controllers.hpp"
#include "procbench/dataset.hpp"
#include "procbench/error.hpp"

using namespace procbench;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("procbench_dataset_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetMeta small_meta() {
  DatasetMeta m;
  m.env_name = "toy";
  m.baseline_name = "zero";
  m.a_dim = 1;
  m.o_dim = 2;
  m.max_steps = 10;
  m.error_reward = -50.0;
  m.seed = 3;
  return m;
}

Transition row(std::size_t ep, int step, double reward, bool terminal = false, bool timeout = false) {
  return Transition{ep, step, {0.1 * step, 1.0 / 3.0}, {static_cast<double>(ep)}, reward, terminal, timeout};
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Record, DimMismatch) {
  DatasetRecorder rec(small_meta());
  Transition t = row(0, 0, 1.0);
  t.obs.push_back(0.0);
  EXPECT_EQ(code_of([&] { rec.record(t); }), Errc::DimMismatch);
  t = row(0, 0, 1.0);
  t.action.clear();
  EXPECT_EQ(code_of([&] { rec.record(t); }), Errc::DimMismatch);
}

TEST(Record, TerminalClosesEpisode) {
  DatasetRecorder rec(small_meta());
  rec.record(row(0, 0, 1.0));
  rec.record(row(0, 1, 1.0, true));
  EXPECT_FALSE(rec.episode_open());
  EXPECT_EQ(code_of([&] { rec.record(row(0, 2, 1.0)); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { rec.record(row(1, 3, 1.0)); }), Errc::InvalidArgument);
  rec.record(row(1, 0, 1.0));
  EXPECT_EQ(code_of([&] { rec.record(row(2, 0, 1.0)); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { rec.record(row(1, 2, 1.0)); }), Errc::InvalidArgument);
  rec.record(row(1, 1, 1.0, false, true));
  const Dataset d = std::move(rec).finish();
  EXPECT_EQ(d.meta.trajectory_count, 2u);
}

TEST(Record, RejectsRewardBelowErrorReward) {
  DatasetRecorder rec(small_meta());
  EXPECT_EQ(code_of([&] { rec.record(row(0, 0, -50.5)); }), Errc::InvalidArgument);
  rec.record(row(0, 0, -50.0, true));
}

TEST(Record, OpenEpisodeCannotFinish) {
  DatasetRecorder rec(small_meta());
  rec.record(row(0, 0, 1.0));
  EXPECT_EQ(code_of([&] { (void)std::move(rec).finish(); }), Errc::InvalidArgument);
}

TEST(Record, ReactorEpisodeFitsMaxSteps) {
  auto env = make_environment("reactor");
  auto ctrl = make_controller("zero", *env);
  DatasetMeta m;
  m.env_name = "reactor";
  m.a_dim = 2;
  m.o_dim = 3;
  m.max_steps = 100;
  m.error_reward = -1000.0;
  DatasetRecorder rec(m);
  const EpisodeSummary s = run_episode(*env, *ctrl, 0, 11, &rec);
  EXPECT_LE(rec.dataset().rows.size(), 100u);
  EXPECT_EQ(rec.dataset().rows.size(), static_cast<std::size_t>(s.steps));
}

TEST(Persist, RoundTripIsExact) {
  DatasetRecorder rec(small_meta());
  const double tricky[] = {0.1, 1.0 / 3.0, 1e-300, -2.5e300, 6.02214076e23, -0.0, 5e-324};
  int k = 0;
  for (double v : tricky) {
    Transition t{0, k, {v, -v}, {v * 0.5}, v > -50.0 ? v : -50.0, false, false};
    if (k == 6) t.timeout = true;
    rec.record(t);
    ++k;
  }
  rec.record(row(1, 0, -50.0, true));
  const Dataset d = std::move(rec).finish();
  const fs::path dir = scratch("roundtrip");
  write_dataset(dir.string(), d);
  const Dataset back = read_dataset(dir.string());
  ASSERT_EQ(back.rows.size(), d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) EXPECT_EQ(back.rows[i], d.rows[i]);
  EXPECT_EQ(to_json(back.meta), to_json(d.meta));

  const fs::path dir2 = scratch("roundtrip2");
  write_dataset(dir2.string(), back);
  EXPECT_EQ(slurp(dir / "meta.json"), slurp(dir2 / "meta.json"));
  EXPECT_EQ(slurp(dir / "data.csv"), slurp(dir2 / "data.csv"));

  const DatasetStats a = compute_stats(d), b = compute_stats(back);
  EXPECT_EQ(a.reward_mean, b.reward_mean);
  EXPECT_EQ(a.reward_std, b.reward_std);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Persist, CsvLayout) {
  EXPECT_EQ(csv_header(2, 1), "episode_id,step,obs_0,obs_1,act_0,reward,terminal,timeout");
  DatasetRecorder rec(small_meta());
  rec.record(Transition{0, 0, {0.1, 2.0}, {-1.0}, 0.5, true, false});
  const fs::path dir = scratch("layout");
  write_dataset(dir.string(), std::move(rec).finish());
  EXPECT_EQ(slurp(dir / "data.csv"),
            "episode_id,step,obs_0,obs_1,act_0,reward,terminal,timeout\n"
            "0,0,0.10000000000000001,2,-1,0.5,1,0\n");
  const Json meta = Json::parse(slurp(dir / "meta.json"));
  for (const char* key : {"env_name", "baseline_name", "trajectory_count", "a_dim", "o_dim", "max_steps",
                          "error_reward", "reward_mean", "reward_std", "seed", "format_version"}) {
    EXPECT_TRUE(meta.contains(key)) << key;
  }
  fs::remove_all(dir);
}

TEST(Persist, EmptyDataset) {
  const Dataset d = DatasetRecorder(small_meta()).finish();
  const fs::path dir = scratch("empty");
  write_dataset(dir.string(), d);
  EXPECT_EQ(slurp(dir / "data.csv"), csv_header(2, 1) + "\n");
  const Dataset back = read_dataset(dir.string());
  EXPECT_TRUE(back.rows.empty());
  EXPECT_EQ(back.meta.trajectory_count, 0u);
  EXPECT_EQ(code_of([&] { compute_stats(back); }), Errc::EmptyDataset);
  fs::remove_all(dir);
}

TEST(Persist, FormatVersionMismatch) {
  const fs::path dir = scratch("version");
  write_dataset(dir.string(), DatasetRecorder(small_meta()).finish());
  Json meta = Json::parse(slurp(dir / "meta.json"));
  meta["format_version"] = kDatasetFormatVersion + 1;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_EQ(code_of([&] { read_dataset(dir.string()); }), Errc::FormatVersionMismatch);
  fs::remove_all(dir);
}

TEST(Persist, CorruptRows) {
  const fs::path dir = scratch("corrupt");
  DatasetRecorder rec(small_meta());
  rec.record(row(0, 0, 1.0, true));
  write_dataset(dir.string(), std::move(rec).finish());
  const std::string header = csv_header(2, 1) + "\n";
  for (const std::string body : {"0,0,0.1,abc,1,1,1,0\n", "0,0,0.1,0.2,1,1,1\n", "0,0,0.1,0.2,1,1,2,0\n",
                                 "0,1,0.1,0.2,1,1,1,0\n", "0,0,0.1,0.2,1,1,0,0\n", "0,0,0.1,0.2,1,1,1,0\n1,0,0,0,0,1,1,0\n"}) {
    std::ofstream(dir / "data.csv", std::ios::binary) << header << body;
    EXPECT_EQ(code_of([&] { read_dataset(dir.string()); }), Errc::CorruptRow) << body;
  }
  std::ofstream(dir / "data.csv", std::ios::binary) << "episode_id,step\n";
  EXPECT_EQ(code_of([&] { read_dataset(dir.string()); }), Errc::CorruptRow);
  fs::remove_all(dir);
}

TEST(Stats, Examples) {
  DatasetRecorder ones(small_meta());
  for (int k = 0; k < 5; ++k) ones.record(row(0, k, 1.0, k == 4));
  const DatasetStats a = compute_stats(ones.dataset());
  EXPECT_EQ(a.reward_mean, 1.0);
  EXPECT_EQ(a.reward_std, 0.0);
  EXPECT_EQ(a.success_rate, 1.0);

  DatasetRecorder two(small_meta());
  two.record(row(0, 0, 0.0));
  two.record(row(0, 1, 2.0, false, true));
  const DatasetStats b = compute_stats(two.dataset());
  EXPECT_EQ(b.reward_mean, 1.0);
  EXPECT_EQ(b.reward_std, 1.0);
}

TEST(Stats, MatchesOnePassRecomputation) {
  DatasetRecorder rec(small_meta());
  Rng rng(17);
  std::size_t failures = 0;
  for (std::size_t ep = 0; ep < 40; ++ep) {
    const int len = 1 + static_cast<int>(rng.uniform() * 10);
    const bool fails = rng.uniform() < 0.25;
    for (int k = 0; k < len; ++k) {
      const bool last = k == len - 1;
      const double r = last && fails ? -50.0 : rng.uniform(-3.0, 7.0);
      rec.record(row(ep, k, r, last && fails, last && !fails));
    }
    failures += fails ? 1 : 0;
  }
  // Welford's one-pass update as the independent oracle.
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (const Transition& t : rec.dataset().rows) {
    ++n;
    const double delta = t.reward - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (t.reward - mean);
  }
  const DatasetStats s = compute_stats(rec.dataset());
  EXPECT_NEAR(s.reward_mean, mean, 1e-12 * std::max(1.0, std::abs(mean)));
  EXPECT_NEAR(s.reward_std, std::sqrt(m2 / static_cast<double>(n)), 1e-12 * std::max(1.0, std::abs(mean)));
  EXPECT_EQ(s.episodes, 40u);
  EXPECT_DOUBLE_EQ(s.success_rate, (40.0 - static_cast<double>(failures)) / 40.0);
}
