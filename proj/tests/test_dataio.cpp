#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "semplan/dataio.hpp"

using namespace semplan::dataio;
using semplan::numcore::Vec;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("semplan_dataio_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("load_transitions: two valid records") {
  TempDir tmp;
  const auto p = tmp.file("t.jsonl");
  write_file(p,
             "{\"dims\":4,\"count\":2}\n"
             "{\"s\":[1,2,3,4],\"s_mid\":[1,1,1,1],\"s_next\":[0,0,0,0]}\n"
             "{\"s\":[4,3,2,1],\"s_mid\":[2,2,2,2],\"s_next\":[1,1,1,1]}\n");
  const auto r = load_transitions(p);
  CHECK(r.records.size() == 2);
  CHECK(r.dims == 4);
  CHECK_FALSE(r.empty_warning);
  CHECK(r.records[1].s == Vec{4, 3, 2, 1});
}

TEST_CASE("load_transitions: empty file warns") {
  TempDir tmp;
  const auto p = tmp.file("empty.jsonl");
  write_file(p, "");
  const auto r = load_transitions(p);
  CHECK(r.records.empty());
  CHECK(r.empty_warning);
}

TEST_CASE("load_transitions: dimension mismatch names the record") {
  TempDir tmp;
  const auto p = tmp.file("bad.jsonl");
  write_file(p,
             "{\"dims\":3,\"count\":2}\n"
             "{\"s\":[1,2,3],\"s_mid\":[1,1,1],\"s_next\":[0,0,0]}\n"
             "{\"s\":[1,2,3],\"s_mid\":[1,1,1],\"s_next\":[0,0,0,9]}\n");
  CHECK_THROWS_WITH_AS(load_transitions(p),
                       doctest::Contains("dimension mismatch at record 1"), std::runtime_error);
}

TEST_CASE("load_transitions: malformed line names the line number") {
  TempDir tmp;
  const auto p = tmp.file("mal.jsonl");
  write_file(p,
             "{\"dims\":2,\"count\":1}\n"
             "not json at all\n");
  CHECK_THROWS_WITH_AS(load_transitions(p), doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("transition save/load round trip") {
  TempDir tmp;
  std::vector<TransitionRecord> recs{{{1.5, -2.0}, {0.25, 0.5}, {3.0, 4.0}},
                                     {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}}};
  const auto p = tmp.file("rt.jsonl");
  save_transitions(p, recs, 2);
  const auto r = load_transitions(p);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].s == recs[0].s);
  CHECK(r.records[1].s_next == recs[1].s_next);
}

TEST_CASE("load_rewards: basic and malformed") {
  TempDir tmp;
  const auto p = tmp.file("r.jsonl");
  write_file(p,
             "{\"dims\":2,\"count\":2}\n"
             "{\"s\":[1,2],\"y\":0.5}\n"
             "{\"s\":[3,4],\"y\":-1.5}\n");
  const auto r = load_rewards(p);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[1].y == doctest::Approx(-1.5));

  const auto bad = tmp.file("bad.jsonl");
  write_file(bad,
             "{\"dims\":2,\"count\":1}\n"
             "{\"s\":[1,2]}\n");
  CHECK_THROWS_AS(load_rewards(bad), std::runtime_error);
}

TEST_CASE("fit_norm: two-point population std") {
  std::vector<TransitionRecord> recs{{{1.0}, {0.0}, {0.0}}, {{3.0}, {0.0}, {0.0}}};
  const auto st = fit_norm(recs, [](const TransitionRecord& r) { return r.s; });
  CHECK(st.mean[0] == doctest::Approx(2.0));
  CHECK(st.std[0] == doctest::Approx(1.0));
}

TEST_CASE("fit_norm: constant dimension gets the floor") {
  std::vector<Vec> rows{{5.0}, {5.0}, {5.0}};
  const auto st = fit_norm_vecs(rows);
  CHECK(st.mean[0] == doctest::Approx(5.0));
  CHECK(st.std[0] == doctest::Approx(kStdFloor));
}

TEST_CASE("fit_norm: standard data stays near standard") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec> rows;
  for (int i = 0; i < 20000; ++i) rows.push_back({g(rng)});
  const auto st = fit_norm_vecs(rows);
  CHECK(st.mean[0] == doctest::Approx(0.0).epsilon(1).scale(0.05));
  CHECK(st.std[0] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fit_norm: needs at least two records") {
  std::vector<Vec> rows{{1.0}};
  CHECK_THROWS_AS(fit_norm_vecs(rows), std::invalid_argument);
}

TEST_CASE("fit_norm is permutation invariant") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec> rows;
  for (int i = 0; i < 64; ++i) rows.push_back({g(rng), g(rng)});
  const auto a = fit_norm_vecs(rows);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto b = fit_norm_vecs(rows);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.mean[i] == doctest::Approx(b.mean[i]).epsilon(1e-12));
    CHECK(a.std[i] == doctest::Approx(b.std[i]).epsilon(1e-12));
  }
}

TEST_CASE("normalize: examples and round trip") {
  NormStats st{{2.0}, {1.0}};
  CHECK(normalize({2.0}, st)[0] == doctest::Approx(0.0));
  CHECK(normalize({3.0}, st)[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(normalize({1.0, 2.0}, st), std::invalid_argument);

  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0.0, 3.0);
  NormStats wide{{0.7, -1.3, 4.0}, {0.9, 2.5, 0.01}};
  for (int i = 0; i < 100; ++i) {
    Vec x{g(rng), g(rng), g(rng)};
    const Vec back = denormalize(normalize(x, wide), wide);
    const Vec fwd = normalize(denormalize(x, wide), wide);
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(back[d] - x[d]) < 1e-9);
      CHECK(std::abs(fwd[d] - x[d]) < 1e-9);
    }
  }
}

TEST_CASE("split: sizes and determinism") {
  std::vector<int> recs(10);
  for (int i = 0; i < 10; ++i) recs[i] = i;
  const auto [train, valid] = split(recs, 0.8, 1);
  CHECK(train.size() == 8);
  CHECK(valid.size() == 2);

  const auto again = split(recs, 0.8, 1);
  CHECK(again.first == train);
  CHECK(again.second == valid);

  // Disjoint and exhaustive.
  std::vector<int> all = train;
  all.insert(all.end(), valid.begin(), valid.end());
  std::sort(all.begin(), all.end());
  CHECK(all == recs);
}

TEST_CASE("split: different seeds give different permutations") {
  std::vector<int> recs(100);
  for (int i = 0; i < 100; ++i) recs[i] = i;
  const auto a = split(recs, 0.5, 0);
  const auto b = split(recs, 0.5, 1);
  CHECK(a.first != b.first);
}

TEST_CASE("split: rejects bad fractions") {
  std::vector<int> recs{1, 2, 3};
  CHECK_THROWS_AS(split(recs, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(recs, 1.0, 0), std::invalid_argument);
}

TEST_CASE("checkpoint: save -> load -> save is byte identical") {
  TempDir tmp;
  Checkpoint c;
  c.kind = "mdn";
  c.shapes = {{4, 2}, {10, 4}};
  c.params.resize(2 * 4 + 4 + 4 * 10 + 10);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : c.params) v = g(rng);
  c.norm_mean = {0.1, -0.2};
  c.norm_std = {1.5, 2.5};
  c.target_mean = {0.0, 0.0};
  c.target_std = {1.0, 1.0};
  c.seed = 42;
  c.epochs = 7;
  c.mixture_k = 2;
  c.sample_dim = 2;
  c.val_loss = {1.25, 0.75, 0.5};

  const auto p1 = tmp.file("a.json");
  const auto p2 = tmp.file("b.json");
  c.save(p1);
  const Checkpoint loaded = Checkpoint::load(p1);
  loaded.save(p2);

  std::ifstream f1(p1), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(loaded.params == c.params);
  CHECK(loaded.shapes == c.shapes);
}

TEST_CASE("checkpoint: parameter count validated on load") {
  TempDir tmp;
  Checkpoint c;
  c.kind = "reward-linear";
  c.shapes = {{1, 3}};
  c.params = {1.0, 2.0};  // should be 4
  c.norm_mean = {0, 0, 0};
  c.norm_std = {1, 1, 1};
  const auto p = tmp.file("bad.json");
  c.save(p);
  CHECK_THROWS_AS(Checkpoint::load(p), std::runtime_error);
}
