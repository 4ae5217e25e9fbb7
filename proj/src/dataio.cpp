#include "semplan/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace semplan::dataio {

using nlohmann::json;

namespace {

Vec to_vec(const json& arr, const std::string& what, int line_no) {
  if (!arr.is_array())
    throw std::runtime_error("line " + std::to_string(line_no) + ": field '" + what +
                             "' is not an array");
  Vec v;
  v.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_number())
      throw std::runtime_error("line " + std::to_string(line_no) + ": field '" + what +
                               "' has a non-numeric entry");
    v.push_back(e.get<double>());
  }
  return v;
}

json parse_line(const std::string& line, int line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("line " + std::to_string(line_no) + ": malformed JSON");
  return j;
}

// Reads the {"dims":n,"count":N} header; returns false on an empty file.
bool read_header(std::ifstream& in, const std::string& path, int& dims) {
  std::string line;
  if (!std::getline(in, line)) return false;
  json h = parse_line(line, 1);
  if (!h.contains("dims"))
    throw std::runtime_error(path + ": header line is missing 'dims'");
  dims = h["dims"].get<int>();
  return true;
}

}  // namespace

LoadResult<TransitionRecord> load_transitions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  LoadResult<TransitionRecord> out;
  if (!read_header(in, path, out.dims)) {
    out.empty_warning = true;
    return out;
  }
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no);
    TransitionRecord r;
    r.s = to_vec(j.at("s"), "s", line_no);
    r.s_mid = to_vec(j.at("s_mid"), "s_mid", line_no);
    r.s_next = to_vec(j.at("s_next"), "s_next", line_no);
    const std::size_t idx = out.records.size();
    if (static_cast<int>(r.s.size()) != out.dims ||
        r.s_mid.size() != r.s.size() || r.s_next.size() != r.s.size())
      throw std::runtime_error("dimension mismatch at record " + std::to_string(idx) +
                               " (line " + std::to_string(line_no) + ")");
    out.records.push_back(std::move(r));
  }
  if (out.records.empty()) out.empty_warning = true;
  return out;
}

LoadResult<RewardRecord> load_rewards(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  LoadResult<RewardRecord> out;
  if (!read_header(in, path, out.dims)) {
    out.empty_warning = true;
    return out;
  }
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no);
    RewardRecord r;
    r.s = to_vec(j.at("s"), "s", line_no);
    if (!j.contains("y") || !j["y"].is_number())
      throw std::runtime_error("line " + std::to_string(line_no) + ": missing numeric 'y'");
    r.y = j["y"].get<double>();
    if (static_cast<int>(r.s.size()) != out.dims)
      throw std::runtime_error("dimension mismatch at record " +
                               std::to_string(out.records.size()) + " (line " +
                               std::to_string(line_no) + ")");
    out.records.push_back(std::move(r));
  }
  if (out.records.empty()) out.empty_warning = true;
  return out;
}

void save_transitions(const std::string& path, const std::vector<TransitionRecord>& records,
                      int dims) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << json{{"dims", dims}, {"count", records.size()}}.dump() << "\n";
  for (const auto& r : records) {
    out << json{{"s", r.s}, {"s_mid", r.s_mid}, {"s_next", r.s_next}}.dump() << "\n";
  }
}

void save_rewards(const std::string& path, const std::vector<RewardRecord>& records, int dims) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << json{{"dims", dims}, {"count", records.size()}}.dump() << "\n";
  for (const auto& r : records) out << json{{"s", r.s}, {"y", r.y}}.dump() << "\n";
}

NormStats fit_norm_vecs(const std::vector<Vec>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("fit_norm needs at least 2 records");
  const std::size_t n = rows[0].size();
  NormStats st;
  st.mean.assign(n, 0.0);
  st.std.assign(n, 0.0);
  for (const auto& r : rows) {
    if (r.size() != n) throw std::invalid_argument("fit_norm: inconsistent dimensions");
    for (std::size_t i = 0; i < n; ++i) st.mean[i] += r[i];
  }
  for (double& m : st.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = r[i] - st.mean[i];
      st.std[i] += d * d;
    }
  for (double& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(rows.size())), kStdFloor);
  return st;
}

NormStats fit_norm(const std::vector<TransitionRecord>& records,
                   const std::function<Vec(const TransitionRecord&)>& field) {
  std::vector<Vec> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(field(r));
  return fit_norm_vecs(rows);
}

Vec normalize(const Vec& x, const NormStats& stats) {
  if (x.size() != stats.mean.size())
    throw std::invalid_argument("normalize: shape mismatch");
  Vec z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - stats.mean[i]) / stats.std[i];
  return z;
}

Vec denormalize(const Vec& z, const NormStats& stats) {
  if (z.size() != stats.mean.size())
    throw std::invalid_argument("denormalize: shape mismatch");
  Vec x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * stats.std[i] + stats.mean[i];
  return x;
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& records, double fraction,
                                                std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split fraction must be in (0, 1)");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  numcore::Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t train_n = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(records.size())));
  if (records.size() >= 2) train_n = std::clamp<std::size_t>(train_n, 1, records.size() - 1);

  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < train_n)
      out.first.push_back(records[order[i]]);
    else
      out.second.push_back(records[order[i]]);
  }
  return out;
}

template std::pair<std::vector<TransitionRecord>, std::vector<TransitionRecord>> split(
    const std::vector<TransitionRecord>&, double, std::uint64_t);
template std::pair<std::vector<RewardRecord>, std::vector<RewardRecord>> split(
    const std::vector<RewardRecord>&, double, std::uint64_t);
template std::pair<std::vector<int>, std::vector<int>> split(const std::vector<int>&, double,
                                                             std::uint64_t);

void Checkpoint::save(const std::string& path) const {
  json shapes_j = json::array();
  for (const auto& [o, i] : shapes) shapes_j.push_back(json::array({o, i}));
  json j{{"kind", kind},
         {"shapes", shapes_j},
         {"params", params},
         {"norm_mean", norm_mean},
         {"norm_std", norm_std},
         {"target_mean", target_mean},
         {"target_std", target_std},
         {"seed", seed},
         {"epochs", epochs},
         {"members", members},
         {"jitter_sigma", jitter_sigma},
         {"mixture_k", mixture_k},
         {"sample_dim", sample_dim},
         {"val_loss", val_loss}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  in >> j;

  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  for (const auto& s : j.at("shapes"))
    c.shapes.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
  c.params = j.at("params").get<Vec>();
  c.norm_mean = j.at("norm_mean").get<Vec>();
  c.norm_std = j.at("norm_std").get<Vec>();
  c.target_mean = j.value("target_mean", Vec{});
  c.target_std = j.value("target_std", Vec{});
  c.seed = j.at("seed").get<std::uint64_t>();
  c.epochs = j.at("epochs").get<int>();
  c.members = j.value("members", 1);
  c.jitter_sigma = j.value("jitter_sigma", 0.0);
  c.mixture_k = j.value("mixture_k", 0);
  c.sample_dim = j.value("sample_dim", 0);
  c.val_loss = j.value("val_loss", Vec{});

  std::size_t expect = 0;
  for (const auto& [o, i] : c.shapes) expect += static_cast<std::size_t>(o) * i + o;
  expect *= static_cast<std::size_t>(std::max(c.members, 1));
  if (expect != c.params.size())
    throw std::runtime_error("checkpoint parameter count does not match shapes: " + path);
  return c;
}

}  // namespace semplan::dataio
