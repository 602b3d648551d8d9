#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "persist/chains.hpp"
#include "persist/errors.hpp"
#include "persist/graph.hpp"
#include "persist/io.hpp"
#include "persist/martin.hpp"
#include "persist/parallel.hpp"
#include "persist/pi_digits.hpp"
#include "persist/rng.hpp"
#include "persist/silhouette.hpp"
#include "persist/tree.hpp"

#ifndef PERSIST_VERSION
#define PERSIST_VERSION "0.0.0"
#endif

namespace persist {

// ---------------------------------------------------------------------------
// Key streams
// ---------------------------------------------------------------------------

enum class PiSide { left, right };

inline constexpr std::size_t kPiStreamCap = 10'000;

/// Keys cut from the decimals of pi - 3 in blocks of ten digits; the left
/// stream takes blocks 1, 3, 5, ... and the right stream blocks 2, 4, 6, ...
inline std::vector<double> pi_stream(PiSide side, std::size_t count) {
  if (count > kPiStreamCap) throw CapabilityError("pi_stream: at most 10000 keys per stream");
  const std::size_t first = side == PiSide::left ? 0 : 1;
  if (count > 0 && (first + 2 * count - 1) * 10 > data::kPiDigits.size()) throw CapabilityError("pi_stream: digit table exhausted");
  std::vector<double> keys;
  keys.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    const std::string text = "0." + std::string(data::kPiDigits.substr((first + 2 * b) * 10, 10));
    double v = 0;
    std::from_chars(text.data(), text.data() + text.size(), v);
    keys.push_back(v);
  }
  std::vector<double> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DomainError("pi_stream: repeated key");
  }
  return keys;
}

enum class KeySource { pi_left, pi_right, seeded };

inline KeySource parse_key_source(const std::string& s) {
  if (s == "pi-left") return KeySource::pi_left;
  if (s == "pi-right") return KeySource::pi_right;
  if (s == "seed") return KeySource::seeded;
  throw ValidationError("source must be pi-left, pi-right or seed, got \"" + s + "\"");
}

inline std::string to_string(KeySource s) {
  switch (s) {
    case KeySource::pi_left: return "pi-left";
    case KeySource::pi_right: return "pi-right";
    case KeySource::seeded: return "seed";
  }
  return "?";
}

inline std::vector<double> key_stream(KeySource source, std::size_t count, std::uint64_t seed) {
  if (source == KeySource::pi_left) return pi_stream(PiSide::left, count);
  if (source == KeySource::pi_right) return pi_stream(PiSide::right, count);
  CounterRng rng = CounterRng::stream(seed, 0);
  std::vector<double> keys(count);
  for (double& k : keys) k = rng.uniform01();
  return keys;
}

/// BST built from the first n keys, for each n in n_list (ascending).
inline std::vector<BinaryTree> bst_snapshots(const std::vector<double>& keys, std::vector<std::uint64_t> n_list) {
  std::sort(n_list.begin(), n_list.end());
  if (!n_list.empty() && n_list.back() > keys.size()) throw CapabilityError("key stream exhausted");
  std::vector<BinaryTree> out;
  LabeledTree t;
  std::size_t used = 0;
  for (std::uint64_t n : n_list) {
    if (n < 1) throw DomainError("tree sizes must be >= 1");
    while (used < n) t.insert(keys[used++]);
    out.push_back(t.tree());
  }
  return out;
}

/// #x(0) / #x.
inline double left_subtree_fraction(const BinaryTree& x) {
  return static_cast<double>(x.subtree_size(Word("0"))) / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxGridDepth = 16;

/// The left endpoints w000... of the 2^depth cylinders of level `depth`, in
/// increasing order, followed by the all-ones end.
inline std::vector<End> end_grid(std::size_t depth) {
  if (depth > kMaxGridDepth) throw CapabilityError("end grid depth above 16");
  std::vector<End> grid;
  grid.reserve((std::size_t{1} << depth) + 1);
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << depth); ++w) {
    std::string bits(depth, '0');
    for (std::size_t k = 0; k < depth; ++k) bits[k] = static_cast<char>('0' + ((w >> (depth - 1 - k)) & 1u));
    grid.emplace_back(Word(bits), 0);
  }
  grid.push_back(End::ones());
  return grid;
}

/// Boundary-function curves (n, beta, B_value) along one BST chain run.
inline Table figure1_data(std::vector<std::uint64_t> n_list, std::uint64_t seed, std::size_t depth) {
  std::sort(n_list.begin(), n_list.end());
  const auto grid = end_grid(depth);
  Table t{{"n", "beta", "B_value"}, {}};
  CounterRng rng = CounterRng::stream(seed, 0);
  BinaryTree x;
  for (std::uint64_t n : n_list) {
    if (n < 1) throw DomainError("figure1_data: n must be >= 1");
    while (x.size() < n) detail::bst_advance(x, rng);
    for (const End& u : grid) {
      t.add({static_cast<std::int64_t>(n), beta_map(u), static_cast<std::int64_t>(boundary_function(x, u))});
    }
  }
  return t;
}

/// Smoothed silhouette curves (n, beta, Y_value) for BSTs grown from a key stream.
inline Table figure2_data(std::vector<std::uint64_t> n_list, KeySource source, std::size_t depth,
                          std::uint64_t seed = 0) {
  std::sort(n_list.begin(), n_list.end());
  const auto grid = end_grid(depth);
  const std::uint64_t n_max = n_list.empty() ? 0 : n_list.back();
  const auto trees = bst_snapshots(key_stream(source, n_max, seed), n_list);
  Table t{{"n", "beta", "Y_value"}, {}};
  for (std::size_t s = 0; s < trees.size(); ++s) {
    const SmoothedSilhouette y(trees[s]);
    for (const End& u : grid) t.add({static_cast<std::int64_t>(n_list[s]), beta_map(u), y(u)});
  }
  return t;
}

/// sup over the end grid of |Y_{2n} - Y_n| for each n in n_list, along the
/// BST grown from one seeded key stream.
inline std::vector<double> y_cauchy_gaps(const std::vector<std::uint64_t>& n_list, std::uint64_t seed,
                                         std::size_t depth) {
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t n : n_list) {
    sizes.push_back(n);
    sizes.push_back(2 * n);
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  const auto trees = bst_snapshots(key_stream(KeySource::seeded, sizes.back(), seed), sizes);
  const auto grid = end_grid(depth);
  std::map<std::uint64_t, std::vector<double>> curves;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const SmoothedSilhouette y(trees[s]);
    auto& c = curves[sizes[s]];
    for (const End& u : grid) c.push_back(y(u));
  }
  std::vector<double> gaps;
  for (std::uint64_t n : n_list) {
    double sup = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) sup = std::max(sup, std::abs(curves[2 * n][g] - curves[n][g]));
    gaps.push_back(sup);
  }
  return gaps;
}

// ---------------------------------------------------------------------------
// Convergence reports
// ---------------------------------------------------------------------------

inline constexpr Vertex kMaxFreezeWindow = 6;

/// Entry times of the pairs inside [window] for `seeds` uniform attachment
/// runs up to `horizon`. Pairs are independent of everything outside the
/// window, so only the window is simulated. Columns: seed, i, j, entry_time
/// (empty if never entered), frozen, expected_never = P(tau_ij > horizon).
inline Table edge_freeze_report(Vertex window, std::uint64_t horizon, std::uint64_t seeds, std::uint64_t master_seed,
                                unsigned threads = 1) {
  if (window < 2 || window > kMaxFreezeWindow) throw DomainError("edge_freeze_report: window must lie in [2, 6]");
  if (horizon < window) throw DomainError("edge_freeze_report: horizon must be >= window");
  std::vector<Edge> pairs;
  for (Vertex j = 2; j <= window; ++j)
    for (Vertex i = 1; i < j; ++i) pairs.push_back({i, j});

  std::vector<std::vector<std::optional<std::uint64_t>>> entry(seeds);
  parallel_for(
      seeds,
      [&](std::size_t s) {
        CounterRng rng = CounterRng::stream(master_seed, s);
        auto& times = entry[s];
        times.assign(pairs.size(), std::nullopt);
        std::size_t open = pairs.size();
        for (std::uint64_t n1 = 2; n1 <= horizon && open > 0; ++n1) {
          const double p = 1.0 / static_cast<double>(n1);
          for (std::size_t q = 0; q < pairs.size(); ++q) {
            if (times[q] || pairs[q].j > n1) continue;
            if (rng.bernoulli(p)) {
              times[q] = n1;
              --open;
            }
          }
        }
      },
      threads);

  Table t{{"seed", "i", "j", "entry_time", "frozen", "expected_never"}, {}};
  for (std::uint64_t s = 0; s < seeds; ++s) {
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto& e = entry[s][q];
      const double expected = to_double(entry_tail_prob(pairs[q].i, pairs[q].j, horizon));
      t.add({static_cast<std::int64_t>(s), static_cast<std::int64_t>(pairs[q].i),
             static_cast<std::int64_t>(pairs[q].j), e ? Cell(static_cast<std::int64_t>(*e)) : Cell(std::monostate{}),
             std::int64_t{e.has_value()}, expected});
    }
  }
  return t;
}

/// Relabeled Erdos-Renyi chain stored as the unlabeled growth graph together
/// with the current labeling, X_n = sigma_n(Y_n). The new vertex attaches to
/// each old vertex independently, so it can be wired in Y-coordinates; the
/// labeling is then composed with a fresh uniform permutation. A step costs
/// O(n) instead of relabeling every edge.
class RelabeledErProcess {
 public:
  RelabeledErProcess(double theta, CounterRng rng) : theta_(theta), rng_(rng), memory_(1), labels_{0, 1} {
    detail::check_open_theta(theta);
  }

  Vertex order() const noexcept { return memory_.order(); }

  void step() {
    detail::er_memory_advance(memory_, theta_, rng_);
    labels_.push_back(order());
    const auto pi = rng_.permutation(order());
    for (Vertex v = 1; v <= order(); ++v) labels_[v] = pi[labels_[v]];
  }

  /// Isomorphic to graph(); enough for label-invariant statistics such as rho.
  const Graph& unlabeled() const noexcept { return memory_; }

  /// The labeled state X_n.
  Graph graph() const { return permute(memory_, Permutation::from_image(labels_)); }

 private:
  double theta_;
  CounterRng rng_;
  Graph memory_;
  std::vector<Vertex> labels_;
};

/// Mean and standard error of rho(H, X_n) across replicates of the relabeled
/// chain, for each pattern H and checkpoint n. Columns: H_id, n, mean_rho,
/// stderr, expected (limit value theta^e (1-theta)^(pairs - e)).
inline Table rho_convergence_report(double theta, const std::vector<Graph>& patterns,
                                    std::vector<std::uint64_t> checkpoints, std::uint64_t replicates,
                                    std::uint64_t master_seed, unsigned threads = 1) {
  detail::check_open_theta(theta);
  if (replicates < 1) throw DomainError("rho_convergence_report: replicates must be >= 1");
  std::sort(checkpoints.begin(), checkpoints.end());
  for (const Graph& h : patterns)
    if (h.order() > EmbeddingLimits{}.max_pattern_order) throw CapabilityError("pattern above embedding guard");

  // rho[r][c][h]
  std::vector<std::vector<std::vector<double>>> rho(replicates);
  parallel_for(
      replicates,
      [&](std::size_t r) {
        RelabeledErProcess x(theta, CounterRng::stream(master_seed, r));
        for (std::uint64_t n : checkpoints) {
          while (x.order() < n) x.step();
          std::vector<double> row;
          for (const Graph& h : patterns) row.push_back(h.order() <= n ? sampling_density(h, x.unlabeled()) : 0.0);
          rho[r].push_back(std::move(row));
        }
      },
      threads);

  Table t{{"H_id", "n", "mean_rho", "stderr", "expected"}, {}};
  const auto reps = static_cast<double>(replicates);
  for (std::size_t h = 0; h < patterns.size(); ++h) {
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      double sum = 0;
      double sq = 0;
      for (std::uint64_t r = 0; r < replicates; ++r) {
        sum += rho[r][c][h];
        sq += rho[r][c][h] * rho[r][c][h];
      }
      const double mean = sum / reps;
      const double var = replicates > 1 ? std::max(0.0, (sq - reps * mean * mean) / (reps - 1)) : 0.0;
      t.add({static_cast<std::int64_t>(h), static_cast<std::int64_t>(checkpoints[c]), mean, std::sqrt(var / reps),
             er_limit_value(patterns[h], theta)});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& report_names() {
  static const std::vector<std::string> names{"summary", "trajectory", "figure1", "figure2", "edge-freeze",
                                              "rho-convergence"};
  return names;
}

struct ExperimentConfig {
  ChainSpec chain{ChainKind::bst, std::nullopt};
  std::uint64_t horizon = 100;
  std::uint64_t replicates = 1;
  std::uint64_t master_seed = 1;
  std::vector<std::string> outputs{"summary"};
  OutputFormat format = OutputFormat::csv;
  std::size_t depth = 10;
  std::string out = ".";
  unsigned threads = 1;
  Vertex window = 3;
  KeySource source = KeySource::pi_left;

  /// Every violated constraint, in a fixed order.
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (is_er_chain(chain.kind) != chain.theta.has_value()) {
      v.push_back(is_er_chain(chain.kind) ? "theta is required for " + std::string(to_string(chain.kind))
                                          : "theta is only meaningful for the Erdos-Renyi chains");
    } else {
      try {
        chain.validate();
      } catch (const DomainError& e) {
        v.emplace_back(e.what());
      }
    }
    if (horizon < 1) v.push_back("horizon must be >= 1");
    if (replicates < 1) v.push_back("replicates must be >= 1");
    if (depth > kMaxGridDepth) v.push_back("depth must be <= 16");
    if (outputs.empty()) v.push_back("outputs must name at least one report");
    for (const auto& o : outputs) {
      if (std::find(report_names().begin(), report_names().end(), o) == report_names().end()) {
        v.push_back("unknown report \"" + o + "\"");
      } else if ((o == "figure1" || o == "figure2") && chain.kind != ChainKind::bst) {
        v.push_back(o + " needs chain=bst");
      } else if (o == "edge-freeze" && chain.kind != ChainKind::uniform_attachment) {
        v.push_back("edge-freeze needs chain=uniform-attachment");
      } else if (o == "rho-convergence" && chain.kind != ChainKind::er_relabel) {
        v.push_back("rho-convergence needs chain=er-relabel");
      }
    }
    if (std::find(outputs.begin(), outputs.end(), "edge-freeze") != outputs.end() &&
        (window < 2 || window > kMaxFreezeWindow || horizon < window)) {
      v.push_back("edge-freeze needs 2 <= window <= 6 and horizon >= window");
    }
    return v;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ValidationError(msg);
  }

  Json to_json() const {
    Json j = {{"chain", std::string(to_string(chain.kind))},
              {"horizon", horizon},
              {"replicates", replicates},
              {"master_seed", master_seed},
              {"outputs", outputs},
              {"format", to_string(format)},
              {"depth", depth},
              {"out", out},
              {"threads", threads},
              {"window", window},
              {"source", to_string(source)}};
    if (chain.theta) j["theta"] = *chain.theta;
    return j;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

// Applies one key to the config; problems are appended to `errors`.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                             std::vector<std::string>& errors) {
  auto number = [&](auto& field) {
    if (!parse_number(value, field)) errors.push_back(key + ": not a number: \"" + value + "\"");
  };
  try {
    if (key == "chain") {
      cfg.chain.kind = parse_chain_kind(value);
    } else if (key == "theta") {
      double t = 0;
      if (!parse_number(value, t)) errors.push_back("theta: not a number: \"" + value + "\"");
      else cfg.chain.theta = t;
    } else if (key == "horizon") {
      number(cfg.horizon);
    } else if (key == "replicates") {
      number(cfg.replicates);
    } else if (key == "master_seed" || key == "seed") {
      number(cfg.master_seed);
    } else if (key == "depth") {
      number(cfg.depth);
    } else if (key == "threads") {
      number(cfg.threads);
    } else if (key == "window") {
      number(cfg.window);
    } else if (key == "outputs") {
      cfg.outputs.clear();
      std::stringstream ss(value);
      for (std::string item; std::getline(ss, item, ',');)
        if (auto t = trim(item); !t.empty()) cfg.outputs.push_back(t);
    } else if (key == "format") {
      cfg.format = parse_output_format(value);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "source") {
      cfg.source = parse_key_source(value);
    } else {
      errors.push_back("unknown key \"" + key + "\"");
    }
  } catch (const ValidationError& e) {
    errors.emplace_back(e.what());
  }
}

}  // namespace detail

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Splits config text into (key, value) pairs without interpreting them.
/// The text is either a JSON object or "key = value" lines ('#' starts a
/// comment); list values in JSON become comma-separated strings.
inline ConfigEntries read_config_entries(const std::string& text) {
  ConfigEntries entries;
  const std::string body = detail::trim(text);
  if (!body.empty() && body.front() == '{') {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config: JSON config must be an object");
    for (const auto& [key, value] : j.items()) {
      std::string v;
      if (value.is_string()) {
        v = value.get<std::string>();
      } else if (value.is_array()) {
        for (const auto& item : value) v += (v.empty() ? "" : ",") + (item.is_string() ? item.get<std::string>() : item.dump());
      } else {
        v = value.dump();
      }
      entries.emplace_back(key, v);
    }
    return entries;
  }
  std::vector<std::string> errors;
  std::stringstream ss(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    entries.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  if (!errors.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& s : errors) msg += "\n  - " + s;
    throw ValidationError(msg);
  }
  return entries;
}

/// Applies entries in order (later ones win) and validates the result.
/// Unknown keys and unparsable values are reported together with the
/// semantic violations.
inline ExperimentConfig apply_config_entries(const ConfigEntries& entries, ExperimentConfig cfg = {}) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : entries) detail::apply_config_key(cfg, key, value, errors);
  for (auto& v : cfg.violations()) errors.push_back(std::move(v));
  if (!errors.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& s : errors) msg += "\n  - " + s;
    throw ValidationError(msg);
  }
  return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig cfg = {}) {
  return apply_config_entries(read_config_entries(text), std::move(cfg));
}

/// Per-replicate time series of a scalar summary of the chain state.
inline Table summary_report(const std::vector<Trajectory>& runs) {
  Table t{{"replicate", "n", "statistic", "value"}, {}};
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Trajectory& tr = runs[r];
    double stat = 0;
    std::string name;
    switch (tr.spec().kind) {
      case ChainKind::polya: name = "red_proportion"; stat = 0.5; break;
      case ChainKind::records: name = "records"; stat = 1; break;
      case ChainKind::bst: name = "L_minus_H"; stat = 0; break;
      default: name = "edges"; stat = 0; break;
    }
    std::uint64_t red = 0;
    double mass = 1;
    for (std::uint64_t n = 1; n <= tr.horizon(); ++n) {
      std::visit(
          [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UrnDraw>) {
              red += d.red;
              stat = static_cast<double>(red + 1) / static_cast<double>(n + 1);
            } else if constexpr (std::is_same_v<T, RecordBit>) {
              stat += d.record;
            } else if constexpr (std::is_same_v<T, EdgeAdditions> || std::is_same_v<T, RelabeledAdditions>) {
              stat += static_cast<double>(d.edges.size());
            } else if constexpr (std::is_same_v<T, ChosenExternal>) {
              mass += std::ldexp(1.0, -static_cast<int>(d.word.length()));
            }
          },
          tr.delta(n));
      if (tr.spec().kind == ChainKind::bst) stat = mass - harmonic(n);
      t.add({static_cast<std::int64_t>(r), static_cast<std::int64_t>(n), name, stat});
    }
  }
  return t;
}

struct ExperimentResult {
  std::vector<std::string> files;
  Json manifest;
};

/// Runs the configured reports and writes them, with manifest.json, into
/// cfg.out. Report files are a pure function of the config.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (!fs::is_directory(cfg.out)) throw IoError("cannot create output directory \"" + cfg.out + "\"");

  const std::string ext = cfg.format == OutputFormat::csv ? ".csv" : ".jsonl";
  ExperimentResult result;
  Json oracles = Json::object();
  auto emit = [&](const std::string& name, const Table& t) {
    const std::string file = name + ext;
    auto out = open_output((fs::path(cfg.out) / file).string());
    write_table(out, t, cfg.format);
    if (!out) throw IoError("write failed for \"" + file + "\"");
    result.files.push_back(file);
  };

  std::vector<Trajectory> runs;
  auto need_runs = [&] {
    if (!runs.empty()) return;
    std::vector<std::optional<Trajectory>> slots(cfg.replicates);
    parallel_for(
        cfg.replicates,
        [&](std::size_t r) {
          slots[r] = simulate(cfg.chain, cfg.horizon, CounterRng::stream(cfg.master_seed, r), cfg.master_seed);
        },
        cfg.threads);
    for (auto& s : slots) runs.push_back(std::move(*s));
  };

  std::vector<std::uint64_t> thirds{std::max<std::uint64_t>(1, cfg.horizon / 4),
                                    std::max<std::uint64_t>(1, cfg.horizon / 2), cfg.horizon};
  thirds.erase(std::unique(thirds.begin(), thirds.end()), thirds.end());

  for (const std::string& report : cfg.outputs) {
    if (report == "summary") {
      need_runs();
      emit(report, summary_report(runs));
    } else if (report == "trajectory") {
      need_runs();
      for (std::size_t r = 0; r < runs.size(); ++r) {
        const std::string file = "trajectory-" + std::to_string(r) + ".jsonl";
        auto out = open_output((fs::path(cfg.out) / file).string());
        write_trajectory_jsonl(out, runs[r]);
        if (!out) throw IoError("write failed for \"" + file + "\"");
        result.files.push_back(file);
      }
    } else if (report == "figure1") {
      Table all{{"replicate", "n", "beta", "B_value"}, {}};
      for (std::uint64_t r = 0; r < cfg.replicates; ++r) {
        const Table t = figure1_data(thirds, mix64(cfg.master_seed ^ mix64(r)), cfg.depth);
        for (const auto& row : t.rows) all.add({static_cast<std::int64_t>(r), row[0], row[1], row[2]});
      }
      emit(report, all);
    } else if (report == "figure2") {
      std::vector<std::uint64_t> ns{std::max<std::uint64_t>(1, cfg.horizon / 2), cfg.horizon};
      ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
      Table t = figure2_data(ns, cfg.source, cfg.depth, cfg.master_seed);
      t.columns.push_back("expected_at_ones");
      oracles["figure2.expected_at_ones"] = "silhouette_mass - harmonic";
      // The all-ones row of each curve carries the closed form L_n - H(n).
      const auto trees = bst_snapshots(key_stream(cfg.source, ns.back(), cfg.master_seed), ns);
      for (auto& row : t.rows) {
        row.emplace_back(std::monostate{});
        if (std::get<double>(row[1]) != 1.0) continue;
        const auto n = static_cast<std::uint64_t>(std::get<std::int64_t>(row[0]));
        const auto idx = static_cast<std::size_t>(std::find(ns.begin(), ns.end(), n) - ns.begin());
        row.back() = silhouette_mass(trees[idx]) - harmonic(n);
      }
      emit(report, t);
    } else if (report == "edge-freeze") {
      oracles["edge-freeze.expected_never"] = "entry_tail_prob";
      emit(report, edge_freeze_report(cfg.window, cfg.horizon, cfg.replicates, cfg.master_seed, cfg.threads));
    } else if (report == "rho-convergence") {
      oracles["rho-convergence.expected"] = "er_limit_value";
      const std::vector<Graph> patterns{Graph(1), Graph::complete(2), Graph::complete(3)};
      std::vector<std::uint64_t> cps;
      for (std::uint64_t n : thirds)
        if (n >= 3) cps.push_back(n);
      if (cps.empty()) cps.push_back(cfg.horizon);
      emit(report, rho_convergence_report(*cfg.chain.theta, patterns, cps, cfg.replicates, cfg.master_seed,
                                          cfg.threads));
    }
  }

  Json seeds = Json::array();
  for (std::uint64_t r = 0; r < cfg.replicates; ++r) {
    seeds.push_back({{"replicate", r}, {"stream_key", CounterRng::stream(cfg.master_seed, r).key()}});
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.manifest = {{"config", cfg.to_json()},
                     {"seeds", seeds},
                     {"rng", "splitmix64 counter streams"},
                     {"code_version", PERSIST_VERSION},
                     {"reports", result.files},
                     {"oracles", oracles},
                     {"wall_time_seconds", wall}};
  auto out = open_output((fs::path(cfg.out) / "manifest.json").string());
  out << result.manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed for manifest.json");
  return result;
}

}  // namespace persist
