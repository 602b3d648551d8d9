// persist: command-line front end for the chain simulators, kernels,
// conditioned chains, silhouette curves and experiment bundles.
//
// Exit codes: 0 ok, 2 invalid input or config, 3 capability guard, 4 I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "persist/lab.hpp"
#include "persist/transforms.hpp"

namespace {

using namespace persist;

constexpr int kExitValidation = 2;
constexpr int kExitCapability = 3;
constexpr int kExitIo = 4;

struct Globals {
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string format = "csv";
  std::string config;
};

std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
void with_output(const std::string& path, F&& write) {
  if (path == "-") {
    write(std::cout);
    std::cout.flush();
    if (!std::cout) throw IoError("write to standard output failed");
    return;
  }
  auto out = open_output(path);
  write(out);
  out.flush();
  if (!out) throw IoError("write failed for \"" + path + "\"");
}

Graph load_graph(const std::string& path) {
  auto in = open_input(path);
  return read_graph(in);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string chain;
  std::optional<double> theta;
  std::uint64_t horizon = 100;
  bool summary = false;
};

void run_simulate(const Globals& g, const SimulateArgs& a) {
  const ChainSpec spec{parse_chain_kind(a.chain), a.theta};
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  if (a.horizon < 1) throw ValidationError("horizon must be >= 1");
  const Trajectory tr = simulate(spec, a.horizon, CounterRng::stream(g.seed, 0), g.seed);
  with_output(g.out, [&](std::ostream& out) {
    if (a.summary) write_table(out, summary_report({tr}), parse_output_format(g.format));
    else write_trajectory_jsonl(out, tr);
  });
}

// ---------------------------------------------------------------------------

struct KernelArgs {
  std::string kind;
  std::string from;
  std::string to;
  std::string limit;
  std::optional<double> theta;
  bool no_oracle = false;
};

Json exact_json(const std::string& method, const Rational& q) {
  return {{"method", method}, {"exact", to_string(q)}, {"value", to_double(q)}};
}

// K(x, y) = P(X_n = y | X_m = x) / P(X_n = y) by forward enumeration.
Json kernel_oracle(const ChainSpec& spec, const Graph& gm, const Graph& gn) {
  const OracleLimits limits;
  if (gn.order() > limits.max_graph_time) return nullptr;
  const Rational denom = exact_conditional_oracle(spec, start_state(spec.kind), State(gn), limits);
  if (denom == 0) return nullptr;
  return exact_json("exact_conditional_oracle", exact_conditional_oracle(spec, State(gm), State(gn), limits) / denom);
}

void run_kernel(const Globals& g, const KernelArgs& a) {
  Json result;
  double value = 0;
  result["kind"] = a.kind;
  const bool needs_theta = a.kind == "er" || a.kind == "pm";
  if (needs_theta != a.theta.has_value()) {
    throw ValidationError(needs_theta ? "--theta is required for kind " + a.kind
                                      : "--theta is only meaningful for kinds er and pm");
  }
  if (a.kind == "ua-extended") {
    if (a.limit.empty() || !a.to.empty()) throw ValidationError("kind ua-extended takes --from and --limit");
    const Graph gm = load_graph(a.from);
    auto in = open_input(a.limit);
    const AdjacencyLimit m = read_adjacency_limit(in);
    value = ua_extended_kernel(gm, m);
    result["m"] = gm.order();
    result["n"] = nullptr;
    result["oracle"] = a.no_oracle ? Json(nullptr) : exact_json("exact_extended_kernel", ua_extended_kernel_exact(gm, m));
  } else {
    if (a.to.empty() || !a.limit.empty()) throw ValidationError("kind " + a.kind + " takes --from and --to");
    const Graph gm = load_graph(a.from);
    const Graph gn = load_graph(a.to);
    std::optional<ChainSpec> spec;
    if (a.kind == "ua") {
      value = ua_kernel(gm, gn);
      spec = ChainSpec{ChainKind::uniform_attachment, std::nullopt};
    } else if (a.kind == "er") {
      value = er_kernel(gm, gn, *a.theta);
      spec = ChainSpec{ChainKind::er_relabel, a.theta};
    } else if (a.kind == "pm") {
      value = pm_kernel(gm, gn, *a.theta);
      spec = ChainSpec{ChainKind::er_memory, a.theta};
    } else {
      throw ValidationError("kind must be ua, ua-extended, er or pm, got \"" + a.kind + "\"");
    }
    result["m"] = gm.order();
    result["n"] = gn.order();
    result["oracle"] = a.no_oracle ? Json(nullptr) : kernel_oracle(*spec, gm, gn);
  }
  result["value"] = value;
  result["log_value"] = value > 0 ? Json(std::log(value)) : Json("-inf");
  with_output(g.out, [&](std::ostream& out) { out << result.dump() << '\n'; });
}

// ---------------------------------------------------------------------------

struct TransformArgs {
  std::string target_file;
  std::optional<Vertex> isolate;
  bool literal = false;
  std::uint64_t horizon = 100;
};

void run_transform(const Globals& g, const TransformArgs& a) {
  if (a.target_file.empty() == !a.isolate.has_value()) {
    throw ValidationError("give exactly one of --target-file and --isolate");
  }
  if (a.horizon < 1) throw ValidationError("horizon must be >= 1");
  std::optional<ConditionedChain> chain;
  Json target;
  if (a.isolate) {
    if (*a.isolate < 1) throw ValidationError("--isolate must name a vertex >= 1");
    const IsolationMode mode = a.literal ? IsolationMode::literal : IsolationMode::both;
    chain = ConditionedChain{IsolatedNode{*a.isolate, mode}};
    target = {{"isolate", *a.isolate}, {"mode", a.literal ? "literal" : "both"}};
  } else {
    auto in = open_input(a.target_file);
    const AdjacencyLimit m = read_adjacency_limit(in);
    std::ostringstream text;
    write_adjacency_limit(text, m);
    chain = ConditionedChain{m};
    target = {{"window", m.window()}, {"limit", text.str()}};
  }
  const ConditionedRun run = simulate_conditioned(*chain, a.horizon, g.seed);
  const Trajectory& tr = run.trajectory;
  with_output(g.out, [&](std::ostream& out) {
    out << Json{{"n", 1},
                {"kind", std::string(to_string(tr.spec().kind))},
                {"seed", tr.seed()},
                {"delta", nullptr},
                {"target", target},
                {"forbidden_free", static_cast<bool>(run.forbidden_free[0])}}
               .dump()
        << '\n';
    for (std::uint64_t n = 2; n <= tr.horizon(); ++n) {
      out << Json{{"n", n}, {"delta", delta_to_json(tr.delta(n))}, {"forbidden_free", static_cast<bool>(run.forbidden_free[n - 1])}}
                 .dump()
          << '\n';
    }
  });
}

// ---------------------------------------------------------------------------

struct SilhouetteArgs {
  std::string tree;
  std::optional<std::uint64_t> size;
  std::string source;
  std::string curve = "B";
  std::size_t depth = 10;
};

void run_silhouette(const Globals& g, const SilhouetteArgs& a) {
  if (a.tree.empty() == !a.size.has_value()) throw ValidationError("give exactly one of --tree and --size");
  if (a.depth > kMaxGridDepth) throw CapabilityError("end grid depth above 16");
  BinaryTree x;
  if (!a.tree.empty()) {
    auto in = open_input(a.tree);
    x = read_tree(in);
  } else if (!a.source.empty()) {
    if (*a.size < 1) throw ValidationError("--size must be >= 1");
    x = bst_snapshots(key_stream(parse_key_source(a.source), *a.size, g.seed), {*a.size}).front();
  } else {
    if (*a.size < 1) throw ValidationError("--size must be >= 1");
    CounterRng rng = CounterRng::stream(g.seed, 0);
    while (x.size() < *a.size) detail::bst_advance(x, rng);
  }
  if (x.size() < 1) throw ValidationError("tree must have at least one node");
  Table t{{"beta_of_end", "value"}, {}};
  const auto grid = end_grid(a.depth);
  if (a.curve == "B") {
    for (const End& u : grid) t.add({beta_map(u), static_cast<std::int64_t>(boundary_function(x, u))});
  } else if (a.curve == "Y") {
    const SmoothedSilhouette y(x);
    for (const End& u : grid) t.add({beta_map(u), y(u)});
  } else {
    throw ValidationError("curve must be B or Y, got \"" + a.curve + "\"");
  }
  with_output(g.out, [&](std::ostream& out) { write_table(out, t, parse_output_format(g.format)); });
}

// ---------------------------------------------------------------------------

void run_experiment_command(const CLI::App& sub, const ConfigEntries& from_file) {
  ConfigEntries entries = from_file;
  // Command-line values override the config file.
  for (const char* key : {"chain", "theta", "horizon", "replicates", "outputs", "depth", "threads", "window", "source"}) {
    const CLI::Option* opt = sub.get_option(std::string("--") + key);
    if (opt->count() > 0) entries.emplace_back(key, opt->as<std::string>());
  }
  const CLI::App* root = sub.get_parent();
  for (const char* key : {"seed", "format", "out"}) {
    const CLI::Option* opt = root->get_option(std::string("--") + key);
    if (opt->count() > 0) entries.emplace_back(key, opt->as<std::string>());
  }
  ExperimentConfig cfg = apply_config_entries(entries);
  if (cfg.out == "-") throw ValidationError("experiment output must be a directory, not standard output");
  const ExperimentResult res = run_experiment(cfg);
  std::cout << res.manifest.dump(2) << '\n';
}

// Inserts the config file entries as --key=value tokens right after the
// subcommand name, so explicit flags later on the line take precedence.
std::vector<std::string> splice_config(const std::vector<std::string>& args, std::size_t sub_pos,
                                       const ConfigEntries& entries) {
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  for (const auto& [key, value] : entries) {
    std::string flag = key == "master_seed" ? "seed" : key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    out.push_back("--" + flag + "=" + value);
  }
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Simulate combinatorial Markov chains, evaluate their Martin kernels, h-transforms and BST "
               "silhouette functionals, and write reproducible experiment bundles."};
  app.name("persist");
  app.set_version_flag("--version", PERSIST_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file ('-' for standard output) or experiment directory")
      ->capture_default_str();
  app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  app.add_option("--config", g.config, "Config file: key = value lines or a JSON object");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one chain and write its trajectory as JSONL");
  simulate_cmd->add_option("--chain", sim.chain, "polya, records, uniform-attachment, er-memory, er-relabel or bst")
      ->required();
  simulate_cmd->add_option("--theta", sim.theta, "Edge probability for the Erdos-Renyi chains");
  simulate_cmd->add_option("--horizon", sim.horizon, "Final time n")->capture_default_str();
  simulate_cmd->add_flag("--summary", sim.summary, "Write the per-step summary table instead of the trajectory");

  KernelArgs ker;
  auto* kernel_cmd = app.add_subcommand("kernel", "Evaluate a Martin kernel and print it as JSON");
  kernel_cmd->add_option("--kind", ker.kind, "ua, ua-extended, er or pm")->required();
  kernel_cmd->add_option("--from", ker.from, "Graph file for the earlier state")->required();
  kernel_cmd->add_option("--to", ker.to, "Graph file for the later state");
  kernel_cmd->add_option("--limit", ker.limit, "Adjacency limit file (ua-extended)");
  kernel_cmd->add_option("--theta", ker.theta, "Edge probability (er, pm)");
  kernel_cmd->add_flag("--no-oracle", ker.no_oracle, "Skip the exact cross-check");

  TransformArgs tra;
  auto* transform_cmd = app.add_subcommand("transform", "Run the conditioned uniform attachment chain");
  transform_cmd->add_option("--target-file", tra.target_file, "Adjacency limit file to condition on");
  transform_cmd->add_option("--isolate", tra.isolate, "Vertex that stays isolated");
  transform_cmd->add_flag("--literal", tra.literal, "Only forbid edges from xi to earlier vertices");
  transform_cmd->add_option("--horizon", tra.horizon, "Final time n")->capture_default_str();

  SilhouetteArgs sil;
  auto* silhouette_cmd = app.add_subcommand("silhouette", "Write the B or Y curve of a tree over an end grid");
  silhouette_cmd->add_option("--tree", sil.tree, "Tree file, one word per line");
  silhouette_cmd->add_option("--size", sil.size, "Grow a BST of this size instead");
  silhouette_cmd->add_option("--source", sil.source, "Key stream for --size: pi-left, pi-right or seed");
  silhouette_cmd->add_option("--curve", sil.curve, "B or Y")->capture_default_str();
  silhouette_cmd->add_option("--depth", sil.depth, "Grid depth (at most 16)")->capture_default_str();

  auto* experiment_cmd = app.add_subcommand("experiment", "Run configured reports into a directory with a manifest");
  std::string unused;
  for (const char* key : {"chain", "theta", "horizon", "replicates", "outputs", "depth", "threads", "window", "source"}) {
    experiment_cmd->add_option(std::string("--") + key, unused, std::string("Config key ") + key);
  }

  // The config file is read before parsing so that it can supply required
  // flags. Its entries go right after the subcommand name.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  std::optional<std::size_t> sub_pos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& t = args[i];
    if (t.rfind("--config=", 0) == 0) {
      config_path = t.substr(9);
    } else if (t == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (t == "--seed" || t == "--out" || t == "--format") {
      ++i;
    } else if (!sub_pos && app.get_subcommand_no_throw(t) != nullptr) {
      sub_pos = i;
    }
  }
  ConfigEntries entries;
  if (!config_path.empty()) entries = read_config_entries(read_file(config_path));
  const bool experiment = sub_pos && args[*sub_pos] == "experiment";
  if (sub_pos && !experiment && !entries.empty()) args = splice_config(args, *sub_pos, entries);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub == experiment_cmd) {
    run_experiment_command(*experiment_cmd, entries);
    return 0;
  }
  if (sub == simulate_cmd) run_simulate(g, sim);
  else if (sub == kernel_cmd) run_kernel(g, ker);
  else if (sub == transform_cmd) run_transform(g, tra);
  else if (sub == silhouette_cmd) run_silhouette(g, sil);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CapabilityError& e) {
    std::cerr << "capability limit: " << e.what() << '\n';
    return kExitCapability;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
