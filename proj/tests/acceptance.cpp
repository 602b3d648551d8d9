// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "persist/lab.hpp"
#include "persist/transforms.hpp"

namespace {

using namespace persist;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 ------------------------------------------------------------------------

Verdict check_ua_formulas() {
  const ChainSpec ua{ChainKind::uniform_attachment, std::nullopt};
  const State start = start_state(ua.kind);
  std::size_t pairs = 0;
  std::size_t exact_bad = 0;
  std::size_t float_bad = 0;
  for (Vertex n = 1; n <= 4; ++n) {
    for (const Graph& gn : all_graphs(n)) {
      const Rational marginal = exact_conditional_oracle(ua, start, gn);
      if (ua_marginal_prob_exact(gn) != marginal) ++exact_bad;
      const LogProb lm = ua_marginal_prob(gn);
      if (marginal == 0 ? !lm.is_impossible() : std::abs(lm.prob() / to_double(marginal) - 1) > 1e-12) ++float_bad;
      for (Vertex m = 1; m < n; ++m) {
        for (const Graph& gm : all_graphs(m)) {
          ++pairs;
          const Rational p = exact_conditional_oracle(ua, gm, gn);
          if (ua_transition_prob_exact(gm, gn) != p) ++exact_bad;
          const LogProb lp = ua_transition_prob(gm, gn);
          if (p == 0 ? !lp.is_impossible() : std::abs(lp.prob() / to_double(p) - 1) > 1e-12) ++float_bad;
        }
      }
    }
  }
  return {exact_bad == 0 && float_bad == 0, std::to_string(pairs) + " pairs, " + std::to_string(exact_bad) +
                                                " exact mismatches, " + std::to_string(float_bad) +
                                                " log-space mismatches"};
}

// 2 ------------------------------------------------------------------------

Verdict check_entry_time() {
  constexpr std::uint64_t runs = 100'000;
  std::uint64_t absent = 0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    CounterRng rng = CounterRng::stream(20'000, r);
    Graph g(1);
    while (g.order() < 9) detail::ua_advance(g, rng);
    absent += !g.has_edge(1, 2);
  }
  const double p_hat = static_cast<double>(absent) / static_cast<double>(runs);
  auto z = [&](double p) { return std::abs(p_hat - p) / std::sqrt(p * (1 - p) / static_cast<double>(runs)); };
  const double stated = 0.2;
  const double product = to_double(entry_tail_prob(1, 2, 9));
  std::ostringstream d;
  d << "P(tau_12 > 9) observed " << fmt("%.5f", p_hat) << "; z = " << fmt("%.1f", z(stated))
    << " against 2/10, z = " << fmt("%.2f", z(product)) << " against entry_tail_prob = 1/9";
  return {z(stated) <= 3.0, d.str()};
}

// 3 ------------------------------------------------------------------------

Verdict check_er_kernel_enumeration() {
  const ChainSpec er{ChainKind::er_relabel, 0.5};
  const Rational half = ratio(1, 2);
  std::size_t checked = 0;
  std::size_t bad = 0;
  for (const Graph& g2 : all_graphs(2)) {
    for (const Graph& g3 : all_graphs(3)) {
      // P(X_3 = G_3) sums 2 * 2 outcomes into time 2 and 4 * 6 into time 3.
      const Rational uncond = exact_conditional_oracle(er, start_state(er.kind), g3);
      const Rational cond = exact_conditional_oracle(er, g2, g3);
      const Rational want = cond / uncond;
      ++checked;
      if (er_kernel_exact(g2, g3, half) != want) ++bad;
      if (std::abs(er_kernel(g2, g3, 0.5) - to_double(want)) > 1e-12) ++bad;
    }
  }
  return {bad == 0, std::to_string(checked) + " (G_2, G_3) pairs, " + std::to_string(bad) + " mismatches"};
}

// 4 ------------------------------------------------------------------------

Verdict check_er_limit() {
  bool ok = true;
  std::ostringstream d;
  for (double theta : {0.3, 0.5}) {
    const Table t = rho_convergence_report(theta, {Graph::complete(2)}, {500}, 200, 40'000, 0);
    const double mean = std::get<double>(t.rows[0][2]);
    const double se = std::get<double>(t.rows[0][3]);
    const double z = std::abs(mean - theta) / se;
    ok = ok && z <= 3.0;
    d << "theta " << theta << ": mean " << fmt("%.5f", mean) << " (z = " << fmt("%.2f", z) << ") ";
  }
  return {ok, d.str()};
}

// 5 ------------------------------------------------------------------------

Verdict check_c_moments() {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double first = integrator.integrate([](double t) { return c_func(t); }, 0.0, 1.0);
  const double second = integrator.integrate([](double t) { return c_func(t) * c_func(t); }, 0.0, 1.0);
  const double target = 1.0 - std::numbers::pi * std::numbers::pi / 12.0;
  const double e1 = std::abs(first);
  const double e2 = std::abs(second - target);
  return {e1 < 1e-8 && e2 < 1e-8,
          "int C = " + fmt("%.3e", first) + ", int C^2 - (1 - pi^2/12) = " + fmt("%.3e", second - target)};
}

// 6 ------------------------------------------------------------------------

Verdict check_silhouette_identity() {
  double worst = 0;
  std::size_t trees = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    CounterRng rng = CounterRng::stream(60'000, seed);
    BinaryTree x;
    while (x.size() < 10'000) {
      detail::bst_advance(x, rng);
      if (x.size() % 97 == 0 || x.size() == 10'000) {
        const auto m = silhouette_mass_two_way(x);
        worst = std::max(worst, std::abs(m.by_nodes - m.by_externals));
        ++trees;
      }
    }
  }
  std::set<BinaryTree> level{BinaryTree()};
  std::size_t defects = 0;
  std::size_t shapes = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (const BinaryTree& x : level) {
      ++shapes;
      if (silhouette_martingale_defect(x) != 0) ++defects;
    }
    std::set<BinaryTree> next;
    for (const BinaryTree& x : level)
      for (std::size_t slot = 0; slot < x.external_count(); ++slot) {
        BinaryTree y = x;
        y.grow(slot);
        next.insert(std::move(y));
      }
    level = std::move(next);
  }
  std::ostringstream d;
  d << "two-way gap " << fmt("%.2e", worst) << " over " << trees << " trees up to n = 10^4; " << defects
    << " nonzero martingale defects over " << shapes << " shapes with n <= 8";
  return {worst <= 1e-12 && defects == 0, d.str()};
}

// 7 ------------------------------------------------------------------------

Verdict check_kl_identity() {
  double worst = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    CounterRng rng = CounterRng::stream(70'000, r);
    const XiTable xt = sample_xi_table(10, rng);
    for (std::size_t k = 1; k <= 10; ++k) worst = std::max(worst, std::abs(l_infty_partial(xt, k) - kl_identity_rhs(xt, k)));
  }
  return {worst <= 1e-10, "max gap " + fmt("%.2e", worst) + " over 100 tables, k = 1..10"};
}

// 8 ------------------------------------------------------------------------

Verdict check_records_coupling() {
  std::map<BinaryTree, Rational> law{{BinaryTree(), Rational(1)}};
  const std::vector<End> ends{End::zeros(), End::ones(), End(Word("01"), 0), End(Word("1001"), 1), End(Word("0110"), 0)};
  std::size_t bad = 0;
  for (std::uint64_t n = 1; n <= 6; ++n) {
    if (n > 1) {
      std::map<BinaryTree, Rational> next;
      for (const auto& [x, p] : law)
        for (const auto& [y, q] : bst_step_distribution(x)) next[y] += p * q;
      law = std::move(next);
    }
    const auto records = records_distribution(n);
    for (const End& u : ends) {
      std::vector<Rational> pmf(n + 1, 0);
      Rational mean = 0;
      for (const auto& [x, p] : law) {
        const std::size_t b = boundary_function(x, u);
        if (b > n) {
          ++bad;
          continue;
        }
        pmf[b] += p;
        mean += p * Rational(static_cast<std::int64_t>(b));
      }
      if (pmf != records) ++bad;
      if (mean != harmonic_exact(n)) ++bad;
    }
  }
  return {bad == 0, std::to_string(bad) + " mismatches over n <= 6 and " + std::to_string(ends.size()) + " ends"};
}

// 9 ------------------------------------------------------------------------

Verdict check_h_transform() {
  std::size_t checked = 0;
  std::size_t bad = 0;
  for (const Graph& zeros : all_graphs(4)) {
    // Each graph on [4] names the pairs with M(i, j) = 0.
    AdjacencyLimit m(4);
    zeros.for_each_edge([&](Edge e) { m.set(e.i, e.j, false); });
    for (Vertex n = 1; n <= 3; ++n)
      for (const Graph& x : all_graphs(n)) {
        if (!m.admits(x)) continue;
        const auto doob = doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel_exact(y, m); });
        std::map<Graph, Rational> a;
        std::map<Graph, Rational> b;
        for (const auto& [y, p] : doob.outcomes) a[y] += p;
        for (const auto& [y, p] : ua_conditioned_step_distribution(x, ConditionedChain{m})) b[y] += p;
        ++checked;
        if (a != b || doob.row_sum != 1) ++bad;
      }
  }
  std::uint64_t forbidden = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng = CounterRng::stream(90'000, seed);
    AdjacencyLimit m(8);
    for (Vertex j = 2; j <= 8; ++j)
      for (Vertex i = 1; i < j; ++i) m.set(i, j, rng.bernoulli(0.5));
    const ConditionedChain chains[] = {ConditionedChain{m}, ConditionedChain{IsolatedNode{1 + static_cast<Vertex>(seed % 8)}}};
    for (const ConditionedChain& chain : chains) {
      const ConditionedRun run = simulate_conditioned(chain, 500, 91'000 + seed);
      const Graph g = std::get<Graph>(run.trajectory.state(500));
      g.for_each_edge([&](Edge e) { forbidden += !chain.allowed(e.i, e.j); });
    }
  }
  std::ostringstream d;
  d << checked << " (M, x) one-step laws, " << bad << " mismatches; " << forbidden
    << " forbidden edges in 40 conditioned runs of 500 steps";
  return {bad == 0 && forbidden == 0, d.str()};
}

// 10 -----------------------------------------------------------------------

Verdict check_figures() {
  const auto left = pi_stream(PiSide::left, 2);
  const auto right = pi_stream(PiSide::right, 2);
  const bool heads = left[0] == 0.1415926535 && left[1] == 0.2643383279 && right[0] == 0.8979323846 &&
                     right[1] == 0.5028841971;
  const Table fig = figure2_data({500, 1000}, KeySource::pi_left, 10);
  const auto tree = bst_snapshots(pi_stream(PiSide::left, 1000), {1000}).front();
  const double frac = left_subtree_fraction(tree);
  std::size_t decreasing = 0;
  std::vector<double> mean_gap(3, 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto gaps = y_cauchy_gaps({250, 500, 1000}, seed, 10);
    decreasing += gaps[0] > gaps[1] && gaps[1] > gaps[2];
    for (std::size_t i = 0; i < 3; ++i) mean_gap[i] += gaps[i] / 50.0;
  }
  std::ostringstream d;
  d << "stream heads " << (heads ? "exact" : "WRONG") << ", " << fig.rows.size() << " figure rows, left fraction "
    << fmt("%.4f", frac) << ", Cauchy gaps decreasing in " << decreasing << "/50 seeds (mean gaps "
    << fmt("%.4f", mean_gap[0]) << ", " << fmt("%.4f", mean_gap[1]) << ", " << fmt("%.4f", mean_gap[2]) << ")";
  return {heads && std::abs(frac - 0.1416) <= 0.02 && decreasing >= 45, d.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "uniform attachment formulas vs exact oracle", 30, check_ua_formulas},
      {2, "entry-time law P(tau_12 > 9) vs 0.2", 60, check_entry_time},
      {3, "relabeled ER kernel vs enumeration", 5, check_er_kernel_enumeration},
      {4, "rho(K2, X_500) limit", 120, check_er_limit},
      {5, "C moments by quadrature", 10, check_c_moments},
      {6, "L_n identity and martingale", 60, check_silhouette_identity},
      {7, "KL identity", 10, check_kl_identity},
      {8, "records coupling", 10, check_records_coupling},
      {9, "h-transform consistency", 60, check_h_transform},
      {10, "figure reproduction diagnostics", 120, check_figures},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
