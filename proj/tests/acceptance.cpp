// Acceptance gate: one line per criterion with its verdict, wall time and
// time budget. Exit status is 0 only if every criterion passes in budget.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <string>

#include <kmslab/oracle_store.hpp>

#include "oracles.hpp"

using namespace kmslab;

namespace {

// Pinned tolerances.
constexpr double isometry_tol = 1e-12;
constexpr double riesz_tol = 1e-10;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = "FAILED: " + what;
    pass = pass && ok;
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

const double ln2 = std::log(2.0), ln3 = std::log(3.0);
const std::vector<std::pair<double, double>> conformal_params{{ln2, 1.0}, {-ln2, 1.0}, {ln2, 2.0}, {ln3, 0.5}};
const Beta half_beta = Beta::from_half_factor(Rational(1, 2));

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Outcome conformality() {
  Outcome o;
  CheckOptions opt;
  opt.keep_rows = false;
  std::size_t cylinders = 0;
  for (auto [b, t] : conformal_params) {
    auto r = check_conformal(make_product_conformal(b, t), 8, opt);
    o.require(r.verdict(), "beta=" + fmt(b) + " theta=" + fmt(t));
    cylinders += r.tested;
  }
  o.detail = o.pass ? std::to_string(cylinders) + " cylinder identities, 4 parameter pairs, depth 8" : o.detail;
  return o;
}

Outcome kappa_duality() {
  Outcome o;
  CheckOptions opt;
  opt.keep_rows = false;
  for (auto [b, t] : conformal_params) {
    auto image = pushforward_kappa(make_product_conformal(b, t));
    o.require(image.beta() == -b && image.theta() == t, "image parameters");
    o.require(check_conformal(image, 8, opt).verdict(), "kappa image at beta=" + fmt(-b));
  }
  if (o.pass) o.detail = "4 images conformal at (-beta, theta), depth 8";
  return o;
}

Outcome equivariance() {
  Outcome o;
  std::size_t rows = 0;
  for (auto [lo, hi] : {std::pair{-4, 3}, std::pair{-4, 4}}) {
    auto sweep = equivariance_sweep(lo, hi, -2, 2);
    rows += sweep.size();
    for (const auto& r : sweep) o.require(r.pass, "word " + r.word.symbols_string() + " t=" + std::to_string(r.t));
  }
  if (o.pass) o.detail = std::to_string(rows) + " rows: 2^8 words on [-4,3] and 2^9 on [-4,4], t in [-2,2], v1 and v2";
  return o;
}

Outcome lift() {
  Outcome o;
  std::size_t checks = 0;
  for (auto [b, t] : conformal_params) {
    auto r = check_lift(lift_measure(make_product_conformal(b, t)), 5, 5);
    o.require(r.verdict(), "lift at beta=" + fmt(b) + " theta=" + fmt(t));
    checks += r.tested;
  }
  if (o.pass) o.detail = std::to_string(checks) + " generator identities, depth 5, |n| <= 5";
  return o;
}

Outcome sl2() {
  Outcome o;
  int pairs = 0;
  for (std::int64_t p = 1; p <= 20; ++p)
    for (std::int64_t q = 1; q <= 20; ++q) {
      if (std::gcd(p, q) != 1) continue;
      auto phi = make_phi(p, q);
      std::string tag = "p=" + std::to_string(p) + " q=" + std::to_string(q);
      o.require(satisfies_constraints(phi, p, q), tag + " constraints");
      o.require(cocycle_matches(phi, p, q), tag + " cocycle");
      ++pairs;
    }
  if (o.pass) o.detail = std::to_string(pairs) + " coprime pairs";
  return o;
}

Outcome tower() {
  Outcome o;
  Rational previous = 0;
  Rational at3;
  for (int K = 1; K <= 6; ++K) {
    TowerSystem t(canonical_heights(), K);
    std::string tag = "K=" + std::to_string(K);
    // permutation: every cell has exactly one preimage
    std::set<std::pair<std::uint64_t, std::int64_t>> images;
    std::size_t cells = 0;
    Rational direct = 0;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << K); ++bits) {
      BaseWord w{K, bits};
      direct += make_rational(t.height(w)) * dyadic(K);
      for (std::int64_t level = 1; level <= t.height(w); ++level, ++cells) {
        auto q = tower_step({w, level}, t);
        images.insert({q.base.bits, q.level});
      }
    }
    o.require(images.size() == cells, tag + " tower_step is not injective");
    o.require(kac_check(t), tag + " kac");
    Rational mass = tower_mass(t);
    o.require(mass == direct, tag + " mass differs from the sum over base words");
    o.require(mass > previous, tag + " mass not increasing");
    previous = mass;
    if (K == 3) at3 = mass;
  }
  o.require(at3 >= Rational(9, 4), "mass at K=3 below 9/4");
  if (o.pass) o.detail = "K=1..6 permutations, Kac, mass(K=3)=" + to_string(at3) + ", mass(K=6)=" + to_string(previous);
  return o;
}

Outcome riesz() {
  Outcome o;
  std::vector<std::int64_t> n{1, 4, 13};
  RieszSpec spec(n);
  double worst = 0;
  for (std::int64_t m = -(13 + 4); m <= 13 + 4; ++m) {
    double gap = std::abs(riesz_coefficient(m, spec).get_d() - oracle::riesz_numeric(n, m));
    worst = std::max(worst, gap);
    o.require(gap <= riesz_tol, "m=" + std::to_string(m));
    auto all = oracle::all_signed_decompositions(n, m);
    auto greedy = signed_decomposition(m, spec);
    o.require(all.size() <= 1, "m=" + std::to_string(m) + " has several decompositions");
    o.require(greedy.has_value() == !all.empty() && (!greedy || *greedy == all.front()), "greedy vs exhaustive");
  }
  if (o.pass) o.detail = "|m| <= 17, max |exact - quadrature| = " + fmt(worst) + ", decompositions unique";
  return o;
}

Outcome spectral(const std::filesystem::path& store_path) {
  Outcome o;
  auto store = OracleStore::load(store_path);
  std::string key = koopman_key({1, 4, 13}, 3);
  const auto& rec = store.at(key);
  TowerSystem t({1, 4, 13});
  std::vector<std::int64_t> lags;
  for (const auto& v : rec.values) {
    auto lag = v.at("lag").get<std::int64_t>();
    lags.push_back(lag);
    o.require(koopman_autocorrelation(t, lag) == parse_rational(v.at("value").get<std::string>()),
              "lag " + std::to_string(lag) + " differs from " + key);
  }
  o.require(static_cast<std::int64_t>(lags.size()) == t.cycle_length() + 1, "record does not cover every lag");
  SpectralThresholds th{key, {}};
  for (const auto& [lag, x] : rec.extra.at("thresholds").items()) th.per_lag[std::stoll(lag)] = parse_rational(x.get<std::string>());
  auto report = compare_spectra(t, lags, th);
  o.require(report.verdict(), "deviation above threshold");
  if (o.pass)
    o.detail = std::to_string(lags.size()) + " lags equal to " + key + ", max deviation " + to_string(report.max_deviation());
  return o;
}

void require_rows(Outcome& o, const std::string& build, const std::vector<CheckRow>& rows, bool exact, double& worst) {
  for (const auto& r : rows) {
    o.require(r.pass && r.tested > 0, build + ": " + r.identity);
    if (exact) o.require(r.max_residual == 0, build + ": nonzero exact residual in " + r.identity);
    worst = std::max(worst, r.max_residual);
  }
}

Outcome isometry() {
  Outcome o;
  double worst = 0;
  std::size_t rows = 0;
  std::vector<std::pair<std::string, IsoRep<Rational>>> exact_builds{
      {"f=0", build_theta1_rep(std::vector<std::int64_t>(4, 0), 12, half_beta)},
      {"one-descent", build_theta1_rep({0, 0, -1, -1, 0}, 12, half_beta)},
      {"staircase", build_staircase_rep({-1, -1, -3, -4}, 10, half_beta)},
  };
  for (const auto& [name, rep] : exact_builds) {
    auto r = verify_representation(rep, isometry_tol);
    require_rows(o, name, r, true, worst);
    rows += r.size();
  }
  auto u = random_unitary(4, 20240611);
  auto op = build_operator2_rep(u, spectral_projections(u, {{0, 2}, {1}, {3}}), 12);
  auto r = verify_representation(op, isometry_tol);
  require_rows(o, "operator2", r, false, worst);
  rows += r.size();
  if (o.pass) o.detail = std::to_string(rows) + " identity rows on 4 builds, max residual " + fmt(worst);
  return o;
}

Outcome measure() {
  Outcome o;
  std::size_t cells = 0;
  for (const auto& f : {std::vector<std::int64_t>(4, 0), std::vector<std::int64_t>{0, 0, -1, -1, 0}}) {
    auto rep = build_theta1_rep(f, 12, half_beta);
    auto xi = eigenvector_xi(rep);
    auto fam = coherent_from_vector(rep, xi.xi, {{0, 0}, e1, e2, {1, 1}, {2, 0}, {0, 2}, {2, 2}});
    auto mu = measure_from_eigenvector(rep, fam, isometry_tol);
    for (const auto& row : mu.checks) {
      o.require(row.pass && row.tested > 0, row.identity);
      cells += row.tested;
    }
  }
  if (o.pass) o.detail = std::to_string(cells) + " exact cell checks (support, consistency, mass, conformality)";
  return o;
}

Outcome probe() {
  Outcome o;
  std::vector<LayerMeasure<Rational>> levels;
  std::vector<Rational> included;
  for (int K = 3; K <= 5; ++K) {
    TowerSystem t(canonical_heights(), K);
    auto rep = build_theta1_rep(first_return_profile(t), 3, Beta::numeric(0), true, dyadic(K));
    levels.push_back(measure_from_eigenvector(rep, coherent_from_vector(rep, eigenvector_xi(rep).xi, {{0, 0}, e1, {2, 0}})));
    // Haar mass of the tower cells, summed over base words
    Rational mass = 0;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << K); ++bits) mass += make_rational(t.height({K, bits})) * dyadic(K);
    included.push_back(mass);
  }
  auto p = one_conformality_probe(levels, e1);
  o.require(p.trend == Trend::growing, "trend is " + std::string(to_string(p.trend)));
  o.require(p.masses == included, "layer masses differ from the included base mass");
  if (o.pass) o.detail = "K=3,4,5 masses " + to_string(p.masses[0]) + " < " + to_string(p.masses[1]) + " < " + to_string(p.masses[2]);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path store = argc > 1 ? argv[1] : std::filesystem::path(KMSLAB_SOURCE_DIR) / "data/oracle_store.json";
  std::vector<Criterion> criteria{
      {1, "conformality", 60, conformality},
      {2, "kappa duality", 30, kappa_duality},
      {3, "equivariance", 30, equivariance},
      {4, "lift", 60, lift},
      {5, "SL2 reparametrisation", 5, sl2},
      {6, "tower", 30, tower},
      {7, "riesz", 30, riesz},
      {8, "spectral comparison", 60, [&] { return spectral(store); }},
      {9, "isometry engine", 60, isometry},
      {10, "measure construction", 30, measure},
      {11, "non-1-conformality trend", 30, probe},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_budget = secs < c.budget_s;
    bool ok = o.pass && in_budget;
    failed += !ok;
    std::printf("[%s] %2d %-26s %7.2f s / %3.0f s  %s%s\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, c.budget_s,
                o.detail.c_str(), in_budget ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
