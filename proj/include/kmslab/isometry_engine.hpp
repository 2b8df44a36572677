#pragma once

// Truncated isometric representations of N^2 with commuting range
// projections: the skew-product model over an orbit segment, the model
// V1 = 1 (x) S, V2 = sum U P_k (x) S^k, and the staircase model on l^2(F x N);
// eigenvectors, coherent families and the measure read off from them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "odometer_tower.hpp"
#include "truncated_operator.hpp"

namespace kmslab {

template <class S>
using DenseMatrix = std::vector<std::vector<S>>;

template <class S>
struct IsoRep {
  std::string model;
  CellGrid grid;
  Generators<S> gen;
  Beta beta;
  std::int64_t theta = 1;
  Rational cell_weight = 1;
  // Point models only: the cocycle level of each cell (xi = e^{-beta level/2}),
  // the level of the bottom cell of each column, and lattice coordinates
  // where the model sits inside Z^2.
  std::vector<std::int64_t> levels;
  std::vector<std::int64_t> floors;
  std::vector<LatticeVector> lattice;

  bool point_model() const { return !levels.empty(); }
  std::size_t dim() const { return grid.size(); }
  std::int64_t cocycle(LatticeVector a) const { return a.m + a.n * theta; }
};

namespace detail {

inline void require_point_model(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::invalid_argument, std::string(what) + " needs a point model");
}

// The fiber shift 1 (x) S on base x [0, N).
template <class S>
void fiber_shift(IsoRep<S>& rep) {
  const auto& g = rep.grid;
  TruncatedOperator<S> v(g.size());
  for (std::size_t b = 0; b < g.base; ++b)
    for (std::size_t s = 0; s < g.fiber; ++s) {
      std::size_t c = g.index(b, s);
      if (s + 1 < g.fiber)
        v.set_column(c, {{g.index(b, s + 1), S(1)}}, false);
      else
        v.set_column(c, {}, true);
    }
  v.margin = {1, 0};
  rep.gen.V[0] = v;
  rep.gen.Vstar[0] = v.adjoint();
}

template <class S>
void merge(CheckRow& into, const CheckRow& r) {
  into.tested += r.tested;
  into.max_residual = std::max(into.max_residual, r.max_residual);
  into.margin = std::max(into.margin, r.margin);
  into.pass = into.pass && r.pass;
}

inline std::vector<LatticeVector> box_grid(std::int64_t extent) {
  std::vector<LatticeVector> out;
  for (std::int64_t m = 0; m <= extent; ++m)
    for (std::int64_t n = 0; n <= extent; ++n) out.push_back({m, n});
  return out;
}

inline bool leq(LatticeVector a, LatticeVector b) { return a.m <= b.m && a.n <= b.n; }

}  // namespace detail

// f along T-orbit segment x_0, ..., x_{B-1}; with closed, T x_{B-1} = x_0.
// X = {(x, n): n >= -f(x)} stored as (x, s) with s = n + f(x).
inline IsoRep<Rational> build_theta1_rep(const std::vector<std::int64_t>& f, std::size_t fiber, Beta beta,
                                         bool closed = false, Rational cell_weight = 1) {
  if (f.empty() || fiber == 0) fail(ErrorCode::invalid_argument, "empty orbit segment or fiber window");
  std::size_t B = f.size();
  for (std::size_t b = 0; b + 1 < B; ++b)
    if (f[b + 1] - f[b] < -1)
      fail(ErrorCode::slope_violation, "f(Tx) - f(x) = " + std::to_string(f[b + 1] - f[b]) + " at x_" + std::to_string(b));
  if (closed && f[0] - f[B - 1] < -1) fail(ErrorCode::slope_violation, "f(Tx) - f(x) < -1 across the cycle closure");

  IsoRep<Rational> rep;
  rep.model = closed ? "theta1-cycle" : "theta1-segment";
  rep.grid = {B, fiber, closed};
  rep.beta = beta;
  rep.theta = 1;
  rep.cell_weight = std::move(cell_weight);
  detail::fiber_shift(rep);

  const auto& g = rep.grid;
  auto next = [&](std::size_t b) -> std::optional<std::size_t> {
    if (b + 1 < B) return b + 1;
    if (closed) return 0;
    return std::nullopt;
  };
  TruncatedOperator<Rational> v2(g.size());
  std::int64_t reach = 0;
  for (std::size_t b = 0; b < B; ++b) {
    auto nb = next(b);
    std::int64_t phi = nb ? f[*nb] - f[b] + 1 : 0;
    reach = std::max(reach, phi);
    for (std::size_t s = 0; s < fiber; ++s) {
      std::size_t c = g.index(b, s);
      std::size_t t = s + static_cast<std::size_t>(phi);
      if (nb && t < fiber)
        v2.set_column(c, {{g.index(*nb, t), Rational(1)}}, false);
      else
        v2.set_column(c, {}, true);
    }
  }
  v2.margin = {reach, 1};
  rep.gen.V[1] = v2;
  rep.gen.Vstar[1] = v2.adjoint();
  if (!closed)
    for (std::size_t s = 0; s < fiber; ++s) rep.gen.Vstar[1].mark_lossy(g.index(0, s));

  rep.levels.resize(g.size());
  rep.floors.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    rep.floors[b] = -f[b];
    for (std::size_t s = 0; s < fiber; ++s) rep.levels[g.index(b, s)] = static_cast<std::int64_t>(s) - f[b];
  }
  return rep;
}

// a_r for r in the window F = [r0, r0 + a.size()); rows below r0 are empty.
// The cell (r, s) is the lattice point (s + a_r, r).
inline IsoRep<Rational> build_staircase_rep(const std::vector<std::int64_t>& a, std::size_t fiber, Beta beta,
                                            std::int64_t theta = 1, std::int64_t r0 = 0) {
  if (a.empty() || fiber == 0) fail(ErrorCode::invalid_argument, "empty profile or fiber window");
  for (std::size_t r = 0; r + 1 < a.size(); ++r)
    if (a[r + 1] > a[r])
      fail(ErrorCode::not_decreasing, "a_" + std::to_string(r0 + static_cast<std::int64_t>(r) + 1) + " > a_" +
                                          std::to_string(r0 + static_cast<std::int64_t>(r)));
  std::size_t M = a.size();
  IsoRep<Rational> rep;
  rep.model = "staircase";
  rep.grid = {M, fiber, false};
  rep.beta = beta;
  rep.theta = theta;
  detail::fiber_shift(rep);

  const auto& g = rep.grid;
  TruncatedOperator<Rational> w2(g.size());
  std::int64_t reach = 0;
  for (std::size_t r = 0; r < M; ++r) {
    std::int64_t k = r + 1 < M ? a[r] - a[r + 1] : 0;
    reach = std::max(reach, k);
    for (std::size_t s = 0; s < fiber; ++s) {
      std::size_t c = g.index(r, s);
      std::size_t t = s + static_cast<std::size_t>(k);
      if (r + 1 < M && t < fiber)
        w2.set_column(c, {{g.index(r + 1, t), Rational(1)}}, false);
      else
        w2.set_column(c, {}, true);
    }
  }
  w2.margin = {reach, 1};
  rep.gen.V[1] = w2;
  rep.gen.Vstar[1] = w2.adjoint();

  rep.levels.resize(g.size());
  rep.floors.resize(M);
  rep.lattice.resize(g.size());
  for (std::size_t r = 0; r < M; ++r) {
    std::int64_t row = r0 + static_cast<std::int64_t>(r);
    rep.floors[r] = a[r] + row * theta;
    for (std::size_t s = 0; s < fiber; ++s) {
      std::int64_t m = static_cast<std::int64_t>(s) + a[r];
      rep.levels[g.index(r, s)] = m + row * theta;
      rep.lattice[g.index(r, s)] = {m, row};
    }
  }
  return rep;
}

// Rows of F sorted by decrement a_r - a_{r+1}; the last row has none.
inline std::map<std::int64_t, std::vector<std::size_t>> decrement_classes(const std::vector<std::int64_t>& a) {
  std::map<std::int64_t, std::vector<std::size_t>> out;
  for (std::size_t r = 0; r + 1 < a.size(); ++r) out[a[r] - a[r + 1]].push_back(r);
  return out;
}

// Haar-distributed unitary: QR of a seeded complex Gaussian matrix with the
// phases of R's diagonal moved into Q.
inline Eigen::MatrixXcd random_unitary(Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd z(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) z(i, j) = {normal(rng), normal(rng)};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

// Projections onto coordinate blocks.
inline std::vector<Eigen::MatrixXcd> coordinate_projections(const std::vector<std::vector<Eigen::Index>>& blocks,
                                                            Eigen::Index d) {
  std::vector<Eigen::MatrixXcd> out;
  for (const auto& blk : blocks) {
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d, d);
    for (auto i : blk) p(i, i) = 1.0;
    out.push_back(p);
  }
  return out;
}

// Sums of eigenprojections of a unitary, one per block of eigenvalue indices
// (eigenvalues sorted by argument). U commutes with each of them.
inline std::vector<Eigen::MatrixXcd> spectral_projections(const Eigen::MatrixXcd& U,
                                                          const std::vector<std::vector<Eigen::Index>>& blocks) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(U);
  if (es.info() != Eigen::Success) fail(ErrorCode::invalid_argument, "eigendecomposition failed");
  Eigen::Index d = U.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return std::arg(es.eigenvalues()(a)) < std::arg(es.eigenvalues()(b)); });
  // eigenvectors of a normal matrix with distinct eigenvalues are orthogonal;
  // QR restores orthonormality lost to rounding
  Eigen::MatrixXcd v(d, d);
  for (Eigen::Index j = 0; j < d; ++j) v.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
  Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(v).householderQ();
  std::vector<Eigen::MatrixXcd> out;
  for (const auto& blk : blocks) {
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d, d);
    for (auto j : blk) p += q.col(j) * q.col(j).adjoint();
    out.push_back(p);
  }
  return out;
}

// V1 = 1 (x) S, V2 = sum_k U P_k (x) S^k on C^d (x) l^2[0, N). The ranges of
// V_a commute exactly when U normalises a commutative algebra holding the P_k.
inline IsoRep<Complex> build_operator2_rep(const Eigen::MatrixXcd& U, const std::vector<Eigen::MatrixXcd>& P,
                                           std::size_t fiber, double tol = 1e-12) {
  Eigen::Index d = U.rows();
  if (d == 0 || fiber == 0) fail(ErrorCode::invalid_argument, "empty base or fiber window");
  if (U.cols() != d) fail(ErrorCode::invalid_argument, "U is not square");
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  if ((U.adjoint() * U - id).cwiseAbs().maxCoeff() > tol) fail(ErrorCode::invalid_argument, "U is not unitary");
  if (P.empty()) fail(ErrorCode::partition_invalid, "no projections");
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t k = 0; k < P.size(); ++k) {
    const auto& p = P[k];
    std::string name = "P_" + std::to_string(k);
    if (p.rows() != d || p.cols() != d) fail(ErrorCode::partition_invalid, name + " has the wrong shape");
    if ((p.adjoint() - p).cwiseAbs().maxCoeff() > tol || (p * p - p).cwiseAbs().maxCoeff() > tol)
      fail(ErrorCode::partition_invalid, name + " is not an orthogonal projection");
    for (std::size_t l = 0; l < k; ++l)
      if ((P[l] * p).cwiseAbs().maxCoeff() > tol)
        fail(ErrorCode::partition_invalid, "P_" + std::to_string(l) + " and " + name + " overlap");
    sum += p;
  }
  if ((sum - id).cwiseAbs().maxCoeff() > tol) fail(ErrorCode::partition_invalid, "the projections do not sum to the identity");

  IsoRep<Complex> rep;
  rep.model = "operator2";
  rep.grid = {static_cast<std::size_t>(d), fiber, true};
  detail::fiber_shift(rep);
  const auto& g = rep.grid;

  std::vector<Eigen::MatrixXcd> A;
  std::int64_t reach = 0;
  for (std::size_t k = 0; k < P.size(); ++k) {
    A.push_back(U * P[k]);
    if (P[k].cwiseAbs().maxCoeff() > tol) reach = static_cast<std::int64_t>(k);
  }
  TruncatedOperator<Complex> v2(g.size());
  for (std::size_t b = 0; b < g.base; ++b)
    for (std::size_t s = 0; s < fiber; ++s) {
      typename TruncatedOperator<Complex>::Column col;
      bool lossy = false;
      for (std::size_t k = 0; k < A.size(); ++k)
        for (std::size_t bp = 0; bp < g.base; ++bp) {
          Complex x = A[k](static_cast<Eigen::Index>(bp), static_cast<Eigen::Index>(b));
          if (std::abs(x) <= tol) continue;
          if (s + k < fiber)
            col.emplace_back(g.index(bp, s + k), x);
          else
            lossy = true;
        }
      v2.set_column(g.index(b, s), std::move(col), lossy);
    }
  v2.margin = {reach, static_cast<std::int64_t>(d) - 1};
  rep.gen.V[1] = v2;
  rep.gen.Vstar[1] = v2.adjoint();
  return rep;
}

template <class T, class S>
TruncatedOperator<T> convert_operator(const TruncatedOperator<S>& op) {
  if constexpr (std::is_same_v<S, T>) {
    return op;
  } else {
    TruncatedOperator<T> out(op.dim());
    for (std::size_t j = 0; j < op.dim(); ++j) {
      typename TruncatedOperator<T>::Column col;
      for (const auto& [i, x] : op.column(j)) col.emplace_back(i, T(ScalarTraits<S>::to_double(x)));
      out.set_column(j, std::move(col), op.lossy(j));
    }
    out.margin = op.margin;
    return out;
  }
}

inline IsoRep<double> to_numeric(const IsoRep<Rational>& rep) {
  IsoRep<double> out;
  out.model = rep.model;
  out.grid = rep.grid;
  for (int g = 0; g < 2; ++g) {
    out.gen.V[g] = convert_operator<double>(rep.gen.V[g]);
    out.gen.Vstar[g] = convert_operator<double>(rep.gen.Vstar[g]);
  }
  out.beta = rep.beta;
  out.theta = rep.theta;
  out.cell_weight = rep.cell_weight;
  out.levels = rep.levels;
  out.floors = rep.floors;
  out.lattice = rep.lattice;
  return out;
}

// The function of the first-return time to the tower base along the cycle:
// f = -(steps since the last visit to level 1). f(Tx) - f(x) >= -1.
inline std::vector<std::int64_t> first_return_profile(const TowerSystem& t) {
  auto orbit = tower_orbit(t);
  std::vector<std::int64_t> f(orbit.size());
  std::int64_t since = 0;
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    since = orbit[i].level == 1 ? 0 : since + 1;
    f[i] = -since;
  }
  return f;
}

template <class S>
struct EigenvectorXi {
  using Real = typename ScalarTraits<S>::Real;
  TrackedVector<S> xi;
  Real norm2{};
  std::optional<Real> closed_form;
  std::optional<Real> defect;
};

// xi = e^{-beta level/2} on the window, with ||xi||^2 against the closed
// form (1 - e^{-beta})^{-1} sum_x w e^{-beta floor(x)} of the untruncated columns.
template <class S>
EigenvectorXi<S> eigenvector_xi(const IsoRep<S>& rep) {
  using Real = typename ScalarTraits<S>::Real;
  detail::require_point_model(rep.point_model(), "eigenvector_xi");
  EigenvectorXi<S> e;
  std::vector<S> xi(rep.dim());
  Real w = ScalarTraits<Real>::from(rep.cell_weight);
  e.norm2 = Real(0);
  for (std::size_t c = 0; c < rep.dim(); ++c) {
    xi[c] = rep.beta.template half_power<S>(rep.levels[c]);
    e.norm2 += w * ScalarTraits<S>::norm(xi[c]);
  }
  e.xi = exact_everywhere(std::move(xi));
  if (rep.beta.value() > 0) {
    Real q = rep.beta.template half_power<Real>(2);
    Real sum = Real(0);
    for (auto fl : rep.floors) sum += w * rep.beta.template half_power<Real>(2 * fl);
    Real closed = sum / (Real(1) - q);
    e.closed_form = closed;
    e.defect = closed - e.norm2;
  }
  return e;
}

template <class S>
std::vector<CheckRow> eigen_relation_rows(const IsoRep<S>& rep, const TrackedVector<S>& xi, double tol = 1e-12) {
  std::vector<CheckRow> rows;
  for (LatticeVector a : {LatticeVector{1, 0}, LatticeVector{0, 1}, LatticeVector{1, 1}}) {
    Expr star = adjoint(isometry_expr(a));
    auto lhs = apply_tracked(rep.gen, star, xi);
    auto rhs = scaled(xi, rep.beta.template half_power<S>(rep.cocycle(a)));
    rows.push_back(vector_identity(word_name(a, true) + " xi = e^{-beta c(a)/2} xi", rep.gen.fiber_margin(star), lhs,
                                   rhs, tol));
  }
  return rows;
}

// U_t = multiplication by e^{i t beta level}.
template <class S>
TruncatedOperator<Complex> gauge_unitaries(const IsoRep<S>& rep, double t) {
  detail::require_point_model(rep.point_model(), "gauge_unitaries");
  std::vector<Complex> d(rep.dim());
  for (std::size_t c = 0; c < rep.dim(); ++c) d[c] = std::polar(1.0, t * rep.beta.value() * static_cast<double>(rep.levels[c]));
  return diagonal_operator(d);
}

// U_t V_g U_t^* = e^{i t beta c(e_g)} V_g entrywise on safe columns, as an
// integer identity of phase exponents: level(row) - level(col) = c(e_g).
template <class S>
CheckRow gauge_exponent_row(const IsoRep<S>& rep) {
  detail::require_point_model(rep.point_model(), "gauge_exponent_row");
  CheckRow row{"U_t V_g U_t* = e^{i t c(e_g)} V_g (phase exponents)", 1, 0, 0.0, true};
  for (int g = 0; g < 2; ++g) {
    std::int64_t c_g = rep.cocycle(g == 0 ? e1 : e2);
    const auto& v = rep.gen.V[g];
    for (std::size_t c = 0; c < rep.dim(); ++c) {
      if (v.lossy(c)) continue;
      ++row.tested;
      for (const auto& [r, x] : v.column(c)) {
        std::int64_t off = rep.levels[r] - rep.levels[c] - c_g;
        row.max_residual = std::max(row.max_residual, std::abs(static_cast<double>(off)));
        row.pass = row.pass && off == 0;
      }
    }
  }
  row.pass = row.pass && row.tested > 0;
  return row;
}

template <class S>
CheckRow gauge_conjugation_row(const IsoRep<S>& rep, double t, double tol = 1e-12) {
  auto u = gauge_unitaries(rep, t);
  auto ustar = u.adjoint();
  CheckRow row{"U_t V_g U_t* = e^{i t c(e_g)} V_g at t=" + std::to_string(t), 1, 0, 0.0, true};
  for (int g = 0; g < 2; ++g) {
    auto vg = convert_operator<Complex>(rep.gen.V[g]);
    Complex phase = std::polar(1.0, t * rep.beta.value() * static_cast<double>(rep.cocycle(g == 0 ? e1 : e2)));
    for (std::size_t c = 0; c < rep.dim(); ++c) {
      if (vg.lossy(c)) continue;
      ++row.tested;
      SparseVector<Complex> e{{c, 1.0}};
      auto lhs = u.apply(vg.apply(ustar.apply(e)));
      auto rhs = vg.apply(e);
      for (auto& [i, x] : rhs) lhs[i] -= phase * x;
      for (const auto& [i, x] : lhs) row.max_residual = std::max(row.max_residual, std::abs(x));
    }
  }
  row.pass = row.tested > 0 && row.max_residual <= tol;
  return row;
}

// V_a^* M(1_E) V_a = M(1_{(E - a) cap X}) and V_a M(1_E) V_a^* = M(1_{E + a}).
template <class S>
std::vector<CheckRow> covariance_rows(const IsoRep<S>& rep, const std::vector<bool>& region, LatticeVector a) {
  detail::require_point_model(rep.point_model(), "covariance_rows");
  auto mask = [&](SparseVector<S> v) {
    std::erase_if(v, [&](const auto& p) { return !region[p.first]; });
    return v;
  };
  Expr up = isometry_expr(a), down = adjoint(up);
  std::string tag = "(" + std::to_string(a.m) + "," + std::to_string(a.n) + ")";
  CheckRow pull{"V_a* R(E) V_a = R((E-a) cap X), a=" + tag, rep.gen.fiber_margin(up), 0, 0.0, true};
  CheckRow push{"V_a R(E) V_a* = R(E+a), a=" + tag, rep.gen.fiber_margin(up), 0, 0.0, true};
  for (std::size_t c = 0; c < rep.dim(); ++c) {
    SparseVector<S> e{{c, S(1)}};
    if (rep.gen.safe(c, then(up, down))) {
      ++pull.tested;
      auto image = rep.gen.apply(up, e);
      bool inside = image.size() == 1 && region[image.begin()->first];
      auto lhs = rep.gen.apply(down, mask(image));
      SparseVector<S> rhs;
      if (inside) rhs[c] = S(1);
      if (lhs != rhs) {
        pull.pass = false;
        pull.max_residual = 1;
      }
    }
    if (rep.gen.safe(c, then(down, up))) {
      ++push.tested;
      auto pre = rep.gen.apply(down, e);
      bool inside = pre.size() == 1 && region[pre.begin()->first];
      auto lhs = rep.gen.apply(up, mask(pre));
      SparseVector<S> rhs;
      if (inside) rhs[c] = S(1);
      if (lhs != rhs) {
        push.pass = false;
        push.max_residual = 1;
      }
    }
  }
  pull.pass = pull.pass && pull.tested > 0;
  push.pass = push.pass && push.tested > 0;
  return {pull, push};
}

template <class S>
struct CoherentFamily {
  std::map<LatticeVector, TrackedVector<S>> xi;

  const TrackedVector<S>& at(LatticeVector a) const {
    auto it = xi.find(a);
    if (it == xi.end())
      fail(ErrorCode::invalid_argument, "no member at (" + std::to_string(a.m) + "," + std::to_string(a.n) + ")");
    return it->second;
  }
};

// xi_a = E_a^perp xi, the projection of xi onto Ker(V_a^*).
template <class S>
CoherentFamily<S> coherent_from_vector(const IsoRep<S>& rep, const TrackedVector<S>& xi,
                                       const std::vector<LatticeVector>& grid) {
  CoherentFamily<S> fam;
  for (auto a : grid) fam.xi[a] = apply_tracked(rep.gen, corange_projection_expr(a), xi);
  return fam;
}

// E_a^perp xi_b = xi_a for a <= b.
template <class S>
CheckRow check_coherence(const IsoRep<S>& rep, const CoherentFamily<S>& fam, double tol = 1e-12) {
  CheckRow total{"E_a^perp xi_b = xi_a (a <= b)", 0, 0, 0.0, true};
  for (const auto& [a, xa] : fam.xi)
    for (const auto& [b, xb] : fam.xi) {
      if (!detail::leq(a, b)) continue;
      Expr e = corange_projection_expr(a);
      detail::merge<S>(total, vector_identity("", rep.gen.fiber_margin(e), apply_tracked(rep.gen, e, xb), xa, tol));
    }
  total.pass = total.pass && total.tested > 0;
  return total;
}

// E_b^perp V_a^* xi_{a+b} = e^{-beta c(a)/2} xi_b.
template <class S>
CheckRow conformality_relation_row(const IsoRep<S>& rep, const CoherentFamily<S>& fam, double tol = 1e-12) {
  CheckRow total{"E_b^perp V_a* xi_(a+b) = e^{-beta c(a)/2} xi_b", 0, 0, 0.0, true};
  for (const auto& [a, xa] : fam.xi)
    for (const auto& [b, xb] : fam.xi) {
      auto it = fam.xi.find(a + b);
      if (it == fam.xi.end()) continue;
      Expr e = then(adjoint(isometry_expr(a)), corange_projection_expr(b));
      auto lhs = apply_tracked(rep.gen, e, it->second);
      auto rhs = scaled(xb, rep.beta.template half_power<S>(rep.cocycle(a)));
      detail::merge<S>(total, vector_identity("", rep.gen.fiber_margin(e), lhs, rhs, tol));
    }
  total.pass = total.pass && total.tested > 0;
  return total;
}

// mu restricted to the layers X \ (X + a), cell by cell.
template <class R>
struct LayerMeasure {
  Beta beta;
  std::int64_t theta = 1;
  std::map<LatticeVector, std::map<std::size_t, R>> layers;
  std::map<LatticeVector, R> norms;
  std::vector<CheckRow> checks;

  R mass(LatticeVector a) const {
    auto it = layers.find(a);
    if (it == layers.end())
      fail(ErrorCode::invalid_argument, "no layer at (" + std::to_string(a.m) + "," + std::to_string(a.n) + ")");
    R total = R(0);
    for (const auto& [c, w] : it->second) total += w;
    return total;
  }

  bool verdict() const { return all_pass(checks); }
};

namespace detail {

template <class R>
bool same(const R& x, const R& y, double tol) {
  if constexpr (ScalarTraits<R>::exact)
    return x == y;
  else
    return std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)));
}

template <class R>
double gap(const R& x, const R& y) {
  return ScalarTraits<R>::magnitude(R(x - y));
}

}  // namespace detail

// mu_a(E) = <R(E) xi_a | xi_a> for E inside the layer X \ (X + a), with the
// consistency, support, layer-mass and conformality checks of the construction.
template <class S>
LayerMeasure<typename ScalarTraits<S>::Real> measure_from_eigenvector(const IsoRep<S>& rep, const CoherentFamily<S>& fam,
                                                                     double tol = 1e-12) {
  using Real = typename ScalarTraits<S>::Real;
  detail::require_point_model(rep.point_model(), "measure_from_eigenvector");
  LayerMeasure<Real> out;
  out.beta = rep.beta;
  out.theta = rep.theta;
  Real w = ScalarTraits<Real>::from(rep.cell_weight);

  CheckRow support{"xi_a vanishes on X + a", 0, 0, 0.0, true};
  CheckRow mass{"mu(X \\ (X+a)) = ||xi_a||^2", 0, 0, 0.0, true};
  for (const auto& [a, xa] : fam.xi) {
    Expr down = adjoint(isometry_expr(a));
    auto& layer = out.layers[a];
    Real norm = Real(0);
    for (std::size_t c = 0; c < rep.dim(); ++c) {
      if (!xa.valid[c]) continue;
      Real mu = w * ScalarTraits<S>::norm(xa.value[c]);
      if (mu < 0) fail(ErrorCode::negative_weight, "negative cell weight");
      norm += mu;
      if (!rep.gen.safe(c, down)) continue;
      bool in_range = !rep.gen.apply(down, SparseVector<S>{{c, S(1)}}).empty();
      if (in_range) {
        ++support.tested;
        support.max_residual = std::max(support.max_residual, ScalarTraits<S>::magnitude(xa.value[c]));
        support.pass = support.pass && negligible(xa.value[c], tol);
      } else {
        layer[c] = mu;
      }
    }
    out.norms[a] = norm;
    ++mass.tested;
    mass.max_residual = std::max(mass.max_residual, detail::gap(out.mass(a), norm));
    mass.pass = mass.pass && detail::same(out.mass(a), norm, tol);
  }
  if (!support.pass && support.tested > 0) fail(ErrorCode::coherence_violation, "xi_a is not supported on the layer");

  CheckRow consistency{"mu_a(E) = mu_b(E) on common layers", 0, 0, 0.0, true};
  for (const auto& [a, la] : out.layers)
    for (const auto& [b, lb] : out.layers) {
      if (!(a < b)) continue;
      for (const auto& [c, mu] : la) {
        auto it = lb.find(c);
        if (it == lb.end()) continue;
        ++consistency.tested;
        consistency.max_residual = std::max(consistency.max_residual, detail::gap(mu, it->second));
        consistency.pass = consistency.pass && detail::same(mu, it->second, tol);
      }
    }
  if (!consistency.pass && consistency.tested > 0)
    fail(ErrorCode::coherence_violation, "layer measures disagree on a common layer");

  CheckRow conformal{"mu(E+a) = e^{-beta c(a)} mu(E)", 0, 0, 0.0, true};
  for (const auto& [a, la] : out.layers) {
    if (a == LatticeVector{}) continue;
    Expr up = isometry_expr(a);
    Real factor = rep.beta.template half_power<Real>(2 * rep.cocycle(a));
    for (const auto& [b, lb] : out.layers) {
      auto target = out.layers.find(a + b);
      if (target == out.layers.end()) continue;
      for (const auto& [c, mu] : lb) {
        if (!rep.gen.safe(c, up)) continue;
        auto image = rep.gen.apply(up, SparseVector<S>{{c, S(1)}});
        if (image.size() != 1) continue;
        auto it = target->second.find(image.begin()->first);
        if (it == target->second.end()) continue;
        ++conformal.tested;
        Real expected = factor * mu;
        conformal.max_residual = std::max(conformal.max_residual, detail::gap(it->second, expected));
        conformal.pass = conformal.pass && detail::same(it->second, expected, tol);
      }
    }
  }
  if (!conformal.pass && conformal.tested > 0)
    fail(ErrorCode::coherence_violation, "translated layer cells break the conformal scaling");

  for (auto* r : {&support, &consistency, &mass, &conformal}) {
    r->pass = r->pass && r->tested > 0;
    out.checks.push_back(*r);
  }
  return out;
}

enum class Trend { stable, growing, other };

inline const char* to_string(Trend t) {
  switch (t) {
    case Trend::stable: return "stable";
    case Trend::growing: return "growing";
    case Trend::other: return "other";
  }
  return "?";
}

template <class R>
struct ProbeReport {
  LatticeVector a;
  std::vector<R> masses;
  Trend trend = Trend::other;

  bool finite_candidate() const { return trend == Trend::stable; }
};

// mu(X \ (X + a)) across truncation levels, smallest truncation first.
template <class R>
ProbeReport<R> one_conformality_probe(const std::vector<LayerMeasure<R>>& truncations, LatticeVector a) {
  if (truncations.size() < 2) fail(ErrorCode::invalid_argument, "need at least two truncation levels");
  ProbeReport<R> rep;
  rep.a = a;
  for (const auto& t : truncations) rep.masses.push_back(a == LatticeVector{} ? R(0) : t.mass(a));
  bool stable = true, growing = true;
  for (std::size_t i = 1; i < rep.masses.size(); ++i) {
    stable = stable && rep.masses[i] == rep.masses[0];
    growing = growing && rep.masses[i] > rep.masses[i - 1];
  }
  rep.trend = stable ? Trend::stable : growing ? Trend::growing : Trend::other;
  return rep;
}

template <class S>
std::size_t matrix_rank(DenseMatrix<S> m, double tol = 1e-10) {
  std::size_t rank = 0;
  std::size_t rows = m.size(), cols = rows ? m[0].size() : 0;
  for (std::size_t col = 0; col < cols && rank < rows; ++col) {
    std::size_t pivot = rank;
    double best = 0;
    for (std::size_t r = rank; r < rows; ++r) {
      double mag = ScalarTraits<S>::magnitude(m[r][col]);
      if (mag > best) {
        best = mag;
        pivot = r;
      }
    }
    if (negligible(m[pivot][col], tol) || best == 0) continue;
    std::swap(m[pivot], m[rank]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      if (m[r][col] == S(0)) continue;
      S k = m[r][col] / m[rank][col];
      for (std::size_t j = col; j < cols; ++j) m[r][j] -= k * m[rank][j];
    }
    ++rank;
  }
  return rank;
}

// dim Ran(V_(k,k)) / dim(window) on the truncation. 1 at k = 0, nonincreasing
// in k, and 0 once every column has been pushed out of the window.
template <class S>
Rational purity_defect(const IsoRep<S>& rep, std::int64_t steps) {
  if (steps < 0 || steps > static_cast<std::int64_t>(rep.grid.fiber))
    fail(ErrorCode::invalid_argument, "steps must lie in [0, fiber window]");
  Expr v = isometry_expr({steps, steps});
  DenseMatrix<S> m(rep.dim(), std::vector<S>(rep.dim(), S(0)));
  for (std::size_t c = 0; c < rep.dim(); ++c)
    for (const auto& [i, x] : rep.gen.apply(v, SparseVector<S>{{c, S(1)}})) m[i][c] = x;
  return make_rational(static_cast<long>(matrix_rank(std::move(m))), static_cast<long>(rep.dim()));
}

struct DilationCoverage {
  std::size_t covered = 0;
  std::size_t box = 0;
  bool complete() const { return covered == box; }
};

// The dilation acts on l^2(Z^2) by translations, U_a^* e_p = e_{p-a}. Count
// the lattice points of the box [min a_r, max a_r] x rows(F) reached from
// the window by some U_a^*, a in [0, steps]^2.
template <class S>
DilationCoverage dilation_coverage(const IsoRep<S>& rep, std::int64_t steps) {
  if (rep.lattice.empty()) fail(ErrorCode::invalid_argument, "dilation_coverage needs lattice coordinates");
  std::int64_t mlo = 0, mhi = 0, rlo = 0, rhi = 0;
  for (std::size_t b = 0; b < rep.grid.base; ++b) {
    LatticeVector p = rep.lattice[rep.grid.index(b, 0)];
    if (b == 0 || p.m < mlo) mlo = p.m;
    if (b == 0 || p.m > mhi) mhi = p.m;
    if (b == 0 || p.n < rlo) rlo = p.n;
    if (b == 0 || p.n > rhi) rhi = p.n;
  }
  std::set<LatticeVector> hit;
  for (const auto& p : rep.lattice)
    for (std::int64_t i = 0; i <= steps; ++i)
      for (std::int64_t j = 0; j <= steps; ++j) {
        LatticeVector q = p - LatticeVector{i, j};
        if (q.m >= mlo && q.m <= mhi && q.n >= rlo && q.n <= rhi) hit.insert(q);
      }
  return {hit.size(), static_cast<std::size_t>((mhi - mlo + 1) * (rhi - rlo + 1))};
}

// Declared margins bound how far every column moves support.
template <class S>
CheckRow margin_row(const IsoRep<S>& rep) {
  CheckRow row{"declared margins bound the band structure", 0, 0, 0.0, true};
  const auto& g = rep.grid;
  for (int k = 0; k < 2; ++k) {
    const auto& v = rep.gen.V[k];
    row.margin = std::max(row.margin, v.margin.fiber);
    for (std::size_t c = 0; c < rep.dim(); ++c) {
      ++row.tested;
      for (const auto& [r, x] : v.column(c)) {
        auto ds = static_cast<std::int64_t>(g.fiber_of(r)) - static_cast<std::int64_t>(g.fiber_of(c));
        auto db = static_cast<std::int64_t>(g.base_distance(g.base_of(r), g.base_of(c)));
        std::int64_t over = std::max<std::int64_t>({0, -ds, ds - v.margin.fiber, db - v.margin.base});
        row.max_residual = std::max(row.max_residual, static_cast<double>(over));
        row.pass = row.pass && over == 0;
      }
    }
  }
  return row;
}

template <class S>
std::vector<CheckRow> verify_representation(const IsoRep<S>& rep, double tol = 1e-12, std::int64_t extent = 2) {
  std::vector<CheckRow> rows;
  const auto& g = rep.gen;
  for (auto [k, a] : {std::pair{1, e1}, std::pair{2, e2}}) {
    Expr v = isometry_expr(a);
    rows.push_back(operator_identity(g, "V" + std::to_string(k) + "* V" + std::to_string(k) + " = I", then(v, adjoint(v)),
                                     identity_expr(), tol));
  }
  rows.push_back(operator_identity(g, "V1 V2 = V2 V1", then(isometry_expr(e2), isometry_expr(e1)),
                                   then(isometry_expr(e1), isometry_expr(e2)), tol));
  CheckRow ranges{"E_a E_b = E_b E_a, a,b in {0.." + std::to_string(extent) + "}^2", 0, 0, 0.0, true};
  auto grid = detail::box_grid(extent);
  std::size_t untested = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      Expr ea = range_projection_expr(grid[i]), eb = range_projection_expr(grid[j]);
      auto r = operator_identity(g, "", then(eb, ea), then(ea, eb), tol);
      untested += r.tested == 0;
      detail::merge<S>(ranges, r);
    }
  if (untested) ranges.identity += " (" + std::to_string(untested) + " pairs without interior cells)";
  rows.push_back(ranges);
  rows.push_back(margin_row(rep));
  if (!rep.point_model()) return rows;

  rows.push_back(gauge_exponent_row(rep));
  std::vector<bool> region(rep.dim());
  for (std::size_t c = 0; c < rep.dim(); ++c) region[c] = (rep.grid.base_of(c) + 2 * rep.grid.fiber_of(c)) % 3 == 0;
  for (LatticeVector a : {e1, e2, LatticeVector{1, 1}})
    for (auto& r : covariance_rows(rep, region, a)) rows.push_back(r);
  if (ScalarTraits<S>::exact && !rep.beta.exact()) return rows;

  auto xi = eigenvector_xi(rep);
  for (auto& r : eigen_relation_rows(rep, xi.xi, tol)) rows.push_back(r);
  auto fam = coherent_from_vector(rep, xi.xi, grid);
  rows.push_back(check_coherence(rep, fam, tol));
  rows.push_back(conformality_relation_row(rep, fam, tol));
  return rows;
}

}  // namespace kmslab
