#include "sso/optimizer.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>

#include "sso/eigensolver.hpp"
#include "sso/functional.hpp"
#include "sso/io.hpp"
#include "sso/mask.hpp"
#include "sso/variation.hpp"

namespace sso {

namespace {

constexpr int kMinPhaseNodes = 4;
constexpr double kEigenTol = 1e-10;
// Exponent of the J_p weights used to rank multiphase moves.
constexpr double kRankingP = 8;
constexpr Index kPairCandidates = 4;

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (t * (6 * t - 15) + 10);
}

struct PhaseEigen {
  double value = 0;
  Field u;
};

PhaseEigen first_eigenpair(const GridPtr<double>& grid, const Mask& mask, const Field* warm = nullptr) {
  std::vector<Eigen::VectorXd> start;
  if (warm) start.push_back(warm->values());
  auto r = smallest_eigenpairs(grid, mask, 1, kEigenTol, start);
  return {r.eigenvalues[0], std::move(r.eigenfunctions[0])};
}

Mask ball_mask(const Grid& g, const Point& c, double r) {
  Mask m(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const Point d = g.position(i) - c;
    const double dist = g.dimension() == 1 ? std::abs(d[0]) : d.norm();
    m[i] = g.inside()[i] && dist < r;
  }
  return m;
}

}  // namespace

void validate(const SolverConfig& c) {
  if (c.frozen_support) {
    if (!(c.lambda >= 0)) throw InvalidArgument("lambda must be nonnegative");
  } else if (!(c.lambda > 0)) {
    throw InvalidArgument("lambda must be positive");
  }
  if (c.p_schedule.empty()) throw InvalidArgument("p_schedule must not be empty");
  for (std::size_t i = 0; i < c.p_schedule.size(); ++i) {
    if (!(c.p_schedule[i] > 1)) throw InvalidArgument("p_schedule entries must exceed 1");
    if (i > 0 && !(c.p_schedule[i] > c.p_schedule[i - 1])) throw InvalidArgument("p_schedule must be ascending");
  }
  if (!(c.eps_vol >= 0)) throw InvalidArgument("eps_vol must be nonnegative");
  if (!(c.fidelity_weight >= 0)) throw InvalidArgument("fidelity_weight must be nonnegative");
  if (!(c.step_size > 0)) throw InvalidArgument("step_size must be positive");
  if (c.max_outer_iters < 1) throw InvalidArgument("max_outer_iters must be positive");
  if (c.max_inner_iters < 1) throw InvalidArgument("max_inner_iters must be positive");
  if (!(c.tol_objective > 0)) throw InvalidArgument("tol_objective must be positive");
  if (!(c.kappa >= 0)) throw InvalidArgument("kappa must be nonnegative");
  if (c.init == InitKind::two_balls && !(c.radius > 0)) throw InvalidArgument("radius must be positive");
  if (c.init == InitKind::two_balls && !c.centers.empty() && c.centers.size() != 2)
    throw InvalidArgument("centers must list exactly two points");
  if (c.init == InitKind::file && c.init_path.empty()) throw InvalidArgument("init_path is required for init = file");
}

// The identity a+ dR+[xi] + a- dR-[xi] + lambda (dV+[xi] + dV-[xi]) = 0 holds
// for every admissible field. Taking xi = (x - c) * chi with chi vanishing
// near the other phase and near the box isolates one phase at a time:
//   a_phase = -lambda dV_phase / dR_phase,
// which only sees the one-phase part of that phase's boundary. For a ball
// this reduces to lambda d |ball| / (2 lambda_1). The two raw estimates are
// combined by least squares under a+ + a- = 1 and clamped to [0, 1].
void estimate_weights(PhaseState& s) {
  const Grid& g = s.grid();
  const double h = g.h();
  const Mask outside = !g.inside();
  const Eigen::VectorXd to_box = distance_to(g, outside);
  double raw[2];
  bool ok[2];
  for (int phase = 0; phase < 2; ++phase) {
    const Mask& own = phase == 0 ? s.mask_plus : s.mask_minus;
    const Mask& other = phase == 0 ? s.mask_minus : s.mask_plus;
    const Field u = phase == 0 ? s.u.positive_part() : s.u.negative_part();
    const double lam = phase == 0 ? s.lambda1_plus : s.lambda1_minus;
    ok[phase] = false;
    raw[phase] = 0.5;
    if (own.count() == 0 || s.lambda <= 0) continue;
    const Eigen::VectorXd to_other = distance_to(g, other);
    Point centroid(0, 0);
    for (Index i = 0; i < g.size(); ++i)
      if (own[i]) centroid += g.position(i);
    centroid /= double(own.count());
    const double vol = double(own.count()) * g.cell_volume();
    const double radius = g.dimension() == 1 ? vol / 2 : std::sqrt(vol / std::numbers::pi);
    const double start = 2 * h, width = std::max(4 * h, 0.25 * radius);
    VectorField::Components c(g.size(), 2);
    for (Index i = 0; i < g.size(); ++i) {
      const double chi = smoothstep((to_other[i] - start) / width) * smoothstep((to_box[i] - start) / width);
      c.row(i) = ((g.position(i) - centroid) * chi).transpose();
    }
    const VectorField xi(s.grid_ptr(), std::move(c), 1);
    const double dr = first_variation_rayleigh(u, lam, xi);
    const double dv = mask_volume_variation(g, own, xi);
    if (std::abs(dr) > 1e-9 * lam && std::abs(dv) > 1e-9 * vol) {
      raw[phase] = -s.lambda * dv / dr;
      ok[phase] = true;
    }
  }
  double a;
  if (ok[0] && ok[1])
    a = (1 + raw[0] - raw[1]) / 2;
  else if (ok[0])
    a = raw[0];
  else if (ok[1])
    a = 1 - raw[1];
  else
    a = 0.5;
  s.a_plus_raw = ok[0] ? raw[0] : std::numeric_limits<double>::quiet_NaN();
  s.a_minus_raw = ok[1] ? raw[1] : std::numeric_limits<double>::quiet_NaN();
  s.a_plus = std::clamp(a, 0.0, 1.0);
  s.a_minus = 1 - s.a_plus;
}

PhaseState evaluate_masks(const GridPtr<double>& grid, const Mask& plus, const Mask& minus, double lambda) {
  if (plus.count() == 0 || minus.count() == 0) throw DegeneratePhaseError();
  if ((plus && minus).any()) throw InvalidArgument("phase masks overlap");
  PhaseState s(grid);
  s.mask_plus = plus;
  s.mask_minus = minus;
  s.lambda = lambda;
  const PhaseEigen ep = first_eigenpair(grid, plus), em = first_eigenpair(grid, minus);
  s.u = ep.u - em.u;
  s.lambda1_plus = ep.value;
  s.lambda1_minus = em.value;
  s.lambda2 = smallest_eigenpairs(grid, Mask(plus || minus), 2, kEigenTol).eigenvalues[1];
  const double e_plus = dirichlet_energy(s.u.positive_part()), e_minus = dirichlet_energy(s.u.negative_part());
  s.objective = j_infty(e_plus, e_minus) + lambda * s.volume();
  estimate_weights(s);
  return s;
}

PhaseState initialize(const SolverConfig& config, const GridPtr<double>& grid) {
  validate(config);
  const Grid& g = *grid;
  Mask plus, minus;
  switch (config.init) {
    case InitKind::two_balls: {
      std::vector<Point> centers = config.centers;
      if (centers.empty()) {
        const double y = g.origin()[1] + g.extent()[1] / 2;
        centers = {Point(g.origin()[0] + g.extent()[0] / 4, y), Point(g.origin()[0] + 3 * g.extent()[0] / 4, y)};
      }
      const double r = config.radius;
      for (const Point& c : centers)
        if (!g.contains_ball(c, r)) throw InvalidArgument("seed ball leaves the domain (radius too large?)");
      const Point gap = centers[0] - centers[1];
      const double dist = g.dimension() == 1 ? std::abs(gap[0]) : gap.norm();
      if (dist < 2 * r) throw InvalidArgument("seed balls overlap");
      plus = ball_mask(g, centers[0], r);
      minus = ball_mask(g, centers[1], r);
      break;
    }
    case InitKind::random: {
      std::mt19937 rng(config.seed);
      std::uniform_real_distribution<double> unit(0, 1);
      const double span = g.dimension() == 1 ? g.extent()[0] : std::min(g.extent()[0], g.extent()[1]);
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const double r0 = span * (0.1 + 0.15 * unit(rng)), r1 = span * (0.1 + 0.15 * unit(rng));
        auto pick = [&](double r) {
          Point c = g.origin();
          c[0] += r + (g.extent()[0] - 2 * r) * unit(rng);
          if (g.dimension() == 2) c[1] += r + (g.extent()[1] - 2 * r) * unit(rng);
          return c;
        };
        const Point c0 = pick(r0), c1 = pick(r1);
        const double dist = g.dimension() == 1 ? std::abs(c0[0] - c1[0]) : (c0 - c1).norm();
        if (dist < r0 + r1 + 2 * g.h() || !g.contains_ball(c0, r0) || !g.contains_ball(c1, r1)) continue;
        plus = ball_mask(g, c0, r0);
        minus = ball_mask(g, c1, r1);
        placed = plus.count() >= kMinPhaseNodes && minus.count() >= kMinPhaseNodes;
      }
      if (!placed) throw InvalidArgument("could not place random seed blobs");
      break;
    }
    case InitKind::file: {
      const Field u = read_field_for_init(grid, config.init_path);
      plus = u.values().array() > 0 && g.inside();
      minus = u.values().array() < 0 && g.inside();
      break;
    }
  }
  if (config.frozen_support) {
    plus = plus && *config.frozen_support;
    minus = minus && *config.frozen_support;
  }
  if (plus.count() == 0 || minus.count() == 0) throw InvalidArgument("seed masks must both be nonempty");
  return evaluate_masks(grid, plus, minus, config.lambda);
}

Field assemble_sign_split(const PhaseState& state) {
  if (state.mask_plus.count() == 0 || state.mask_minus.count() == 0) throw DegeneratePhaseError();
  const auto& grid = state.grid_ptr();
  return first_eigenpair(grid, state.mask_plus).u - first_eigenpair(grid, state.mask_minus).u;
}

// ---------------------------------------------------------------------------
// Multiphase backend: local search over the two node masks.

namespace {

enum class MoveKind { add, remove, transfer };

struct Move {
  MoveKind kind;
  int phase;  // phase gaining (add) or losing (remove, transfer) the node
  Index node;
  double score;  // predicted change of a+ lambda+ + a- lambda- + lambda |mask|
};

struct Config2 {
  Mask mask[2];
  std::vector<PhaseEigen> eig;  // one per phase
  double lambda;
  double cell;

  double objective() const {
    return std::max(eig[0].value, eig[1].value) + lambda * cell * double(mask[0].count() + mask[1].count());
  }
};

class MultiphaseSearch {
 public:
  MultiphaseSearch(const SolverConfig& config, const GridPtr<double>& grid, const PhaseState& start)
      : config_(config), grid_(grid), g_(*grid), rng_(config.seed) {
    cur_.mask[0] = start.mask_plus;
    cur_.mask[1] = start.mask_minus;
    cur_.eig = {first_eigenpair(grid, cur_.mask[0]), first_eigenpair(grid, cur_.mask[1])};
    cur_.lambda = config.lambda;
    cur_.cell = g_.cell_volume();
  }

  // Returns true when a local minimum was certified.
  bool run(std::vector<double>& history, int& iterations) {
    double f = cur_.objective();
    history.push_back(f);
    Index batch = 0;
    while (iterations < config_.max_outer_iters) {
      std::vector<Move> moves = rank_moves();
      std::vector<Move> downhill;
      for (const Move& m : moves)
        if (m.score < 0) downhill.push_back(m);
      if (batch == 0) batch = std::max<Index>(1, Index(downhill.size()) / 2);
      bool accepted = false;
      for (Index b = std::min<Index>(batch, Index(downhill.size())); b >= 1 && !accepted; b /= 2) {
        // When the two eigenvalues tie, only moves on both phases lower the
        // max, so a batch drawn evenly from both phases is tried as well.
        if (try_moves(top(downhill, b), f) || try_moves(balanced(downhill, b), f)) {
          accepted = true;
          batch = 2 * b;
        }
      }
      if (!accepted) accepted = layers(moves, f) || polish(moves, f);
      if (!accepted) return true;
      batch = std::max<Index>(batch, 1);
      history.push_back(f);
      ++iterations;
    }
    return false;
  }

  const Mask& mask(int phase) const { return cur_.mask[phase]; }

 private:
  std::vector<Move> rank_moves() {
    const double h = g_.h();
    const double diag = 2.0 * g_.dimension() / (h * h);
    const double w = cur_.cell;
    const auto [a0, a1] = coefficients_a(cur_.eig[0].value, cur_.eig[1].value, kRankingP);
    const double a[2] = {a0, a1};
    const Mask& m0 = cur_.mask[0];
    const Mask& m1 = cur_.mask[1];

    // Predicted eigenvalue changes: adding node j couples it to the phase
    // through s = sum of neighbouring eigenfunction values (Schur complement);
    // removing node j pins u_j to zero.
    auto add_delta = [&](int phase, Index j, double& s) {
      s = 0;
      g_.for_each_neighbor(j, [&](Index k) {
        if (cur_.mask[phase][k]) s += std::abs(cur_.eig[phase].u[k]);
      });
      const double c = s / (h * h);
      return -c * c * w / (diag - cur_.eig[phase].value);
    };
    auto remove_delta = [&](int phase, Index j) {
      const double uj = cur_.eig[phase].u[j];
      return uj * uj * w * (diag - cur_.eig[phase].value);
    };

    std::vector<Move> moves;
    std::bernoulli_distribution coin(0.5);
    for (Index j = 0; j < g_.size(); ++j) {
      if (!g_.inside()[j]) continue;
      bool near[2] = {false, false};
      g_.for_each_neighbor(j, [&](Index k) {
        near[0] = near[0] || m0[k];
        near[1] = near[1] || m1[k];
      });
      if (!m0[j] && !m1[j]) {
        double s[2] = {0, 0}, d[2] = {0, 0};
        for (int p = 0; p < 2; ++p)
          if (near[p]) d[p] = add_delta(p, j, s[p]);
        int winner = -1;
        if (near[0] && near[1]) {
          // Both phases claim the node: larger |u| wins, seeded coin on ties.
          winner = s[0] > s[1] ? 0 : s[1] > s[0] ? 1 : (coin(rng_) ? 0 : 1);
        } else if (near[0] || near[1]) {
          winner = near[0] ? 0 : 1;
        }
        if (winner >= 0) moves.push_back({MoveKind::add, winner, j, a[winner] * d[winner] + cur_.lambda * w});
        continue;
      }
      const int p = m0[j] ? 0 : 1;
      bool rim = false;
      g_.for_each_neighbor(j, [&](Index k) { rim = rim || !cur_.mask[p][k]; });
      if (!rim) continue;
      const double up = remove_delta(p, j);
      moves.push_back({MoveKind::remove, p, j, a[p] * up - cur_.lambda * w});
      if (near[1 - p]) {
        double s;
        const double down = add_delta(1 - p, j, s);
        moves.push_back({MoveKind::transfer, p, j, a[p] * up + a[1 - p] * down});
      }
    }
    std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) { return x.score < y.score; });
    return moves;
  }

  static std::vector<Move> top(const std::vector<Move>& ranked, Index b) {
    return {ranked.begin(), ranked.begin() + std::min<Index>(b, Index(ranked.size()))};
  }

  static std::vector<Move> balanced(const std::vector<Move>& ranked, Index b) {
    std::vector<Move> per[2];
    for (const Move& m : ranked) per[m.phase].push_back(m);
    std::vector<Move> out;
    for (std::size_t k = 0; Index(out.size()) < b && k < std::max(per[0].size(), per[1].size()); ++k)
      for (int p = 0; p < 2 && Index(out.size()) < b; ++p)
        if (k < per[p].size()) out.push_back(per[p][k]);
    return out;
  }

  // On a lattice a single added node is a bump that lowers the eigenvalue far
  // less than a smooth boundary shift would, so whole layers of adds or of
  // removals are tried as well, best first and split evenly between phases.
  bool layers(const std::vector<Move>& ranked, double& f) {
    for (MoveKind kind : {MoveKind::add, MoveKind::remove}) {
      std::vector<Move> pool;
      for (const Move& m : ranked)
        if (m.kind == kind) pool.push_back(m);
      for (Index b = Index(pool.size()); b >= 2; b /= 2)
        if (try_moves(balanced(pool, b), f)) return true;
    }
    return false;
  }

  // Exact single moves in predicted order, then pairs across the two phases.
  bool polish(const std::vector<Move>& ranked, double& f) {
    for (const Move& m : ranked)
      if (try_moves({m}, f)) return true;
    std::vector<Move> per[2];
    for (const Move& m : ranked)
      if (Index(per[m.phase].size()) < kPairCandidates) per[m.phase].push_back(m);
    for (const Move& x : per[0])
      for (const Move& y : per[1])
        if (try_moves({x, y}, f)) return true;
    return false;
  }

  bool try_moves(const std::vector<Move>& moves, double& f) {
    Config2 trial;
    trial.mask[0] = cur_.mask[0];
    trial.mask[1] = cur_.mask[1];
    trial.lambda = cur_.lambda;
    trial.cell = cur_.cell;
    bool touched[2] = {false, false};
    std::vector<char> used(std::size_t(g_.size()), 0);
    for (const Move& m : moves) {
      if (used[m.node]) continue;
      used[m.node] = 1;
      switch (m.kind) {
        case MoveKind::add:
          trial.mask[m.phase][m.node] = true;
          touched[m.phase] = true;
          break;
        case MoveKind::remove:
          trial.mask[m.phase][m.node] = false;
          touched[m.phase] = true;
          break;
        case MoveKind::transfer:
          trial.mask[m.phase][m.node] = false;
          trial.mask[1 - m.phase][m.node] = true;
          touched[0] = touched[1] = true;
          break;
      }
    }
    for (int p = 0; p < 2; ++p) {
      if (trial.mask[p].count() < kMinPhaseNodes) return false;
      trial.eig.push_back(touched[p] ? first_eigenpair(grid_, trial.mask[p], &cur_.eig[p].u) : cur_.eig[p]);
    }
    const double ft = trial.objective();
    if (!(ft < f - config_.tol_objective * std::abs(f))) return false;
    cur_ = std::move(trial);
    f = ft;
    return true;
  }

  const SolverConfig& config_;
  GridPtr<double> grid_;
  const Grid& g_;
  std::mt19937 rng_;
  Config2 cur_;
};

}  // namespace

PhaseState solve_multiphase(const SolverConfig& config, const GridPtr<double>& grid) {
  const PhaseState start = initialize(config, grid);
  MultiphaseSearch search(config, grid, start);
  std::vector<double> history;
  int iterations = 0;
  const bool converged = search.run(history, iterations);
  PhaseState s = evaluate_masks(grid, search.mask(0), search.mask(1), config.lambda);
  s.history = std::move(history);
  s.iterations = iterations;
  s.converged = converged;
  return s;
}

// ---------------------------------------------------------------------------
// Relaxed backend: projected, preconditioned gradient descent on
// J_p(R(v+), R(v-)) + lambda * smoothed_volume(v) with p and eps continuation.

namespace {

// Descent direction for the relaxed objective on the product of unit
// spheres. The metric is 2A + diag(c), c being the secant curvature of the
// smoothed volume, so a tail node reaches zero in one unit step. Zero nodes
// join the active set only when they have a one-sided descent and the
// solved step moves them that way.
Eigen::VectorXd relaxed_direction(const Field& v, const Eigen::VectorXd& grad, const Mask& support,
                                  const SolverConfig& config, double eps) {
  const Grid& g = v.grid();
  const double inv_h2 = 1 / (g.h() * g.h()), w = g.cell_volume(), eps2 = eps * eps;
  Mask active = support && (v.values().array() != 0 || grad.array() != 0);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(g.size());
  for (int round = 0; round < 8; ++round) {
    const auto idx = detail::index_mask(active);
    const Index n = Index(idx.nodes.size());
    if (n == 0) return dir;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(n), mp = Eigen::VectorXd::Zero(n), mm = Eigen::VectorXd::Zero(n);
    for (Index r = 0; r < n; ++r) {
      const Index i = idx.nodes[r];
      const double x = v[i];
      double c = 2 * config.fidelity_weight;
      if (config.lambda > 0) c += 2 * config.lambda * eps2 / ((x * x + eps2) * (x * x + eps2));
      trip.emplace_back(r, r, 4 * g.dimension() * inv_h2 + c);
      g.for_each_neighbor(i, [&](Index j) {
        if (idx.local[j] >= 0) trip.emplace_back(r, idx.local[j], -2 * inv_h2);
      });
      rhs[r] = grad[i] / w;
      if (x > 0) mp[r] = x;
      if (x < 0) mm[r] = x;
    }
    Eigen::SparseMatrix<double> metric(n, n);
    metric.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(metric);
    if (solver.info() != Eigen::Success) throw ConvergenceError("preconditioner factorization failed", 0);
    const Eigen::VectorXd z0 = solver.solve(rhs), zp = solver.solve(mp), zm = solver.solve(mm);
    // Keep both phase norms fixed to first order.
    Eigen::Matrix2d gram;
    gram << mp.dot(zp), mp.dot(zm), mm.dot(zp), mm.dot(zm);
    const Eigen::Vector2d mu = gram.ldlt().solve(Eigen::Vector2d(mp.dot(z0), mm.dot(z0)));
    const Eigen::VectorXd d = z0 - mu[0] * zp - mu[1] * zm;

    bool changed = false;
    for (Index r = 0; r < n; ++r) {
      const Index i = idx.nodes[r];
      if (v[i] == 0 && d[r] * grad[i] <= 0) {
        active[i] = false;
        changed = true;
      }
    }
    if (!changed || round == 7) {
      dir.setZero();
      for (Index r = 0; r < n; ++r)
        if (active[idx.nodes[r]]) dir[idx.nodes[r]] = d[r];
      return dir;
    }
  }
  return dir;
}

// An interface node (nonzero, next to the other phase) sits on a flat part
// of the objective: the other phase only gains once the node crosses zero.
// Replace its component by the secant slope from v_j to -v_j when that is
// steeper, so the line search can carry the node across.
void add_crossing_pull(const Field& v, const RelaxedParameters<double>& prm, Eigen::VectorXd& grad) {
  const Grid& g = v.grid();
  const Field plus = v.positive_part(), minus = v.negative_part();
  const double mass[2] = {l2_inner(plus, plus), l2_inner(minus, minus)};
  const double r[2] = {dirichlet_energy(plus) / mass[0], dirichlet_energy(minus) / mass[1]};
  const auto [ap, am] = coefficients_a(r[0], r[1], prm.p);
  const double a[2] = {ap, am};
  const double w = g.cell_volume(), inv_h2 = 1 / (g.h() * g.h()), diag = 2 * g.dimension() * inv_h2;
  for (Index j = 0; j < g.size(); ++j) {
    const double x = v[j];
    if (x == 0 || !g.inside()[j]) continue;
    const int own = x > 0 ? 0 : 1, other = 1 - own;
    // Pull of the other phase on node j, per unit of |v_j| on its side.
    double sum = 0;
    g.for_each_neighbor(j, [&](Index k) {
      if ((other == 0 && v[k] > 0) || (other == 1 && v[k] < 0)) sum += std::abs(v[k]);
    });
    if (sum == 0) continue;
    const double gain = a[other] * 2 * w * sum * inv_h2 / mass[other];
    const double curvature = a[own] * 2 * w * (diag - r[own]) / mass[own];
    const double ax = std::abs(x);
    const double own_slope = x > 0 ? grad[j] : -grad[j];  // toward zero, per unit
    const double secant = (own_slope - 0.5 * curvature * ax + gain) / 2;
    if (secant > own_slope) grad[j] = x > 0 ? secant : -secant;
  }
}

}  // namespace

PhaseState solve_relaxed(const SolverConfig& config, const GridPtr<double>& grid) {
  const PhaseState start = initialize(config, grid);
  const Grid& g = *grid;
  const Mask support = config.frozen_support ? Mask(*config.frozen_support && g.inside()) : g.inside();
  const double root_lambda = std::sqrt(config.lambda);
  const double h = g.h();

  auto project = [&](const Eigen::VectorXd& v, bool& collapsed) {
    const Field f(grid, v);
    const Field plus = f.positive_part(), minus = f.negative_part();
    collapsed = plus.support().count() < kMinPhaseNodes || minus.support().count() < kMinPhaseNodes;
    if (collapsed) return f;
    return (1 / l2_norm(plus)) * plus - (1 / l2_norm(minus)) * minus;
  };

  struct Stage {
    double p, eps;
  };
  const double eps_final = config.eps_vol > 0 ? config.eps_vol : 0.05 * root_lambda * h;
  const double eps_start = std::max(eps_final, 4 * root_lambda * h);
  std::vector<Stage> stages;
  for (double p : config.p_schedule) stages.push_back({p, eps_start});
  if (config.lambda > 0) {
    for (double e = eps_start / 4; e > eps_final; e /= 4) stages.push_back({config.p_schedule.back(), e});
    if (eps_start > eps_final) stages.push_back({config.p_schedule.back(), eps_final});
  }

  bool collapsed = false;
  Field v = project(start.u.values(), collapsed);
  if (collapsed) throw PhaseCollapseError("initial seed too small");
  std::vector<double> history;
  std::vector<int> breaks;
  double alpha = config.step_size;
  bool stage_converged = false;
  int iterations = 0;
  for (const Stage& st : stages) {
    RelaxedParameters<double> prm;
    prm.p = st.p;
    prm.lambda = config.lambda;
    prm.eps = st.eps;
    prm.fidelity_weight = config.fidelity_weight;
    const Field anchor = v;
    const Field* ref = config.fidelity_weight > 0 ? &anchor : nullptr;
    double f = objective_relaxed(v, ref, prm).total;
    breaks.push_back(int(history.size()));
    history.push_back(f);
    stage_converged = false;
    alpha = config.step_size;
    for (int it = 0; it < config.max_inner_iters; ++it) {
      const Eigen::VectorXd grad = objective_relaxed_gradient(v, ref, prm);
      Eigen::VectorXd pulled = grad;
      add_crossing_pull(v, prm, pulled);

      // The pulled direction first; the plain gradient if no step is found.
      bool accepted = false;
      Field next = v;
      double fn = f;
      const Eigen::VectorXd* const gradients[] = {&pulled, &grad};
      for (const Eigen::VectorXd* gr : gradients) {
        const Eigen::VectorXd dir = relaxed_direction(v, *gr, support, config, st.eps);
        if (dir.squaredNorm() == 0) continue;
        for (alpha = std::max(alpha, 1e-14); alpha > 1e-14; alpha /= 2) {
          next = project(v.values() - alpha * dir, collapsed);
          if (collapsed) continue;
          fn = objective_relaxed(next, ref, prm).total;
          if (fn < f) {
            accepted = true;
            break;
          }
        }
        if (accepted) break;
        alpha = config.step_size;
      }
      if (!accepted) {
        alpha = config.step_size;
        stage_converged = true;
        break;
      }
      ++iterations;
      const double decrease = (f - fn) / std::abs(f);
      v = std::move(next);
      f = fn;
      history.push_back(f);
      alpha = std::min(2 * alpha, 64 * config.step_size);
      if (decrease < config.tol_objective) {
        stage_converged = true;
        break;
      }
    }
  }

  const double tau = config.kappa * h * root_lambda;
  const Mask plus = v.values().array() > tau && support;
  const Mask minus = v.values().array() < -tau && support;
  if (plus.count() < kMinPhaseNodes || minus.count() < kMinPhaseNodes)
    throw PhaseCollapseError("a phase vanished after thresholding");
  PhaseState s = evaluate_masks(grid, plus, minus, config.lambda);
  s.history = std::move(history);
  s.stage_breaks = std::move(breaks);
  s.iterations = iterations;
  s.converged = stage_converged;
  return s;
}

PhaseState solve(const SolverConfig& config, const GridPtr<double>& grid) {
  return config.backend == Backend::multiphase ? solve_multiphase(config, grid) : solve_relaxed(config, grid);
}

}  // namespace sso
