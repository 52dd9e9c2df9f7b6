#include "fracture/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fracture/errors.hpp"
#include "fracture/parallel.hpp"

namespace fracture {

const char* to_string(SolverMode mode) {
  switch (mode) {
    case SolverMode::Oracle: return "oracle";
    case SolverMode::Heuristic: return "heuristic";
    case SolverMode::Both: return "both";
  }
  return "?";
}

SolverMode parse_solver_mode(const std::string& name) {
  if (name == "oracle") return SolverMode::Oracle;
  if (name == "heuristic") return SolverMode::Heuristic;
  if (name == "both") return SolverMode::Both;
  throw Error("unknown solver mode '" + name + "' (expected oracle, heuristic or both)");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int corner_of(const AdaptiveTriangulation& m, int s, int v) {
  const auto& t = m.tris[s];
  return t[0] == v ? 0 : t[1] == v ? 1 : 2;
}

// Per-mesh quantities at the step time.
struct MeshData {
  AdaptivePtr mesh;
  std::vector<double> area;
  std::vector<std::array<Vec2, 3>> grad;
  std::vector<Eigen::Matrix3d> K, M;
  std::vector<std::array<Vec2, 3>> load_f;   // body load per slot
  std::vector<std::array<Vec2, 3>> load_l;   // traction load per slot
  std::vector<int> crackable;
};

MeshData prepare(const AdaptivePtr& mesh, const StepProblem& p) {
  const AdaptiveTriangulation& m = *mesh;
  const auto& rule = triangle_rule(p.model.quadrature);
  const std::size_t n = m.tris.size();
  MeshData d;
  d.mesh = mesh;
  d.area.resize(n);
  d.grad.resize(n);
  d.K.resize(n);
  d.M.resize(n);
  d.load_f.assign(n, {Vec2{}, Vec2{}, Vec2{}});
  d.load_l.assign(n, {Vec2{}, Vec2{}, Vec2{}});
  const bool body_load = !p.model.body.f.is_zero();
  for (std::size_t s = 0; s < n; ++s) {
    const Vec2& p0 = m.vertices[m.tris[s][0]];
    const Vec2& p1 = m.vertices[m.tris[s][1]];
    const Vec2& p2 = m.vertices[m.tris[s][2]];
    double a2 = orient(p0, p1, p2);
    double inv = 1.0 / a2;
    d.area[s] = 0.5 * a2;
    auto& g = d.grad[s];
    g[0] = {(p1.y - p2.y) * inv, (p2.x - p1.x) * inv};
    g[1] = {(p2.y - p0.y) * inv, (p0.x - p2.x) * inv};
    g[2] = {(p0.y - p1.y) * inv, (p1.x - p0.x) * inv};
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        d.K[s](j, k) = d.area[s] * dot(g[j], g[k]);
        double mm = 0;
        for (const auto& qp : rule) mm += qp.weight * qp.bary[j] * qp.bary[k];
        d.M[s](j, k) = d.area[s] * mm;
      }
    if (body_load)
      for (const auto& qp : rule) {
        Vec2 x = p0 * qp.bary[0] + p1 * qp.bary[1] + p2 * qp.bary[2];
        Vec2 f = p.model.body.f.eval(p.t, x);
        for (int j = 0; j < 3; ++j) d.load_f[s][j] += f * (d.area[s] * qp.weight * qp.bary[j]);
      }
  }
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    const SubEdge& e = m.subedges[id];
    if (e.crackable) d.crackable.push_back(static_cast<int>(id));
    if (e.label != BoundaryLabel::Traction || p.model.traction.l.is_zero()) continue;
    int s = e.tri[0];
    int ca = corner_of(m, s, e.v[0]), cb = corner_of(m, s, e.v[1]);
    double len = m.subedge_length(static_cast<int>(id));
    for (const auto& [r, w] : edge_rule()) {
      Vec2 x = lerp(m.vertices[e.v[0]], m.vertices[e.v[1]], r);
      Vec2 l = p.model.traction.l.eval(p.t, x);
      d.load_l[s][ca] += l * (len * w * (1 - r));
      d.load_l[s][cb] += l * (len * w * r);
    }
  }
  return d;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

using SpMat = Eigen::SparseMatrix<double>;

// Energy, gradient and (optionally) Hessian of the elastic energy in the free unknowns.
double newton_eval(const MeshData& d, const StepProblem& p, const std::vector<int>& cls,
                   const std::vector<int>& fidx, const std::vector<Vec2>& value, Eigen::VectorXd* grad,
                   std::vector<Eigen::Triplet<double>>* hess) {
  const AdaptiveTriangulation& m = *d.mesh;
  const auto& rule = triangle_rule(p.model.quadrature);
  const BulkDensity& W = p.model.bulk;
  const BodyPotential& F = p.model.body;
  double E = 0;
  for (std::size_t s = 0; s < m.tris.size(); ++s) {
    std::array<Vec2, 3> u;
    std::array<int, 3> fi;
    for (int j = 0; j < 3; ++j) {
      int c = cls[3 * s + j];
      u[j] = value[c];
      fi[j] = fidx[c];
    }
    const auto& g = d.grad[s];
    const double A = d.area[s];
    Mat2 G;
    G(0, 0) = u[0].x * g[0].x + u[1].x * g[1].x + u[2].x * g[2].x;
    G(0, 1) = u[0].x * g[0].y + u[1].x * g[1].y + u[2].x * g[2].y;
    G(1, 0) = u[0].y * g[0].x + u[1].y * g[1].x + u[2].y * g[2].x;
    G(1, 1) = u[0].y * g[0].y + u[1].y * g[1].y + u[2].y * g[2].y;
    E += A * W.W(G);
    Eigen::Matrix<double, 6, 1> lg = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 6> lh = Eigen::Matrix<double, 6, 6>::Zero();
    Mat2 dW = W.dW(G);
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < 2; ++c) lg(2 * j + c) += A * (dW(c, 0) * g[j].x + dW(c, 1) * g[j].y);
    if (hess) {
      Eigen::Matrix4d H = W.d2W(G);
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int c = 0; c < 2; ++c)
            for (int c2 = 0; c2 < 2; ++c2) {
              double acc = 0;
              double gj[2] = {g[j].x, g[j].y}, gk[2] = {g[k].x, g[k].y};
              for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) acc += H(2 * c + a, 2 * c2 + b) * gj[a] * gk[b];
              lh(2 * j + c, 2 * k + c2) += A * acc;
            }
    }
    const Vec2& p0 = m.vertices[m.tris[s][0]];
    const Vec2& p1 = m.vertices[m.tris[s][1]];
    const Vec2& p2 = m.vertices[m.tris[s][2]];
    if (F.kappa != 0.0 || !F.f.is_zero()) {
      for (const auto& qp : rule) {
        Vec2 x = p0 * qp.bary[0] + p1 * qp.bary[1] + p2 * qp.bary[2];
        Vec2 z = u[0] * qp.bary[0] + u[1] * qp.bary[1] + u[2] * qp.bary[2];
        double w = A * qp.weight;
        E -= w * F.F(p.t, x, z);
        Vec2 dF = F.dF(p.t, x, z);
        for (int j = 0; j < 3; ++j) {
          lg(2 * j) -= w * dF.x * qp.bary[j];
          lg(2 * j + 1) -= w * dF.y * qp.bary[j];
        }
        if (hess && F.kappa != 0.0) {
          double n2 = dot(z, z) + (F.q < 2 ? 1e-24 : 0.0);
          Mat2 C = Mat2::Zero();
          if (n2 > 0) {
            double a0 = F.q * F.kappa * std::pow(n2, 0.5 * (F.q - 2));
            double a1 = F.q * (F.q - 2) * F.kappa * std::pow(n2, 0.5 * (F.q - 4));
            C << a0 + a1 * z.x * z.x, a1 * z.x * z.y, a1 * z.x * z.y, a0 + a1 * z.y * z.y;
          } else if (F.q == 2) {
            C = 2 * F.kappa * Mat2::Identity();
          }
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
              for (int c = 0; c < 2; ++c)
                for (int c2 = 0; c2 < 2; ++c2) lh(2 * j + c, 2 * k + c2) += w * qp.bary[j] * qp.bary[k] * C(c, c2);
        }
      }
    }
    for (int j = 0; j < 3; ++j) {
      E -= dot(d.load_l[s][j], u[j]);
      lg(2 * j) -= d.load_l[s][j].x;
      lg(2 * j + 1) -= d.load_l[s][j].y;
    }
    for (int j = 0; j < 3; ++j) {
      if (fi[j] < 0) continue;
      if (grad) {
        (*grad)(2 * fi[j]) += lg(2 * j);
        (*grad)(2 * fi[j] + 1) += lg(2 * j + 1);
      }
      if (hess)
        for (int k = 0; k < 3; ++k) {
          if (fi[k] < 0) continue;
          for (int c = 0; c < 2; ++c)
            for (int c2 = 0; c2 < 2; ++c2) hess->emplace_back(2 * fi[j] + c, 2 * fi[k] + c2, lh(2 * j + c, 2 * k + c2));
        }
    }
  }
  return E;
}

// Class values minimizing the elastic energy for the partition `dofs`.
std::vector<Vec2> solve_classes(const MeshData& d, const DofMap& dofs, const StepProblem& p, SolveStats* stats) {
  const AdaptiveTriangulation& m = *d.mesh;
  const int nc = dofs.num_classes;
  const std::size_t n = m.tris.size();
  UnionFind uf(nc);
  for (std::size_t s = 0; s < n; ++s) {
    uf.unite(dofs.class_of_slot[3 * s], dofs.class_of_slot[3 * s + 1]);
    uf.unite(dofs.class_of_slot[3 * s], dofs.class_of_slot[3 * s + 2]);
  }
  std::vector<char> pinned = dofs.pinned;
  std::vector<Vec2> value(nc);
  for (int c = 0; c < nc; ++c)
    if (pinned[c]) value[c] = dofs.pin_value[c];
  std::vector<char> comp_pinned(nc, 0);
  for (int c = 0; c < nc; ++c)
    if (pinned[c]) comp_pinned[uf.find(c)] = 1;
  std::vector<int> floating_roots;
  if (p.model.body.kappa == 0.0) {
    for (int c = 0; c < nc; ++c) {
      int r = uf.find(c);
      if (r == c && !comp_pinned[r]) {
        floating_roots.push_back(r);
        pinned[c] = 1;  // roots are the smallest class of their component
        value[c] = Vec2{};
      }
    }
  }
  std::vector<int> fidx(nc, -1);
  int nf = 0;
  for (int c = 0; c < nc; ++c)
    if (!pinned[c]) fidx[c] = nf++;
  const auto& cls = dofs.class_of_slot;
  if (stats) ++stats->solves;

  if (p.model.is_quadratic()) {
    const double mu = p.model.bulk.mu, kappa = p.model.body.kappa;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * n);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, 2);
    for (std::size_t s = 0; s < n; ++s) {
      Eigen::Matrix3d A = 2 * mu * d.K[s] + 2 * kappa * d.M[s];
      for (int j = 0; j < 3; ++j) {
        int cj = cls[3 * s + j];
        int fj = fidx[cj];
        if (fj < 0) continue;
        rhs(fj, 0) += d.load_f[s][j].x + d.load_l[s][j].x;
        rhs(fj, 1) += d.load_f[s][j].y + d.load_l[s][j].y;
        for (int k = 0; k < 3; ++k) {
          int ck = cls[3 * s + k];
          int fk = fidx[ck];
          if (fk >= 0) {
            trip.emplace_back(fj, fk, A(j, k));
          } else {
            rhs(fj, 0) -= A(j, k) * value[ck].x;
            rhs(fj, 1) -= A(j, k) * value[ck].y;
          }
        }
      }
    }
    if (nf > 0) {
      SpMat Amat(nf, nf);
      Amat.setFromTriplets(trip.begin(), trip.end());
      Eigen::SimplicialLDLT<SpMat> ldlt(Amat);
      if (ldlt.info() != Eigen::Success) throw SolveFailure("sparse factorization failed");
      Eigen::MatrixXd x = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !x.allFinite()) throw SolveFailure("sparse solve failed");
      for (int c = 0; c < nc; ++c)
        if (fidx[c] >= 0) value[c] = Vec2{x(fidx[c], 0), x(fidx[c], 1)};
    }
  } else {
    // Damped Newton from the boundary datum.
    std::vector<int> vertex_of(nc, -1);
    for (std::size_t s = 0; s < n; ++s)
      for (int j = 0; j < 3; ++j) vertex_of[cls[3 * s + j]] = m.tris[s][j];
    for (int c = 0; c < nc; ++c)
      if (fidx[c] >= 0) value[c] = p.g.at(m, vertex_of[c]);
    const double tol = p.options.newton_tol;
    int it = 0;
    for (;; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(2 * nf);
      std::vector<Eigen::Triplet<double>> trip;
      double E = newton_eval(d, p, cls, fidx, value, &grad, &trip);
      if (grad.norm() <= tol * (1 + std::fabs(E))) break;
      if (it >= p.options.newton_max_iter)
        throw SolveFailure("Newton iteration stagnated after " + std::to_string(it) + " iterations (gradient " +
                           std::to_string(grad.norm()) + ")");
      SpMat H(2 * nf, 2 * nf);
      H.setFromTriplets(trip.begin(), trip.end());
      double diag = 0;
      for (int k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator itr(H, k); itr; ++itr)
          if (itr.row() == itr.col()) diag = std::max(diag, std::fabs(itr.value()));
      Eigen::VectorXd dx;
      for (double shift = 1e-12 * (diag + 1);; shift *= 100) {
        SpMat Hs = H;
        for (int k = 0; k < 2 * nf; ++k) Hs.coeffRef(k, k) += shift;
        Eigen::SimplicialLDLT<SpMat> ldlt(Hs);
        if (ldlt.info() == Eigen::Success) {
          dx = ldlt.solve(-grad);
          if (ldlt.info() == Eigen::Success && dx.allFinite() && dx.dot(grad) < 0) break;
        }
        if (shift > 1e6 * (diag + 1)) throw SolveFailure("Newton system is singular");
      }
      double slope = dx.dot(grad);
      double alpha = 1.0;
      std::vector<Vec2> trial = value;
      for (;;) {
        for (int c = 0; c < nc; ++c)
          if (fidx[c] >= 0) trial[c] = value[c] + Vec2{dx(2 * fidx[c]), dx(2 * fidx[c] + 1)} * alpha;
        double Et = newton_eval(d, p, cls, fidx, trial, nullptr, nullptr);
        if (Et <= E + 1e-4 * alpha * slope) break;
        alpha *= 0.5;
        if (alpha < 1e-12) break;
      }
      if (alpha < 1e-12) {
        // No descent left at double precision.
        if (grad.norm() <= 1e3 * tol * (1 + std::fabs(E))) break;
        throw SolveFailure("Newton line search failed (gradient " + std::to_string(grad.norm()) + ")");
      }
      value = trial;
    }
    if (stats) stats->newton_iterations += it;
  }

  if (!floating_roots.empty()) {
    std::vector<double> wsum(nc, 0.0);
    std::vector<Vec2> msum(nc), load(nc);
    std::vector<double> load_abs(nc, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      int r = uf.find(cls[3 * s]);
      wsum[r] += d.area[s];
      for (int j = 0; j < 3; ++j) {
        msum[r] += value[cls[3 * s + j]] * (d.area[s] / 3.0);
        Vec2 l = d.load_f[s][j] + d.load_l[s][j];
        load[r] += l;
        load_abs[r] += norm(l);
      }
    }
    std::vector<Vec2> shift(nc);
    for (int r : floating_roots) {
      shift[r] = msum[r] * (1.0 / wsum[r]);
      if (stats) {
        ++stats->floating_components;
        if (norm(load[r]) > 1e-12 * (1 + load_abs[r])) ++stats->unbalanced_components;
      }
    }
    std::vector<char> is_floating(nc, 0);
    for (int r : floating_roots) is_floating[r] = 1;
    for (int c = 0; c < nc; ++c) {
      int r = uf.find(c);
      if (is_floating[r]) value[c] -= shift[r];
    }
  }
  return value;
}

DiscreteField solve_on(const MeshData& d, const std::vector<int>& topology, const StepProblem& p, SolveStats* stats,
                       DofMap* out_dofs = nullptr) {
  DofMap dofs = assemble_dofs(*d.mesh, topology, &p.g);
  std::vector<Vec2> values = solve_classes(d, dofs, p, stats);
  DiscreteField u = reconstruct(dofs, d.mesh, values, topology);
  if (out_dofs) *out_dofs = std::move(dofs);
  return u;
}

std::vector<double> grid_values(double a, int points) {
  if (points <= 1) return {0.5};
  std::vector<double> v;
  for (int k = 0; k < points; ++k) {
    double x = a + (1 - 2 * a) * k / (points - 1);
    if (2 * k + 1 == points) x = 0.5;
    v.push_back(x);
  }
  return v;
}

struct Candidate {
  double objective = kInf;
  std::vector<int> realized;
  long grid = -1;
  long mask = -1;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.objective != b.objective) return a.objective < b.objective;
  if (a.realized != b.realized) return a.realized < b.realized;
  if (a.grid != b.grid) return a.grid < b.grid;
  return a.mask < b.mask;
}

AdaptiveParams params_at(const StepProblem& p, const std::vector<std::vector<double>>& grid,
                         const std::vector<int>& varying, long index) {
  AdaptiveParams params = AdaptiveParams::uniform(grid.size(), p.warm.a);
  for (std::size_t e = 0; e < grid.size(); ++e) params.t[e] = grid[e][0];
  for (int e : varying) {
    long size = static_cast<long>(grid[e].size());
    params.t[e] = grid[e][index % size];
    index /= size;
  }
  return params;
}

StepSolution finish(const StepProblem& p, DiscreteField u, const AdaptiveParams& params) {
  StepSolution sol;
  StepObjective o = step_objective(u, p);
  sol.u = std::move(u);
  sol.params = params;
  sol.realized = o.realized;
  sol.added = crack_set_from(*sol.u.mesh, o.realized, p.step);
  sol.elastic = o.elastic;
  sol.surface_increment = o.surface_increment;
  sol.objective = o.total;
  return sol;
}

std::vector<int> merge_sorted(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace

std::vector<std::vector<double>> knot_grid(const StepProblem& p) {
  const RegularTriangulation& base = *p.base;
  const double a = p.warm.a;
  const auto full = p.options.knot_values.empty() ? grid_values(a, p.options.grid_points) : p.options.knot_values;
  for (double v : full)
    if (v < a - 1e-14 || v > 1 - a + 1e-14)
      throw ParamOutOfRange("knot grid value " + std::to_string(v) + " lies outside [a, 1 - a] for a = " +
                            std::to_string(a));
  std::vector<std::vector<double>> grid(base.edges.size());
  for (std::size_t e = 0; e < base.edges.size(); ++e) {
    auto& g = grid[e];
    bool closure = base.edge_in_brittle_closure(static_cast<int>(e));
    Vec2 mid = (base.vertices[base.edges[e].v[0]] + base.vertices[base.edges[e].v[1]]) * 0.5;
    bool in_band = p.options.full_grid;
    for (const auto& r : p.options.band) in_band = in_band || r.contains(mid, 1e-12);
    if (closure && in_band)
      g = full;
    else
      g = {0.5};
    if (e < p.warm.t.size()) g.push_back(p.warm.t[e]);
    for (double t : p.prev.knots_on_edge(base, static_cast<int>(e)))
      if (t >= a - 1e-14 && t <= 1 - a + 1e-14) g.push_back(t);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }
  return grid;
}

std::vector<int> covered_subedges(const AdaptiveTriangulation& m, const CrackSet& prev) {
  std::vector<int> out;
  if (prev.empty()) return out;
  for (std::size_t id = 0; id < m.subedges.size(); ++id) {
    if (!m.subedges[id].crackable) continue;
    if (prev.covers(crack_edge(m, static_cast<int>(id), 0))) out.push_back(static_cast<int>(id));
  }
  return out;
}

DiscreteField elastic_solve(const AdaptivePtr& mesh, const std::vector<int>& topology, const StepProblem& problem,
                            SolveStats* stats) {
  for (int id : topology)
    if (!mesh->subedges[id].crackable) throw Error("topology contains a non-crackable sub-edge " + std::to_string(id));
  MeshData d = prepare(mesh, problem);
  return solve_on(d, topology, problem, stats);
}

StepObjective step_objective(const DiscreteField& v, const StepProblem& p) {
  StepObjective o;
  o.elastic = elastic_energy(p.t, v, p.model);
  o.realized = combined_jump(v, p.g);
  if (!o.realized.empty()) {
    CrackSet added = crack_set_from(*v.mesh, o.realized, p.step);
    o.surface_increment = incremental_surface_energy(added, p.prev, p.model.surface);
  }
  o.total = o.elastic + o.surface_increment;
  return o;
}

StepSolution step_minimize_exact(const StepProblem& p) {
  const auto grid = knot_grid(p);
  std::vector<int> varying;
  long grid_size = 1;
  for (std::size_t e = 0; e < grid.size(); ++e)
    if (grid[e].size() > 1) {
      varying.push_back(static_cast<int>(e));
      grid_size *= static_cast<long>(grid[e].size());
      if (grid_size > (1L << 20)) throw EnumerationCapExceeded("adaptive grid has more than 2^20 points");
    }
  std::vector<long> grid_order(grid_size);
  std::iota(grid_order.begin(), grid_order.end(), 0L);
  std::mt19937_64 rng(p.options.order_seed);
  if (p.options.order_seed) std::shuffle(grid_order.begin(), grid_order.end(), rng);

  Candidate best;
  SolveStats stats;
  long evaluations = 0;
  const int threads = std::max(1, p.options.threads);
  for (long gi : grid_order) {
    AdaptiveParams params = params_at(p, grid, varying, gi);
    AdaptivePtr mesh = subdivide(p.base, params);
    MeshData d = prepare(mesh, p);
    if (static_cast<int>(d.crackable.size()) > p.options.cap)
      throw EnumerationCapExceeded(std::to_string(d.crackable.size()) + " crackable sub-edges exceed the enumeration cap " +
                                   std::to_string(p.options.cap));
    std::vector<int> F = covered_subedges(*mesh, p.prev);
    std::vector<int> R;
    std::set_difference(d.crackable.begin(), d.crackable.end(), F.begin(), F.end(), std::back_inserter(R));
    const long nmask = 1L << R.size();
    std::vector<long> masks(nmask);
    std::iota(masks.begin(), masks.end(), 0L);
    if (p.options.order_seed) std::shuffle(masks.begin(), masks.end(), rng);

    struct Cached {
      DofMap dofs;
      double objective;
      std::vector<int> realized;
    };
    struct Worker {
      Candidate best;
      SolveStats stats;
      std::unordered_map<std::uint64_t, std::vector<Cached>> cache;
    };
    std::vector<Worker> workers(threads);
    parallel_for(nmask, threads, [&](long i, int w) {
      Worker& wk = workers[w];
      long mask = masks[i];
      std::vector<int> topo = F;
      for (std::size_t b = 0; b < R.size(); ++b)
        if (mask >> b & 1L) topo.push_back(R[b]);
      std::sort(topo.begin(), topo.end());
      DofMap dofs = assemble_dofs(*mesh, topo, &p.g);
      auto& bucket = wk.cache[dofs.hash];
      const Cached* hit = nullptr;
      for (const auto& c : bucket)
        if (c.dofs.same_partition(dofs)) hit = &c;
      if (!hit) {
        std::vector<Vec2> values = solve_classes(d, dofs, p, &wk.stats);
        DiscreteField u = reconstruct(dofs, mesh, values, topo);
        StepObjective o = step_objective(u, p);
        bucket.push_back({std::move(dofs), o.total, std::move(o.realized)});
        hit = &bucket.back();
      }
      Candidate c{hit->objective, hit->realized, gi, mask};
      if (better(c, wk.best)) wk.best = std::move(c);
    });
    for (auto& wk : workers) {
      if (better(wk.best, best)) best = wk.best;
      stats.solves += wk.stats.solves;
      stats.newton_iterations += wk.stats.newton_iterations;
      stats.floating_components += wk.stats.floating_components;
      stats.unbalanced_components += wk.stats.unbalanced_components;
    }
    evaluations += nmask;
  }

  AdaptiveParams params = params_at(p, grid, varying, best.grid);
  AdaptivePtr mesh = subdivide(p.base, params);
  MeshData d = prepare(mesh, p);
  std::vector<int> F = covered_subedges(*mesh, p.prev);
  std::vector<int> R;
  std::set_difference(d.crackable.begin(), d.crackable.end(), F.begin(), F.end(), std::back_inserter(R));
  std::vector<int> topo = F;
  for (std::size_t b = 0; b < R.size(); ++b)
    if (best.mask >> b & 1L) topo.push_back(R[b]);
  SolveStats final_stats;
  StepSolution sol = finish(p, solve_on(d, merge_sorted(topo, {}), p, &final_stats), params);
  sol.stats = stats;
  sol.stats.floating_components = final_stats.floating_components;
  sol.stats.unbalanced_components = final_stats.unbalanced_components;
  sol.evaluations = evaluations;
  sol.grid_size = grid_size;
  sol.oracle_objective = sol.objective;
  return sol;
}

namespace {

struct Eval {
  double objective = kInf;
  std::vector<int> realized;
  DiscreteField u;
};

Eval evaluate(const MeshData& d, const std::vector<int>& topo, const StepProblem& p, SolveStats* stats) {
  Eval e;
  e.u = solve_on(d, topo, p, stats);
  StepObjective o = step_objective(e.u, p);
  e.objective = o.total;
  e.realized = std::move(o.realized);
  return e;
}

// Surface cost of opening one sub-edge given the previous crack.
double edge_cost(const AdaptiveTriangulation& m, int id, const StepProblem& p) {
  CrackSet one;
  one.insert(crack_edge(m, id, p.step));
  return incremental_surface_energy(one, p.prev, p.model.surface);
}

struct Heuristic {
  const StepProblem& p;
  std::vector<std::vector<double>> grid;
  AdaptiveParams params;
  MeshData d;
  std::vector<int> covered;
  std::vector<int> open;  // declared topology, sorted, contains `covered`
  Eval cur;
  SolveStats stats;
  long evaluations = 0;
  int moves = 0;

  explicit Heuristic(const StepProblem& problem) : p(problem), grid(knot_grid(problem)) {
    params = AdaptiveParams::uniform(grid.size(), p.warm.a);
    if (p.warm.t.size() == grid.size()) params.t = p.warm.t;
    load(params, {});
  }

  void load(const AdaptiveParams& q, const std::vector<int>& extra) {
    params = q;
    d = prepare(subdivide(p.base, params), p);
    covered = covered_subedges(*d.mesh, p.prev);
    open = merge_sorted(covered, extra);
    cur = eval(open, &stats);
  }

  Eval eval(const std::vector<int>& topo, SolveStats* st) { return evaluate(d, topo, p, st); }

  std::vector<int> opened_this_step() const {
    std::vector<int> out;
    std::set_difference(open.begin(), open.end(), covered.begin(), covered.end(), std::back_inserter(out));
    return out;
  }

  std::vector<std::vector<int>> topology_moves() const {
    const AdaptiveTriangulation& m = *d.mesh;
    std::set<std::vector<int>> moves;
    std::vector<char> is_open(m.subedges.size(), 0);
    for (int id : open) is_open[id] = 1;

    // Active vertices: crack vertices and boundary vertices.
    std::vector<char> active(m.vertices.size(), 0);
    for (int id : open)
      for (int v : m.subedges[id].v) active[v] = 1;
    for (const auto& e : m.subedges)
      if (e.on_boundary())
        for (int v : e.v) active[v] = 1;
    for (int id : d.crackable) {
      if (is_open[id]) continue;
      const SubEdge& e = m.subedges[id];
      if (active[e.v[0]] || active[e.v[1]]) moves.insert(merge_sorted(open, {id}));
    }
    for (int id : opened_this_step()) {
      std::vector<int> t;
      for (int o : open)
        if (o != id) t.push_back(o);
      moves.insert(t);
    }
    for (auto& path : path_moves(is_open)) moves.insert(merge_sorted(open, path));
    moves.erase(open);
    return {moves.begin(), moves.end()};
  }

  // Cheapest crackable paths between anchor groups (boundary sides and crack components).
  std::vector<std::vector<int>> path_moves(const std::vector<char>& is_open) const {
    const AdaptiveTriangulation& m = *d.mesh;
    const int nv = static_cast<int>(m.vertices.size());
    std::vector<std::vector<int>> groups;
    std::vector<char> on_bnd(nv, 0);
    for (const auto& e : m.subedges)
      if (e.on_boundary())
        for (int v : e.v) on_bnd[v] = 1;
    const auto& poly = p.base->domain.polygon;
    if (poly.size() >= 2) {
      for (std::size_t k = 0; k < poly.size(); ++k) {
        Segment side{poly[k], poly[(k + 1) % poly.size()]};
        std::vector<int> g;
        for (int v = 0; v < nv; ++v) {
          if (!on_bnd[v]) continue;
          const Vec2& x = m.vertices[v];
          Vec2 dir = side.p1 - side.p0;
          double len = norm(dir);
          double along = dot(x - side.p0, dir) / (len * len);
          if (std::fabs(cross(dir, x - side.p0)) / len <= 1e-12 && along >= -1e-12 && along <= 1 + 1e-12)
            g.push_back(v);
        }
        if (!g.empty()) groups.push_back(std::move(g));
      }
    } else {
      std::vector<int> g;
      for (int v = 0; v < nv; ++v)
        if (on_bnd[v]) g.push_back(v);
      groups.push_back(std::move(g));
    }
    UnionFind uf(nv);
    std::vector<char> touched(nv, 0);
    for (std::size_t id = 0; id < m.subedges.size(); ++id)
      if (is_open[id]) {
        uf.unite(m.subedges[id].v[0], m.subedges[id].v[1]);
        touched[m.subedges[id].v[0]] = touched[m.subedges[id].v[1]] = 1;
      }
    std::map<int, std::vector<int>> comps;
    for (int v = 0; v < nv; ++v)
      if (touched[v]) comps[uf.find(v)].push_back(v);
    for (auto& [r, g] : comps) groups.push_back(std::move(g));

    struct Arc {
      int to, id;
      double w;
    };
    std::vector<std::vector<Arc>> adj(nv);
    for (int id : d.crackable) {
      if (is_open[id]) continue;
      double w = edge_cost(m, id, p) + 1e-15;
      const SubEdge& e = m.subedges[id];
      adj[e.v[0]].push_back({e.v[1], id, w});
      adj[e.v[1]].push_back({e.v[0], id, w});
    }
    std::vector<std::vector<int>> out;
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (std::size_t gj = 0; gj < groups.size(); ++gj) {
        if (gi == gj) continue;
        std::vector<double> dist(nv, kInf);
        std::vector<int> pred_edge(nv, -1), pred_vertex(nv, -1);
        std::vector<char> target(nv, 0);
        for (int v : groups[gj]) target[v] = 1;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
        for (int v : groups[gi]) {
          dist[v] = 0;
          pq.push({0.0, v});
        }
        int hit = -1;
        while (!pq.empty()) {
          auto [dv, v] = pq.top();
          pq.pop();
          if (dv > dist[v]) continue;
          if (target[v] && dv > 0) {
            hit = v;
            break;
          }
          for (const Arc& a : adj[v]) {
            double nd = dv + a.w;
            if (nd < dist[a.to]) {
              dist[a.to] = nd;
              pred_edge[a.to] = a.id;
              pred_vertex[a.to] = v;
              pq.push({nd, a.to});
            }
          }
        }
        if (hit < 0) continue;
        std::vector<int> path;
        for (int v = hit; pred_edge[v] >= 0 && dist[v] > 0; v = pred_vertex[v]) path.push_back(pred_edge[v]);
        std::reverse(path.begin(), path.end());
        if (path.size() < 2) continue;
        for (double frac : {0.25, 0.5, 0.75, 1.0}) {
          std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(frac * path.size())));
          out.emplace_back(path.begin(), path.begin() + k);
        }
      }
    return out;
  }

  // Best strict improvement among candidate topologies on the current mesh.
  bool try_topologies() {
    auto cands = topology_moves();
    if (cands.empty()) return false;
    const int threads = std::max(1, p.options.threads);
    std::vector<Eval> results(cands.size());
    std::vector<SolveStats> wstats(threads);
    parallel_for(static_cast<long>(cands.size()), threads,
                 [&](long i, int w) { results[i] = eval(cands[i], &wstats[w]); });
    for (const auto& s : wstats) {
      stats.solves += s.solves;
      stats.newton_iterations += s.newton_iterations;
    }
    evaluations += static_cast<long>(cands.size());
    long best = -1;
    double threshold = cur.objective - 1e-12 * (1 + std::fabs(cur.objective));
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!(results[i].objective < threshold)) continue;
      if (best < 0 || results[i].objective < results[best].objective ||
          (results[i].objective == results[best].objective && results[i].realized < results[best].realized))
        best = static_cast<long>(i);
    }
    if (best < 0) return false;
    open = cands[best];
    cur = std::move(results[best]);
    return true;
  }

  bool try_knots() {
    const AdaptiveTriangulation& m = *d.mesh;
    const RegularTriangulation& base = *p.base;
    std::set<int> near;
    std::vector<char> crack_vertex(m.vertices.size(), 0);
    for (int id : open)
      for (int v : m.subedges[id].v) crack_vertex[v] = 1;
    for (std::size_t T = 0; T < base.triangles.size(); ++T) {
      bool touch = false;
      for (int j = 0; j < 4 && !touch; ++j)
        for (int v : m.tris[4 * T + j]) touch = touch || crack_vertex[v];
      if (!touch) continue;
      for (int e : base.tri_edges[T])
        if (grid[e].size() > 1) near.insert(e);
    }
    if (near.empty()) return false;
    std::vector<int> mine = opened_this_step();
    struct Trial {
      AdaptiveParams q;
    };
    std::vector<Trial> trials;
    for (int e : near)
      for (double v : grid[e])
        if (v != params.t[e]) {
          AdaptiveParams q = params;
          q.t[e] = v;
          trials.push_back({q});
        }
    const int threads = std::max(1, p.options.threads);
    struct Out {
      Eval e;
      std::vector<int> topo;
      MeshData d;
      std::vector<int> covered;
    };
    std::vector<Out> outs(trials.size());
    std::vector<SolveStats> wstats(threads);
    parallel_for(static_cast<long>(trials.size()), threads, [&](long i, int w) {
      Out& o = outs[i];
      o.d = prepare(subdivide(p.base, trials[i].q), p);
      o.covered = covered_subedges(*o.d.mesh, p.prev);
      o.topo = merge_sorted(o.covered, mine);
      o.e = evaluate(o.d, o.topo, p, &wstats[w]);
    });
    for (const auto& s : wstats) {
      stats.solves += s.solves;
      stats.newton_iterations += s.newton_iterations;
    }
    evaluations += static_cast<long>(trials.size());
    long best = -1;
    double threshold = cur.objective - 1e-12 * (1 + std::fabs(cur.objective));
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (!(outs[i].e.objective < threshold)) continue;
      if (best < 0 || outs[i].e.objective < outs[best].e.objective) best = static_cast<long>(i);
    }
    if (best < 0) return false;
    params = trials[best].q;
    d = std::move(outs[best].d);
    covered = std::move(outs[best].covered);
    open = std::move(outs[best].topo);
    cur = std::move(outs[best].e);
    return true;
  }

  void run() {
    while (moves < p.options.max_moves) {
      if (try_topologies() || try_knots())
        ++moves;
      else
        break;
    }
  }
};

}  // namespace

StepSolution step_minimize_heuristic(const StepProblem& p) {
  Heuristic h(p);
  h.run();
  StepSolution sol = finish(p, h.cur.u, h.params);
  sol.stats = h.stats;
  sol.evaluations = h.evaluations + 1;
  sol.moves = h.moves;
  return sol;
}

StepSolution step_minimize(const StepProblem& p) {
  switch (p.options.mode) {
    case SolverMode::Oracle: return step_minimize_exact(p);
    case SolverMode::Heuristic: return step_minimize_heuristic(p);
    case SolverMode::Both: {
      StepSolution h = step_minimize_heuristic(p);
      StepSolution o;
      try {
        o = step_minimize_exact(p);
      } catch (const EnumerationCapExceeded&) {
        return h;
      }
      o.gap = h.objective - o.objective;
      o.has_gap = true;
      o.moves = h.moves;
      return o;
    }
  }
  return step_minimize_exact(p);
}

namespace {

// Base-mesh interpolation of a nodal field at an arbitrary point.
Vec2 nodal_at(const NodalField& g, const RegularTriangulation& base, const Vec2& x) {
  int T = base.locate(x);
  if (T < 0) return Vec2{};
  const auto& v = base.triangles[T];
  const Vec2 &a = base.vertices[v[0]], &b = base.vertices[v[1]], &c = base.vertices[v[2]];
  double A = orient(a, b, c);
  double l0 = orient(x, b, c) / A, l1 = orient(a, x, c) / A;
  return g.values[v[0]] * l0 + g.values[v[1]] * l1 + g.values[v[2]] * (1 - l0 - l1);
}

bool admissible(const DiscreteField& v, const StepProblem& p) {
  for (int id : combined_jump(v, p.g))
    if (!v.mesh->subedges[id].crackable) return false;
  return true;
}

}  // namespace

CompetitorSampler default_sampler(int count, std::uint64_t seed) {
  return [count, seed](const StepSolution& sol, const StepProblem& p) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(p.step + 1)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Competitor> out;
    out.push_back({"self", sol.u});
    out.push_back({"datum", lift(p.g, sol.u.mesh)});
    const auto grid = knot_grid(p);
    const double scale = sol.u.scale();
    int attempts = 0;
    while (static_cast<int>(out.size()) < count && attempts < 20 * count) {
      ++attempts;
      int kind = static_cast<int>(out.size()) % 3;
      if (kind == 0) {
        AdaptiveParams q = sol.params;
        for (std::size_t e = 0; e < grid.size(); ++e)
          if (grid[e].size() > 1 && unit(rng) < 0.3) q.t[e] = grid[e][rng() % grid[e].size()];
        AdaptivePtr mesh = subdivide(p.base, q);
        std::vector<int> topo = covered_subedges(*mesh, p.prev);
        double prob = unit(rng);
        for (std::size_t id = 0; id < mesh->subedges.size(); ++id)
          if (mesh->subedges[id].crackable && unit(rng) < prob) topo.push_back(static_cast<int>(id));
        out.push_back({"topology", elastic_solve(mesh, merge_sorted(topo, {}), p)});
      } else if (kind == 1) {
        DofMap dofs = assemble_dofs(*sol.u.mesh, sol.u.topology, &p.g);
        std::vector<Vec2> values(dofs.num_classes);
        for (std::size_t s = 0; s < sol.u.values.size(); ++s)
          for (int j = 0; j < 3; ++j) values[dofs.class_of_slot[3 * s + j]] = sol.u.values[s][j];
        double amp = 1e-3 * scale * std::pow(10.0, 3 * unit(rng));
        for (auto& v : values) v += Vec2{gauss(rng), gauss(rng)} * amp;
        out.push_back({"perturbed", reconstruct(dofs, sol.u.mesh, values, sol.u.topology)});
      } else {
        const auto& brittle = p.base->domain.brittle;
        if (brittle.empty()) continue;
        const Rect& r = brittle[rng() % brittle.size()];
        Vec2 c{r.x0 + (r.x1 - r.x0) * unit(rng), r.y0 + (r.y1 - r.y0) * unit(rng)};
        double th = 3.141592653589793 * unit(rng);
        Vec2 dir{std::cos(th), std::sin(th)};
        double reach = std::hypot(r.x1 - r.x0, r.y1 - r.y0);
        Segment s{c - dir * reach, c + dir * reach};
        // Clip to the brittle rectangle (Liang-Barsky).
        double t0 = 0, t1 = 1;
        Vec2 dd = s.p1 - s.p0;
        auto clip = [&](double q, double w) {
          if (q == 0) return w >= 0;
          double t = w / q;
          if (q < 0) t0 = std::max(t0, t);
          else t1 = std::min(t1, t);
          return t0 <= t1;
        };
        if (!(clip(-dd.x, s.p0.x - r.x0) && clip(dd.x, r.x1 - s.p0.x) && clip(-dd.y, s.p0.y - r.y0) &&
              clip(dd.y, r.y1 - s.p0.y)))
          continue;
        Segment cut{s.p0 + dd * t0, s.p0 + dd * t1};
        Vec2 shift{gauss(rng) * 0.1 * scale, gauss(rng) * 0.1 * scale};
        JumpTarget target;
        target.side = [cut](const Vec2& x) { return cross(cut.p1 - cut.p0, x - cut.p0) > 0 ? 1 : 0; };
        const NodalField g = p.g;
        const MeshPtr base = p.base;
        target.value = [g, base, shift](int side, const Vec2& x) {
          return nodal_at(g, *base, x) + (side ? shift : Vec2{});
        };
        target.jumps = {cut};
        try {
          InterpolatedField f = interpolate_to_fespace(target, p.base, p.warm.a);
          out.push_back({"transfer", f.field});
        } catch (const Error&) {
          continue;
        }
      }
    }
    return out;
  };
}

AuditReport minimality_audit(const StepSolution& solution, const StepProblem& problem, const CompetitorSampler& sampler,
                             double tol) {
  AuditReport r;
  r.worst = -kInf;
  for (const auto& c : sampler(solution, problem)) {
    if (!admissible(c.v, problem)) continue;
    ++r.competitors;
    double viol = solution.objective - step_objective(c.v, problem).total;
    if (viol > r.worst) {
      r.worst = viol;
      r.worst_kind = c.kind;
    }
    if (viol > tol) ++r.violations;
  }
  if (r.competitors == 0) r.worst = 0;
  return r;
}

}  // namespace fracture
