#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fracture/expr.hpp"
#include "fracture/fespace.hpp"

namespace fracture {

struct QuadPoint {
  std::array<double, 3> bary;
  double weight;  // weights sum to 1
};

// Symmetric triangle rules with 1, 3, 6 or 7 points (degrees 1, 2, 4, 5).
const std::vector<QuadPoint>& triangle_rule(int points);
// Two-point Gauss rule on [0, 1].
const std::array<std::pair<double, double>, 2>& edge_rule();

enum class BulkVariant { PNorm, Quadratic, Custom };

struct BulkDensity {
  BulkVariant variant = BulkVariant::Quadratic;
  double mu = 1.0;
  double p = 2.0;
  std::function<double(const Mat2&)> custom_w;
  std::function<Mat2(const Mat2&)> custom_dw;

  double exponent() const { return variant == BulkVariant::Quadratic ? 2.0 : p; }
  double W(const Mat2& xi) const;
  Mat2 dW(const Mat2& xi) const;
  // Second derivative as a 4x4 matrix on vec(xi) = (xi00, xi01, xi10, xi11).
  Eigen::Matrix4d d2W(const Mat2& xi) const;
  double a0() const { return mu; }
  double a1() const { return mu; }
  double a2() const { return exponent() * mu; }
  bool is_quadratic() const { return variant != BulkVariant::Custom && exponent() == 2.0; }
};

// F(t, x, z) = -kappa |z|^q + f(t, x) . z
struct BodyPotential {
  double kappa = 0.0;
  double q = 2.0;
  VectorFormula f;
  VectorFormula fdot;

  void set_load(const VectorFormula& load) {
    f = load;
    fdot = load.dt();
  }
  double F(double t, const Vec2& x, const Vec2& z) const;
  Vec2 dF(double t, const Vec2& x, const Vec2& z) const;
  double Fdot(double t, const Vec2& x, const Vec2& z) const;
};

// G(t, x, z) = l(t, x) . z on the traction boundary.
struct SurfacePotential {
  VectorFormula l;
  VectorFormula ldot;
  double r = 2.0;

  void set_load(const VectorFormula& load) {
    l = load;
    ldot = load.dt();
  }
};

enum class SurfaceVariant { Isotropic, AnisotropicEllipse };

struct SurfaceDensity {
  SurfaceVariant variant = SurfaceVariant::Isotropic;
  double kappa_s = 1.0;
  Mat2 M = Mat2::Identity();

  double k(const Vec2& nu) const;
  // k(nu) * length for the segment p0-p1 (nu its unit normal).
  double cost(const Vec2& p0, const Vec2& p1) const;
  double K1() const;
  double K2() const;
};

struct EnergyModel {
  BulkDensity bulk;
  BodyPotential body;
  SurfacePotential traction;
  SurfaceDensity surface;
  int quadrature = 3;
  bool degenerate_ok = false;  // acknowledges kappa_F = 0

  bool is_quadratic() const { return bulk.is_quadratic() && (body.kappa == 0.0 || body.q == 2.0); }
};

double bulk_energy(const DiscreteField& u, const EnergyModel& model);
double body_work(double t, const DiscreteField& u, const EnergyModel& model);
double surface_work(double t, const DiscreteField& u, const EnergyModel& model);
double elastic_energy(double t, const DiscreteField& u, const EnergyModel& model);

struct DerivativeActions {
  double dW = 0;     // <dW(grad u), grad psi>
  double dF = 0;     // <dF(t)(u), psi>
  double dG = 0;     // <dG(t)(u), psi>
  double Fdot = 0;   // Fdot(t)(u)
  double Gdot = 0;   // Gdot(t)(u)
};

// psi must live on the same adaptive triangulation as u.
DerivativeActions derivative_actions(double t, const DiscreteField& u, const DiscreteField& psi,
                                     const EnergyModel& model);

// Norms used by the coercivity and a-priori bounds.
double gradient_norm_pp(const DiscreteField& u, double p, int quadrature = 7);
double field_norm_qq(const DiscreteField& u, double q, int quadrature = 7);

struct CoercivityConstants {
  double alpha0 = 0;
  double beta0 = 0;
  double alpha1 = 0;
  double beta1 = 0;
  bool gradient_only = false;  // bound controls only the gradient term
  double sup_f = 0;
  double sup_l = 0;
  double gamma_s = 0;
};

CoercivityConstants coercivity_constants(const EnergyModel& model, const RegularTriangulation& tri, double T);

// Sup over [0, T] x Omega of |f| and over [0, T] x traction boundary of |l| (64-point grids).
double sup_body_load(const EnergyModel& model, const RegularTriangulation& tri, double T);
double sup_traction_load(const EnergyModel& model, const RegularTriangulation& tri, double T);
// Trace constant: sup ||u||^2_{L2(traction)} / (||grad u||^2 + ||u||^2)_{L2(Omega_S)}, square-rooted.
double trace_constant(const RegularTriangulation& tri);

}  // namespace fracture
