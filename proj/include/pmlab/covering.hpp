#pragma once

#include <map>
#include <vector>

#include "pmlab/intrinsic_geometry.hpp"
#include "pmlab/problem_fields.hpp"
#include "pmlab/regimes.hpp"

namespace pmlab {

/// Problem rescaled to the unit window: u~(y,s) = gamma u(x0 + R y,
/// t0 + theta_o R^2 s) with gamma = theta_o^{1/(m-1)}, f~ = gamma^m f, living
/// on a grid over Q_{2,2} = (-2,2) x B_2 centered at the origin. The source
/// window must be cell-aligned so the rescaling is an exact relabeling.
struct NormalizedProblem {
  double m = 2.0;
  double gamma_scale = 1.0;  // theta_o^{1/(m-1)}
  double R = 1.0;
  double theta_o = 1.0;
  Cylinder source_window;  // centered Q_{2 theta_o R^2, 2R}(z0)
  ScalarField u;           // u~ on the normalized grid
  ScalarField f;           // f~
  ScalarField F;           // |D(u~^{(m+1)/2})|^2
  double C_base = 0.0;     // (mean_{Q22} u~^{m+1})^{(m-1)/(m+1)}
  double C_f = 0.0;        // c_data * mean_{Q22}(f~^{(m+1)/m} + u~^{m+1})
  double energy_ratio = 0.0;  // mean_{Q_{1,2}} F / C_f
  double q = 0.0;          // sub-mean exponent used for F^q

  PrefixSumTable u_m1;   // u~^{m+1}
  PrefixSumTable F_1;    // F
  PrefixSumTable F_q;    // F^q
  PrefixSumTable f_m1m;  // f~^{(m+1)/m}

  Cylinder q22() const {
    return Cylinder({0, 0, 0}, 0.0, 2.0, 2.0, TimeAnchor::Centered);
  }
  Cylinder qaa(double a) const {
    return Cylinder({0, 0, 0}, 0.0, a, a, TimeAnchor::Centered);
  }
};

/// Throws ParameterError when the window is not cell-aligned or the base
/// condition (mean_{window} u^{m+1})^{(m-1)/(m+1)} <= C / theta_o fails.
NormalizedProblem normalize(const ScalarField& u, const ScalarField& f,
                            double m, const Cylinder& window, double theta_o,
                            double C = 1.0, double c_data = 1.0,
                            double q = 0.0, int threads = 1);

/// Cell-aligned base window Q_{2 theta_o R^2, 2R}(z0) with theta_o chosen
/// from the measured window mean so the base condition holds with margin.
struct BaseWindow {
  Cylinder window;
  double theta_o = 0.0;
};
BaseWindow fit_base_window(const ScalarField& u, double m,
                           const std::array<double, kMaxSpatialDim>& x0,
                           double t0, double R, double C = 1.0);

/// lambda_{a,b} = C_f / |b-a|^tau, tau = (3(n+2)/2) / min{1, b_hat}.
double lambda_threshold(double C_f, int n, double b_hat, double a, double b);

/// Cell-snapped member of the intrinsic cylinder family: an integer box
/// whose real shadow is radius r = w h, half-height s_cells ht around a
/// cell-corner center.
struct FamilyMember {
  int level = 0;  // ladder index
  std::array<int, kMaxSpatialDim> c{};  // spatial center (corner index)
  int ct = 0;                           // temporal center (corner index)
  int w = 0;                            // spatial half-width, cells
  int s_cells = 0;                      // temporal half-height, cells
  double r = 0.0;
  double s = 0.0;       // geometry height s(r, center) before snapping
  double avg = 0.0;     // mean of F over the box
  Index cells = 0;

  Cylinder shadow(const SpaceTimeGrid& g) const;
  bool contains_cell(const SpaceTimeGrid& g, int it,
                     const std::array<int, kMaxSpatialDim>& ix) const;
  bool box_subset_of(const FamilyMember& other, int n) const;
};

struct FamilyParams {
  double ladder_ratio = std::pow(2.0, 0.25);
  int min_half_width = 2;  // cells
  double K = 4.0;          // intrinsic constant for case decisions
  double epsilon = 0.1;    // regime threshold
  GeometryParams geometry;
};

/// The discrete intrinsic family over centers in Q_{1,1}: per ladder level,
/// a center lattice with stride ~ half the member width; heights from the
/// per-center scale system with a shared initial-height cap.
class IntrinsicFamily {
 public:
  const NormalizedProblem* np = nullptr;
  FamilyParams params;
  RadiusLadder ladder;      // real radii w_k h
  std::vector<int> widths;  // w_k, cells
  double S_geom = 1.0;      // shared initial-height cap
  std::vector<FamilyMember> members;
  // geometry cache per unique center
  std::map<std::pair<int, int>, PointGeometry> geometries;

  const PointGeometry& geometry_at(const FamilyMember& mb) const;
  /// Members containing the cell (it, ix), by ascending level.
  std::vector<int> members_containing(int it,
                                      const std::array<int, kMaxSpatialDim>& ix) const;
  /// Strict supersets (box inclusion, strictly larger) of member i.
  std::vector<int> supersets_of(int i) const;
};

IntrinsicFamily build_intrinsic_family(const NormalizedProblem& np,
                                       const FamilyParams& params,
                                       int threads = 1);

/// Per-cell sup of averages over all family members containing the cell,
/// maxed with the cell value itself (the family implicitly contains every
/// single cell). values_family excludes the point term (used for the level
/// sets of the covering).
struct MaximalField {
  ScalarField values;         // max(point value, family sup)
  ScalarField values_family;  // family sup only (0 where no member)
};

MaximalField maximal_intrinsic(const IntrinsicFamily& fam,
                               const ScalarField& F);

/// Box maximal function over single cells, the family's bounding boxes, and
/// a dyadic box ladder; dominates the intrinsic maximal field cellwise.
MaximalField maximal_boxes(const IntrinsicFamily& fam, const ScalarField& F);

/// Stopping member at cell z for level lambda: the largest member containing
/// z with average > lambda whose strict supersets all average <= 2 lambda
/// (a member with no strict superset qualifies only when its own average is
/// <= 2 lambda). Returns -1 when no member qualifies.
int stopping_member(const IntrinsicFamily& fam, int it,
                    const std::array<int, kMaxSpatialDim>& ix, double lambda);

struct CoveringEntry {
  int stop_member = -1;
  int case_id = 3;  // 1: intrinsic+degenerate, 2: intrinsic+non-degenerate, 3: none
  Regime regime = Regime::Degenerate;
  double rho = 0.0;        // intrinsic radius found in [4 r_z, 8 r_z] (cases 1-2)
  int alternatives = 0;    // other intrinsic radii in the scan window
  Cylinder Qz, Qstar, Qss;
  double avg_Qz = 0.0;     // mean F over Qz
  double avg_Qss = 0.0;    // mean F over Q**
  double avg_Fq_star = 0.0;  // (mean_{Q*} F^q)^{1/q}
};

struct CoveringFamily {
  double lambda = 0.0;
  double a = 0.0, b = 0.0;
  double c1 = 0.0;  // engulfing constant used for the dilations
  std::vector<CoveringEntry> entries;
  std::vector<int> selected;  // Vitali subfamily (indices into entries)
  // verification summary
  Index level_set_cells = 0;  // |O_lambda ∩ Q_{a,a}| in cells
  Index covered_cells = 0;    // cells of the level set inside some selected Q**
  double coverage = 1.0;
  bool disjoint = true;
  double fitted_c_lower = 0.0;  // max over entries of lambda / avg_Qz
  double worst_upper = 0.0;     // max over entries of avg_Qss / (2 lambda)
};

/// Stopping-time covering of O_lambda ∩ Q_{a,a} for lambda > lambda_{a,b}.
/// Cases per the dilation table; Vitali selection applied to the Q*.
/// Throws ParameterError when lambda <= lambda_{a,b} and InternalError when
/// a Q** escapes Q_{b,b}.
CoveringFamily cz_cover(const IntrinsicFamily& fam,
                        const ProblemFields& npf,  // fields of the normalized problem
                        const MaximalField& mf, double lambda, double a,
                        double b, double c1);

/// Greedy Vitali selection by dyadic radius classes on generic cylinders.
/// Returns indices of a pairwise-disjoint subfamily; with the engulfing
/// property, the 2 c1-dilates of the selected members cover every member of
/// radius <= R / c1.
std::vector<int> vitali_select(const std::vector<Cylinder>& family,
                               int spatial_dim);

/// Redistribution inequality data at one level lambda:
///   int_{Q_{a,a} ∩ O_lambda} F <= c lambda^{1-q} int_{Q_{b,b}} F^q chi_{F > gamma_cut lambda}
///                                + 2 lambda |{M*(f^{(m+1)/m}) > eps_tilde lambda}|.
struct RedistributionRow {
  double lambda = 0.0;
  double lhs = 0.0;
  double gradient_part = 0.0;  // lambda^{1-q} int F^q chi
  double bad_part = 0.0;       // 2 lambda |bad set|
  double fitted_c = 0.0;       // (lhs - bad_part)_+ / gradient_part
};

RedistributionRow redistribution_check(const IntrinsicFamily& fam,
                                       const MaximalField& mf,
                                       const MaximalField& mf_rhs,
                                       double lambda, double a, double b,
                                       double gamma_cut, double eps_tilde);

}  // namespace pmlab
