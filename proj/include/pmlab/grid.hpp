#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pmlab/errors.hpp"

namespace pmlab {

using Scalar = double;
using ArrayX = Eigen::ArrayXd;
using Index = std::int64_t;

/// Maximum supported number of spatial axes. Tests exercise n in {1,2}.
inline constexpr int kMaxSpatialDim = 3;

/// Uniform space-time grid over [t_min,t_max] x prod_a [x_min[a],x_max[a]].
/// Cells are closed boxes of size ht x h^n; samples live at cell centers.
/// Flat storage is time-major: index = ((it*nx0 + i0)*nx1 + i1)...
struct SpaceTimeGrid {
  int spatial_dim = 1;
  std::array<double, kMaxSpatialDim> x_min{};
  std::array<double, kMaxSpatialDim> x_max{};
  double t_min = 0.0;
  double t_max = 1.0;
  std::array<int, kMaxSpatialDim> cells{};  // cells per spatial axis
  int time_cells = 1;
  double h = 0.0;   // spatial step, identical on every spatial axis
  double ht = 0.0;  // time step

  SpaceTimeGrid() = default;
  SpaceTimeGrid(int n, std::array<double, kMaxSpatialDim> xmin,
                std::array<double, kMaxSpatialDim> xmax,
                std::array<int, kMaxSpatialDim> nx, double tmin, double tmax,
                int nt);

  /// 1-D convenience constructor.
  static SpaceTimeGrid line(double x0, double x1, int nx, double t0, double t1,
                            int nt);
  /// 2-D convenience constructor (square cells).
  static SpaceTimeGrid plane(double x0, double x1, int nx, double y0, double y1,
                             int ny, double t0, double t1, int nt);

  int axes() const { return spatial_dim + 1; }
  Index cell_count() const;
  double cell_volume() const;  // ht * h^n
  double spatial_cell_volume() const;

  Index spatial_count() const;
  Index index(int it, const std::array<int, kMaxSpatialDim>& ix) const;
  Index index1(int it, int i0) const { return index(it, {i0, 0, 0}); }
  Index index2(int it, int i0, int i1) const { return index(it, {i0, i1, 0}); }

  double t_center(int it) const { return t_min + (it + 0.5) * ht; }
  double x_center(int axis, int i) const { return x_min[axis] + (i + 0.5) * h; }

  /// Finer grid with the space and time steps divided by `factor`.
  SpaceTimeGrid refined(int factor) const;
};

/// Discrete scalar function on a grid; one value per space-time cell.
struct ScalarField {
  SpaceTimeGrid grid;
  ArrayX values;
  bool nonneg = false;

  ScalarField() = default;
  ScalarField(SpaceTimeGrid g, bool nonneg_flag);

  double& at(int it, const std::array<int, kMaxSpatialDim>& ix) {
    return values[grid.index(it, ix)];
  }
  double at(int it, const std::array<int, kMaxSpatialDim>& ix) const {
    return values[grid.index(it, ix)];
  }
  double& at1(int it, int i) { return values[grid.index1(it, i)]; }
  double at1(int it, int i) const { return values[grid.index1(it, i)]; }

  /// Throws DomainError if the nonneg flag is set and a negative value exists.
  void validate() const;

  /// Sample f(x, t) at all cell centers. `x` has `spatial_dim` entries.
  static ScalarField sample(
      const SpaceTimeGrid& g,
      const std::function<double(const std::array<double, kMaxSpatialDim>&,
                                 double)>& f,
      bool nonneg_flag);

  static ScalarField constant(const SpaceTimeGrid& g, double c);
};

/// Time-interval convention of a cylinder.
enum class TimeAnchor {
  Centered,  // (t0 - s, t0 + s)
  Backward,  // (t0 - s, t0]
};

/// Space-time box: time interval x l-infinity ball (axis-aligned cube) of
/// half-width `radius`. theta = half_time / radius^2.
struct Cylinder {
  std::array<double, kMaxSpatialDim> x{};
  double t = 0.0;
  double radius = 0.0;
  double half_time = 0.0;
  TimeAnchor anchor = TimeAnchor::Centered;

  Cylinder() = default;
  Cylinder(std::array<double, kMaxSpatialDim> center_x, double center_t,
           double r, double s, TimeAnchor a = TimeAnchor::Centered)
      : x(center_x), t(center_t), radius(r), half_time(s), anchor(a) {}

  static Cylinder centered1(double x0, double t0, double r, double s) {
    return Cylinder({x0, 0, 0}, t0, r, s, TimeAnchor::Centered);
  }
  static Cylinder backward1(double x0, double t0, double r, double s) {
    return Cylinder({x0, 0, 0}, t0, r, s, TimeAnchor::Backward);
  }

  double theta() const { return half_time / (radius * radius); }
  double t_lo() const { return t - half_time; }
  double t_hi() const { return anchor == TimeAnchor::Centered ? t + half_time : t; }
  double duration() const { return t_hi() - t_lo(); }
  double x_lo(int axis) const { return x[axis] - radius; }
  double x_hi(int axis) const { return x[axis] + radius; }
  double volume(int spatial_dim) const;

  /// Same center and anchor, radius and half_time scaled by k (so theta
  /// scales by 1/k; Q_{k s, k r} in the paper-style notation).
  Cylinder dilated(double k) const {
    return Cylinder(x, t, k * radius, k * half_time, anchor);
  }
  Cylinder with_anchor(TimeAnchor a) const {
    return Cylinder(x, t, radius, half_time, a);
  }

  bool inside(const SpaceTimeGrid& g, double tol = 1e-9) const;
  bool contains(const Cylinder& other, int spatial_dim, double tol = 0.0) const;
  bool intersects(const Cylinder& other, int spatial_dim) const;
};

/// Visit every cell with positive overlap with Q; weight is the covered
/// volume fraction in (0,1].
void for_each_covered_cell(const SpaceTimeGrid& g, const Cylinder& Q,
                           const std::function<void(Index, double)>& visit);

/// Like for_each_covered_cell but only over the spatial slice at time level
/// `it`; weight is the covered *spatial* fraction.
void for_each_covered_slice_cell(
    const SpaceTimeGrid& g, const Cylinder& Q, int it,
    const std::function<void(Index, double)>& visit);

/// Range of time levels with positive temporal overlap, with per-level
/// temporal coverage fractions.
struct TimeCoverage {
  int first = 0;
  std::vector<double> weight;  // weight[k] for level first + k
};
TimeCoverage time_coverage(const SpaceTimeGrid& g, const Cylinder& Q);

/// Exact-summation prefix table of field^power over the (n+1)-dimensional
/// index lattice. Box integrals are O(1) via inclusion-exclusion over the
/// 2^(n+1) corners; partially covered boundary cells decompose into at most
/// 3^(n+1) aligned terms because the coverage fraction factorizes per axis.
/// Accumulation is in long double so reconstructed box sums match direct
/// summation to 1e-12 relative.
class PrefixSumTable {
 public:
  PrefixSumTable() = default;
  /// Throws DomainError if the field has negative values and `power` is not
  /// a nonnegative integer.
  PrefixSumTable(const ScalarField& f, double power);

  double power() const { return power_; }
  const SpaceTimeGrid& grid() const { return grid_; }

  /// Sum of field^power over the aligned index box
  /// [it0,it1) x prod [i_lo[a], i_hi[a]).
  double aligned_sum(int it0, int it1, const std::array<int, kMaxSpatialDim>& lo,
                     const std::array<int, kMaxSpatialDim>& hi) const;

  /// Integral of field^power (piecewise constant per cell) over the real box
  /// [t_lo,t_hi] x prod [lo[a],hi[a]], boundary cells weighted by covered
  /// volume fraction. The box is clipped to the grid.
  double box_integral(double t_lo, double t_hi,
                      const std::array<double, kMaxSpatialDim>& lo,
                      const std::array<double, kMaxSpatialDim>& hi) const;

  double cylinder_integral(const Cylinder& Q) const;

 private:
  SpaceTimeGrid grid_;
  double power_ = 1.0;
  std::array<Index, kMaxSpatialDim + 1> dims_{};    // per-axis table extents
  std::array<Index, kMaxSpatialDim + 1> strides_{};
  std::vector<long double> sums_;

  long double corner(const std::array<Index, kMaxSpatialDim + 1>& idx) const;
};

/// pow with the domain rule used throughout: 0^q = 0 for q > 0, and integer
/// powers evaluated by multiplication so negative bases are exact.
double power_value(double v, double q);

/// Mean of |field|^q over Q via the prefix table (q = table.power()).
/// Throws DomainError if Q is not inside the grid.
double cylinder_average(const PrefixSumTable& table, const Cylinder& Q);

/// Direct-summation path (independent of the prefix machinery).
double cylinder_average(const ScalarField& f, const Cylinder& Q, double q);

/// Mean of |field - c|^p over Q (direct summation; c varies per call).
double centered_power_average(const ScalarField& f, const Cylinder& Q, double c,
                              double p);

/// Integral (not mean) of field^q over Q, direct summation.
double cylinder_integral_direct(const ScalarField& f, const Cylinder& Q,
                                double q);

/// Piecewise-linear radial cutoff in the l-infinity distance from `center`:
/// 1 inside `inner`, 0 outside `outer`, linear in between. |D eta| =
/// 1/(outer-inner).
struct RadialCutoff {
  std::array<double, kMaxSpatialDim> center{};
  double inner = 0.0;
  double outer = 1.0;

  double value(const std::array<double, kMaxSpatialDim>& p, int spatial_dim) const;
};

/// Per-time-level statistics over the spatial cross-section of Q.
struct SliceStats {
  int time_index = 0;
  double time = 0.0;
  double time_weight = 0.0;   // temporal coverage fraction of the level
  double mean = 0.0;          // unweighted spatial mean
  double weighted_mean = 0.0; // eta^weight_power-weighted mean
  double max = 0.0;           // max over covered cells (ess sup surrogate)
};

/// Slice statistics for every time level covered by Q. With no cutoff the
/// weighted mean equals the unweighted mean exactly. Throws DomainError when
/// Q covers no time level or a slice covers no cell.
std::vector<SliceStats> slice_stats(const ScalarField& f, const Cylinder& Q,
                                    const RadialCutoff* weight = nullptr,
                                    double weight_power = 1.0);

/// |D(u^kappa)|^2 per cell. Central differences inside the positivity set,
/// one-sided where a neighbor cell vanishes (free boundary), zero on the
/// interior of the zero set. Requires u >= 0.
ScalarField gradient_power_field(const ScalarField& u, double kappa,
                                 int threads = 1);

/// Immutable bundle of prefix tables of one field at several powers.
class PowerTables {
 public:
  PowerTables() = default;
  PowerTables(const ScalarField& f, const std::vector<double>& powers);

  bool has(double power) const;
  const PrefixSumTable& at(double power) const;
  const std::vector<double>& powers() const { return powers_; }

 private:
  std::vector<double> powers_;
  std::vector<PrefixSumTable> tables_;
};

}  // namespace pmlab
