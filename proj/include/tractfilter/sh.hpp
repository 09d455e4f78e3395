#pragma once

// Real symmetric spherical-harmonic basis and per-shell least-squares fits.
//
// Basis convention: even orders l = 0, 2, ..., lmax; within each order
// m = -l..l. Column index of (l, m) is l(l+1)/2 + m. Orthonormal on the unit
// sphere, no Condon-Shortley phase:
//   m < 0: sqrt(2) N_l^|m| P_l^|m|(cos theta) sin(|m| phi)
//   m = 0: N_l^0 P_l^0(cos theta)
//   m > 0: sqrt(2) N_l^m P_l^m(cos theta) cos(m phi)

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "tractfilter/errors.hpp"
#include "tractfilter/volume.hpp"

namespace tractfilter {

inline int sh_coefficient_count(int lmax) {
  if (lmax < 0 || lmax % 2 != 0) throw InvalidInput("lmax must be a non-negative even integer");
  return (lmax / 2 + 1) * (lmax + 1);
}

inline int sh_index(int l, int m) { return l * (l + 1) / 2 + m; }

namespace detail {

inline double sh_norm(int l, int m) {
  // (l-m)!/(l+m)! via lgamma keeps this stable for any lmax we care about.
  const double ratio = std::exp(std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0));
  return std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
}

}  // namespace detail

/// Design matrix with one row per direction and sh_coefficient_count(lmax)
/// columns.
inline Eigen::MatrixXd sh_basis(int lmax, std::span<const Vec3> dirs) {
  const int c = sh_coefficient_count(lmax);
  Eigen::MatrixXd B(static_cast<Eigen::Index>(dirs.size()), c);
  for (std::size_t r = 0; r < dirs.size(); ++r) {
    const Vec3& d = dirs[r];
    if (std::abs(d.norm() - 1.0) > 1e-6) throw InvalidInput("SH directions must be unit vectors");
    const double cos_t = std::clamp(d.z(), -1.0, 1.0);
    const double phi = std::atan2(d.y(), d.x());
    for (int l = 0; l <= lmax; l += 2) {
      for (int m = -l; m <= l; ++m) {
        const int am = std::abs(m);
        const double base = detail::sh_norm(l, am) *
                            std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), cos_t);
        double v = base;
        if (m < 0) v = std::numbers::sqrt2 * base * std::sin(am * phi);
        if (m > 0) v = std::numbers::sqrt2 * base * std::cos(am * phi);
        B(static_cast<Eigen::Index>(r), sh_index(l, m)) = v;
      }
    }
  }
  return B;
}

struct GradientScheme {
  std::vector<Vec3> directions;
  std::vector<double> bvalues;

  std::size_t size() const noexcept { return directions.size(); }

  void validate() const {
    if (directions.size() != bvalues.size())
      throw InvalidInput("gradient scheme direction/b-value count mismatch");
    for (std::size_t i = 0; i < directions.size(); ++i)
      if (std::abs(directions[i].norm() - 1.0) > 1e-6)
        throw InvalidInput("gradient direction " + std::to_string(i) + " is not unit-norm");
  }
};

/// Measurement indices for each declared shell, in declared order. A
/// measurement belongs to a shell when |b - shell| <= tolerance.
inline std::vector<std::vector<int>> group_shells(const GradientScheme& scheme, std::span<const double> shells,
                                                  double tolerance = 50.0) {
  scheme.validate();
  std::vector<std::vector<int>> groups(shells.size());
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    bool matched = false;
    for (std::size_t s = 0; s < shells.size(); ++s) {
      if (std::abs(scheme.bvalues[i] - shells[s]) <= tolerance) {
        groups[s].push_back(static_cast<int>(i));
        matched = true;
        break;
      }
    }
    if (!matched)
      throw InvalidInput("measurement " + std::to_string(i) + " has b-value " +
                         std::to_string(scheme.bvalues[i]) + " outside the declared shells");
  }
  return groups;
}

template <typename T>
struct ShFit {
  Volume<T> coefficients;                 // shells * c channels
  std::vector<double> condition_numbers;  // of the normal matrix, per shell
};

/// Condition number of B^T B above which a fit is considered ill-posed.
inline constexpr double kShConditionWarning = 1e8;

/// Per-voxel, per-shell ordinary least squares via the normal equations.
template <typename T>
ShFit<T> fit_sh_per_shell(const Volume<T>& dwi, const GradientScheme& scheme, int lmax,
                          std::span<const double> shells) {
  if (static_cast<std::size_t>(dwi.channels) != scheme.size())
    throw InvalidInput("DWI channel count does not match the gradient scheme");
  const int c = sh_coefficient_count(lmax);
  const auto groups = group_shells(scheme, shells);

  ShFit<T> fit;
  fit.coefficients = Volume<T>(dwi.grid, static_cast<int>(shells.size()) * c);
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const auto& idx = groups[s];
    if (static_cast<int>(idx.size()) < c)
      throw InsufficientDirections("shell b=" + std::to_string(shells[s]) + " has " + std::to_string(idx.size()) +
                                   " directions, needs at least " + std::to_string(c));
    std::vector<Vec3> dirs;
    dirs.reserve(idx.size());
    for (int i : idx) dirs.push_back(scheme.directions[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXd B = sh_basis(lmax, dirs);
    const Eigen::MatrixXd normal = B.transpose() * B;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(normal).eigenvalues();
    fit.condition_numbers.push_back(ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff()
                                                        : std::numeric_limits<double>::infinity());
    const Eigen::MatrixXd solve = normal.ldlt().solve(B.transpose());  // c x |shell|

    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t v = 0; v < dwi.grid.voxel_count(); ++v) {
      const auto sig = dwi.voxel(v);
      for (std::size_t r = 0; r < idx.size(); ++r)
        y[static_cast<Eigen::Index>(r)] = static_cast<double>(sig[static_cast<std::size_t>(idx[r])]);
      const Eigen::VectorXd coef = solve * y;
      T* dst = fit.coefficients.data.data() + v * static_cast<std::size_t>(fit.coefficients.channels) +
               s * static_cast<std::size_t>(c);
      for (int j = 0; j < c; ++j) dst[j] = static_cast<T>(coef[j]);
    }
  }
  return fit;
}

}  // namespace tractfilter
