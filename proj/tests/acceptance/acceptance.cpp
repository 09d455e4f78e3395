// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/QR>

#include "fixture.hpp"
#include "gradcheck.hpp"
#include "instances.hpp"
#include "tractfilter/ablation.hpp"
#include "tractfilter/ensemble.hpp"
#include "tractfilter/io/checkpoint.hpp"
#include "tractfilter/sampler.hpp"
#include "tractfilter/sh.hpp"
#include "tractfilter/streamline.hpp"
#include "tractfilter/supervisors.hpp"
#include "tractfilter/volume.hpp"

using namespace tractfilter;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

// ---------------------------------------------------------------------------
// Brute-force voxel oracle: scan every voxel center, keep the closest, ties
// to the first (lowest index) in scan order. A point belongs to the grid iff
// it lies in that voxel's cell.

std::optional<Index3> oracle_voxel(const VolumeGrid& g, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  Index3 idx{0, 0, 0};
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 c = g.origin + Vec3(i, j, k).cwiseProduct(g.spacing);
        const double d = (p - c).squaredNorm();
        if (d < best) {
          best = d;
          idx = {i, j, k};
        }
      }
  const Vec3 c = g.origin + Vec3(idx[0], idx[1], idx[2]).cwiseProduct(g.spacing);
  for (int a = 0; a < 3; ++a) {
    const double off = (p[a] - c[a]) / g.spacing[a];
    if (off < -0.5 || off > 0.5) return std::nullopt;
    if (off == 0.5 && idx[a] == g.dims[a] - 1) return std::nullopt;
  }
  return idx;
}

bool oracle_in_mask(const LabelVolume& m, const Vec3& p) {
  const auto idx = oracle_voxel(m.grid, p);
  return idx && m.at((*idx)[0], (*idx)[1], (*idx)[2]) != 0;
}

LabelVolume box_mask(const VolumeGrid& g, Index3 lo, Index3 hi) {
  LabelVolume m(g, 1);
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) m.at(i, j, k) = 1;
  return m;
}

// ---------------------------------------------------------------------------

Outcome ensemble_table() {
  const auto t0 = Clock::now();
  const std::map<std::string, std::string> table{
      {"pppp", "POS"}, {"pnpp", "POS"}, {"ppnp", "POS"}, {"npnp", "POS"}, {"nnpp", "POS"}, {"nppp", "POS"},
      {"nnnp", "U"},   {"pnnp", "U"},   {"pppn", "NEG"}, {"ppnn", "NEG"}, {"pnpn", "NEG"}, {"pnnn", "NEG"},
      {"nppn", "NEG"}, {"npnn", "NEG"}, {"nnpn", "NEG"}, {"nnnn", "NEG"}};
  const std::set<std::string> borderline{"nnpp", "ppnn", "pppn", "npnn", "nnpn", "nppn"};
  std::map<std::string, int> preimage;
  int wrong = 0, flags = 0;
  for (int i = 0; i < CompositionClass::kCount; ++i) {
    const auto c = compose(CompositionClass::from_index(i).verdict());
    const std::string tri = to_string(map_to_triclass(c));
    ++preimage[tri];
    wrong += tri != table.at(c.code());
    flags += is_borderline(c) != static_cast<bool>(borderline.count(c.code()));
  }
  const double t = seconds_since(t0);
  const bool pass = wrong == 0 && flags == 0 && preimage["POS"] == 6 && preimage["NEG"] == 8 && preimage["U"] == 2 && t < 1.0;
  return {pass, "mismatches " + std::to_string(wrong) + ", borderline mismatches " + std::to_string(flags) + ", preimages " +
                    std::to_string(preimage["POS"]) + "/" + std::to_string(preimage["NEG"]) + "/" +
                    std::to_string(preimage["U"]) + ", " + num(t) + " s"};
}

Outcome mask_rule() {
  const auto t0 = Clock::now();
  VolumeGrid g;
  g.dims = {14, 10, 10};
  g.spacing = Vec3(2.0, 1.5, 1.5);
  g.origin = Vec3(-13, -7, -7);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);

  // Three fixtures: a straight tube, a tube with a notch, random scattered voxels.
  std::vector<BundleMasks> fixtures;
  fixtures.push_back({"tube", box_mask(g, {1, 2, 2}, {12, 7, 7}), box_mask(g, {1, 2, 2}, {3, 7, 7}),
                      box_mask(g, {10, 2, 2}, {12, 7, 7})});
  auto notched = fixtures[0];
  notched.name = "notched";
  for (int k = 4; k <= 5; ++k)
    for (int j = 4; j <= 5; ++j) notched.mask.at(6, j, k) = 0;
  fixtures.push_back(notched);
  BundleMasks scatter{"scatter", LabelVolume(g, 1), LabelVolume(g, 1), LabelVolume(g, 1)};
  for (auto& x : scatter.mask.data) x = u(rng) < 0.9;
  for (auto& x : scatter.end0.data) x = u(rng) < 0.5;
  for (auto& x : scatter.end1.data) x = u(rng) < 0.5;
  fixtures.push_back(scatter);

  int agree = 0, positives = 0, total = 0, swap_ok = 0;
  for (int s = 0; s < 1000; ++s) {
    const auto& b = fixtures[static_cast<std::size_t>(s % 3)];
    // Start near one end, walk towards the other with jitter.
    const double spread = 1.0 + 4.0 * u(rng);
    Vec3 a = Vec3(-10 + 3 * u(rng), 2 * n(rng), 2 * n(rng));
    Vec3 z = Vec3(10 - 3 * u(rng), 2 * n(rng), 2 * n(rng));
    if (u(rng) < 0.5) std::swap(a, z);
    if (u(rng) < 0.2) z = Vec3(26 * u(rng) - 13, 14 * u(rng) - 7, 14 * u(rng) - 7);
    const int count = 2 + static_cast<int>(rng() % 30);
    PointList pts;
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / (count - 1);
      pts.push_back(a + (z - a) * t + Vec3(n(rng), n(rng), n(rng)) * (0.15 * spread * std::sin(std::numbers::pi * t)));
    }
    bool all_in = true;
    for (const auto& p : pts) all_in = all_in && oracle_in_mask(b.mask, p);
    const bool ends = (oracle_in_mask(b.end0, pts.front()) && oracle_in_mask(b.end1, pts.back())) ||
                      (oracle_in_mask(b.end0, pts.back()) && oracle_in_mask(b.end1, pts.front()));
    const bool expected = all_in && ends;
    const std::vector<BundleMasks> one{b};
    const bool got = maskrule_label(pts, one) == BinaryLabel::positive;
    PointList rev(pts.rbegin(), pts.rend());
    swap_ok += (maskrule_label(rev, one) == BinaryLabel::positive) == got;
    agree += got == expected;
    positives += expected;
    ++total;
  }
  const double t = seconds_since(t0);
  const bool pass = agree == total && swap_ok == total && positives > 50 && total - positives > 50 && t < 10.0;
  return {pass, std::to_string(agree) + "/" + std::to_string(total) + " agree with the per-point oracle (" +
                    std::to_string(positives) + " positive), reversal-invariant " + std::to_string(swap_ok) + ", " +
                    num(t) + " s"};
}

Outcome aif_geometry() {
  std::vector<std::string> notes;
  bool pass = true;

  PointList straight;
  for (int i = 0; i < 50; ++i) straight.emplace_back(0.7 * i, -0.2 * i, 0.1 * i);
  const double w0 = winding_angle(straight);
  pass = pass && std::abs(w0) < 1e-9;
  notes.push_back("straight " + num(w0));

  PointList spiral;
  for (int d = 0; d <= 540; ++d) {
    const double a = d * std::numbers::pi / 180.0;
    const double r = 10.0 + 0.5 * a;
    spiral.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
  }
  const double w1 = winding_angle(spiral);
  pass = pass && std::abs(w1 - 540.0) <= 1.0;
  notes.push_back("spiral " + num(w1));

  VolumeGrid big;
  big.dims = {61, 61, 11};
  big.origin = Vec3(-30, -30, -5);
  const AifMasks empty{LabelVolume(big, 1), LabelVolume(big, 1)};
  PointList circle;
  for (int d = 0; d <= 361; ++d) {
    const double a = d * std::numbers::pi / 180.0;
    circle.emplace_back(20 * std::cos(a), 20 * std::sin(a), 0.0);
  }
  const double wc = winding_angle(circle);
  const bool circle_kept = aif_label(circle, empty) == BinaryLabel::positive;
  const bool spiral_flagged = aif_label(spiral, empty) == BinaryLabel::negative;
  pass = pass && circle_kept && spiral_flagged;
  notes.push_back("circle " + num(wc) + (circle_kept ? " kept" : " FLAGGED"));

  // Endpoint rule against the brute-force voxel oracle. Unit spacing and
  // integer origin make half-voxel probes exact ties.
  VolumeGrid g;
  g.dims = {10, 9, 8};
  g.origin = Vec3(-5, -4, -4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelVolume deep(g, 1), vent(g, 1);
  for (auto& x : deep.data) x = u(rng) < 0.25;
  for (auto& x : vent.data) x = u(rng) < 0.1;
  const AifMasks masks{deep, make_ventricle_zone(vent, 1.0)};
  const LabelVolume& zone = masks.ventricle_zone;
  auto probe = [&](bool tie) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const double lo = g.origin[a] - 1.0, hi = g.origin[a] + g.dims[a];
      p[a] = lo + (hi - lo) * u(rng);
    }
    if (tie) {
      const int a = static_cast<int>(rng() % 3);
      p[a] = g.origin[a] + static_cast<double>(static_cast<int>(rng() % static_cast<unsigned>(g.dims[a] + 1))) - 0.5;
    }
    return p;
  };
  int agree = 0, negatives = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a = probe(i % 4 == 0), b = probe(i % 4 == 1);
    auto bad = [&](const Vec3& p) {
      const auto idx = oracle_voxel(g, p);
      return !idx || deep.at((*idx)[0], (*idx)[1], (*idx)[2]) != 0 || zone.at((*idx)[0], (*idx)[1], (*idx)[2]) != 0;
    };
    const bool expected_negative = bad(a) || bad(b);
    const PointList pts{a, b};
    agree += (aif_label(pts, masks) == BinaryLabel::negative) == expected_negative;
    negatives += expected_negative;
  }
  pass = pass && agree == 1000;
  notes.push_back("endpoint probes " + std::to_string(agree) + "/1000 (" + std::to_string(negatives) + " negative)");

  std::string detail;
  for (const auto& s : notes) detail += (detail.empty() ? "" : ", ") + s;
  return {pass, detail};
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Outcome landmarks() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  const int N = 100, K = 20;
  double rigid = 0.0, oracle = 0.0;
  for (int t = 0; t < 100; ++t) {
    PointList pts{Vec3::Zero()};
    const int count = 5 + static_cast<int>(rng() % 40);
    while (static_cast<int>(pts.size()) < count) pts.push_back(pts.back() + Vec3(n(rng), n(rng), n(rng)));
    const Streamline s(pts);
    const Eigen::Matrix3d R = random_rotation(rng);
    const Vec3 shift(n(rng) * 20, n(rng) * 20, n(rng) * 20);
    PointList moved;
    for (const auto& p : pts) moved.push_back(R * p + shift);
    const auto r = truncate_pad(resample_fixed_step(s, 1.0), N);
    const auto rm = truncate_pad(resample_fixed_step(Streamline(moved), 1.0), N);
    const auto d = landmark_descriptor(r, K).values;
    rigid = std::max(rigid, (d - landmark_descriptor(rm, K).values).cwiseAbs().maxCoeff());

    // Oracle: landmarks by direct arc-length interpolation, then all pairwise distances.
    const auto real = r.real();
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < real.size(); ++i) cum.push_back(cum.back() + (real[i] - real[i - 1]).norm());
    for (int k = 0; k < K; ++k) {
      const double target = cum.back() * k / (K - 1);
      std::size_t seg = 1;
      while (seg + 1 < real.size() && cum[seg] < target) ++seg;
      const double len = cum[seg] - cum[seg - 1];
      const double f = len > 0 ? std::clamp((target - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
      const Vec3 lm = real[seg - 1] + f * (real[seg] - real[seg - 1]);
      for (int i = 0; i < N; ++i) {
        const double expected = i < r.valid_len ? (lm - r.points[static_cast<std::size_t>(i)]).norm() : 0.0;
        oracle = std::max(oracle, std::abs(expected - d(k, i)));
      }
    }
  }
  const auto line = truncate_pad(resample_fixed_step(Streamline({Vec3(0, 0, 0), Vec3(99, 0, 0)}), 1.0), N);
  const auto dl = landmark_descriptor(line, 2).values;
  bool closed = dl.rows() == 2;
  for (int i = 0; i < N; ++i) closed = closed && dl(0, i) == static_cast<double>(i) && dl(1, i) == static_cast<double>(99 - i);
  const bool pass = rigid <= 1e-6 && oracle <= 1e-9 && closed;
  return {pass, "rigid max diff " + num(rigid) + ", oracle max diff " + num(oracle) + ", straight closed form " +
                    (closed ? "exact" : "MISMATCH")};
}

std::vector<Vec3> sphere_directions(int n, double twist) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.emplace_back(r * std::cos(golden * i + twist), r * std::sin(golden * i + twist), z);
  }
  return out;
}

Outcome sh_fitting() {
  const int lmax = 6, c = sh_coefficient_count(lmax);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const std::vector<double> shells{1000.0, 3000.0};
  GradientScheme scheme;
  std::vector<std::vector<Vec3>> shell_dirs(2);
  for (int s = 0; s < 2; ++s) {
    shell_dirs[static_cast<std::size_t>(s)] = sphere_directions(60, 0.3 * s);
    for (const auto& d : shell_dirs[static_cast<std::size_t>(s)]) {
      scheme.directions.push_back(d);
      scheme.bvalues.push_back(shells[static_cast<std::size_t>(s)]);
    }
  }
  VolumeGrid g;
  g.dims = {3, 2, 2};
  const int voxels = 12;
  Volume<double> dwi(g, 120);
  std::vector<Eigen::VectorXd> truth;
  // Voxel 0 holds a constant signal on both shells.
  for (int v = 0; v < voxels; ++v)
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXd coef = Eigen::VectorXd::Zero(c);
      if (v == 0) coef[0] = 2.0 + s;
      else
        for (int j = 0; j < c; ++j) coef[j] = n(rng);
      truth.push_back(coef);
      const Eigen::VectorXd sig = sh_basis(lmax, shell_dirs[static_cast<std::size_t>(s)]) * coef;
      for (int i = 0; i < 60; ++i) dwi.data[static_cast<std::size_t>(v) * 120 + static_cast<std::size_t>(s) * 60 + static_cast<std::size_t>(i)] = sig[i];
    }
  const auto fit = fit_sh_per_shell(dwi, scheme, lmax, shells);

  double round_trip = 0.0, constant_leak = 0.0, per_shell = 0.0;
  for (int v = 0; v < voxels; ++v)
    for (int s = 0; s < 2; ++s) {
      const Eigen::MatrixXd B = sh_basis(lmax, shell_dirs[static_cast<std::size_t>(s)]);
      Eigen::VectorXd y(60);
      for (int i = 0; i < 60; ++i) y[i] = dwi.data[static_cast<std::size_t>(v) * 120 + static_cast<std::size_t>(s) * 60 + static_cast<std::size_t>(i)];
      const Eigen::VectorXd independent = B.colPivHouseholderQr().solve(y);
      for (int j = 0; j < c; ++j) {
        const double got = fit.coefficients.data[static_cast<std::size_t>(v) * 56 + static_cast<std::size_t>(s * c + j)];
        round_trip = std::max(round_trip, std::abs(got - truth[static_cast<std::size_t>(v * 2 + s)][j]));
        per_shell = std::max(per_shell, std::abs(got - independent[j]));
        if (v == 0 && j > 0) constant_leak = std::max(constant_leak, std::abs(got));
      }
    }
  const bool pass = fit.coefficients.channels == 56 && round_trip <= 1e-6 && constant_leak <= 1e-6 && per_shell <= 1e-6;
  return {pass, "channels " + std::to_string(fit.coefficients.channels) + ", round trip " + num(round_trip) +
                    ", constant-signal l>0 max " + num(constant_leak) + ", per-shell fit diff " + num(per_shell)};
}

Outcome trilinear() {
  VolumeGrid g;
  g.dims = {7, 6, 5};
  g.spacing = Vec3(1.5, 2.0, 0.5);
  g.origin = Vec3(-3, 1, 2);
  // Integer coefficients on integer voxel indices keep stored values exact.
  auto field = [](const Vec3& x) {
    return 3 + 2 * x[0] - x[1] + 4 * x[2] + x[0] * x[1] - 2 * x[1] * x[2] + x[0] * x[2] + x[0] * x[1] * x[2];
  };
  Volume<float> v(g, 1);
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 7; ++i) v.at(i, j, k) = static_cast<float>(field(Vec3(i, j, k)));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double exact = 0.0, centers = 0.0, corners = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vec3 x(6 * u(rng), 5 * u(rng), 4 * u(rng));
    const Vec3 p = g.origin + x.cwiseProduct(g.spacing);
    const double got = trilinear_sample_scalar(v, p);
    exact = std::max(exact, std::abs(got - field(x)));
    // Eight-corner oracle.
    const int i = std::min(static_cast<int>(x[0]), 5), j = std::min(static_cast<int>(x[1]), 4),
              k = std::min(static_cast<int>(x[2]), 3);
    const double fx = x[0] - i, fy = x[1] - j, fz = x[2] - k;
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
      acc += (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz) * v.at(i + di, j + dj, k + dk);
    }
    corners = std::max(corners, std::abs(got - acc));
  }
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 7; ++i)
        centers = std::max(centers, std::abs(trilinear_sample_scalar(v, g.voxel_center(i, j, k)) - v.at(i, j, k)));
  const bool pass = exact <= 1e-12 && centers == 0.0 && corners <= 1e-12;
  return {pass, "field max diff " + num(exact) + ", voxel centers " + num(centers) + ", 8-corner oracle " + num(corners)};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  auto c = testsupport::make_case(7);
  const auto train = testsupport::check_gradients(c, nn::Mode::train);
  for (int i = 0; i < 3; ++i) c.net.forward(c.inputs, nn::Mode::train);
  const auto eval = testsupport::check_gradients(c, nn::Mode::eval);
  std::string why;
  const bool stop = testsupport::gradient_stop_holds(c, &why);
  const double t = seconds_since(t0);
  const bool pass = train.max_rel_error < 1e-4 && eval.max_rel_error < 1e-4 && stop && t < 120.0;
  return {pass, "train-mode max rel err " + num(train.max_rel_error) + " (" + train.worst + "), eval-mode " +
                    num(eval.max_rel_error) + " (" + eval.worst + "), " + std::to_string(train.checked) +
                    " parameters, gradient stop " + (stop ? "exact" : why) + ", " + num(t) + " s"};
}

Outcome sampler_laws() {
  std::mt19937_64 rng(8);
  DatasetIndex idx;
  const std::vector<std::vector<int>> classes{{0, 3, 5, 15}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {9}};
  const std::vector<int> sizes{3000, 6000, 1000};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<SupervisorVerdict> v;
    // Heavily skewed class counts inside each subject.
    for (int i = 0; i < sizes[s]; ++i) {
      const auto& cs = classes[s];
      const std::size_t pick = std::min<std::size_t>(cs.size() - 1, static_cast<std::size_t>(std::floor(-std::log(1.0 - std::uniform_real_distribution<double>(0, 1)(rng)) * 1.5)));
      v.push_back(CompositionClass::from_index(cs[i < static_cast<int>(cs.size()) ? static_cast<std::size_t>(i) : pick]).verdict());
    }
    idx.subjects.push_back(DatasetIndex::index_subject("s" + std::to_string(s), v));
  }
  const std::size_t n = 100000;
  const auto draws = hierarchical_sample(idx, n, 9);
  std::vector<double> subj(3, 0.0);
  std::vector<std::map<int, double>> cls(3);
  for (const auto& d : draws) {
    subj[static_cast<std::size_t>(d.subject)] += 1;
    cls[static_cast<std::size_t>(d.subject)][d.composition] += 1;
  }
  double subject_dev = 0.0, class_dev = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    subject_dev = std::max(subject_dev, std::abs(subj[s] / n - sizes[s] / 10000.0));
    for (int c : classes[s]) class_dev = std::max(class_dev, std::abs(cls[s][c] / subj[s] - 1.0 / classes[s].size()));
    class_dev = std::max(class_dev, cls[s].size() == classes[s].size() ? 0.0 : 1.0);
  }
  const bool pass = subject_dev <= 0.01 && class_dev <= 0.01;
  return {pass, "subject marginal max dev " + num(subject_dev) + ", class marginal max dev " + num(class_dev)};
}

// ---------------------------------------------------------------------------
// Synthetic end-to-end training, shared by the last two training criteria.

struct EndToEnd {
  testsupport::SynthDataset data;
  DescriptorConfig cfg;
  TrainOptions opt;
  std::vector<const SubjectData*> train, validation, test;
};

EndToEnd& end_to_end() {
  static EndToEnd e = [] {
    EndToEnd x;
    x.data = testsupport::synth_dataset(7, 2000, 2024);
    x.cfg = testsupport::descriptor_config(x.data);
    x.opt.adam.lr = 1e-3;
    x.opt.epochs = 10;
    x.opt.train_samples = 1000;
    x.opt.val_samples = 1000;
    x.opt.batch_size = 32;
    x.opt.seed = 17;
    x.train = x.data.pick({0, 1, 2, 3, 4});
    x.validation = x.data.pick({5});
    x.test = x.data.pick({6});
    return x;
  }();
  return e;
}

std::vector<char> baseline_checkpoint;

Outcome synthetic_training() {
  const auto t0 = Clock::now();
  auto& e = end_to_end();
  bool coarsening = true;
  double best_val = 0.0;
  auto result = train(testsupport::toy_network(e.cfg), e.train, e.validation, e.cfg, e.opt, [&](const EpochRecord& r) {
    coarsening = coarsening && r.validation.accuracy_3 >= r.validation.accuracy_16;
    best_val = std::max(best_val, r.validation.accuracy_3);
  });
  baseline_checkpoint = io::encode_checkpoint(io::snapshot(result.net));
  const auto ev = evaluate(result.net, e.test, e.cfg, {}, 4000, derive_seed(e.opt.seed, {kSeedTestDraw}),
                           derive_seed(e.opt.seed, {kSeedNoise, kSeedTestDraw}), e.opt.batch_size);
  coarsening = coarsening && ev.report.accuracy_3 >= ev.report.accuracy_16;
  const double t = seconds_since(t0);
  const bool pass = ev.report.accuracy_3 >= 0.90 && ev.report.mean_branch_accuracy >= 0.85 && coarsening &&
                    e.opt.epochs <= 50 && t < 600.0;
  return {pass, "held-out accuracy_3 " + num(ev.report.accuracy_3) + ", mean branch accuracy " +
                    num(ev.report.mean_branch_accuracy) + ", accuracy_16 " + num(ev.report.accuracy_16) + ", " +
                    std::to_string(e.opt.epochs) + " epochs, coarsening " + (coarsening ? "holds" : "VIOLATED") + ", " +
                    num(t) + " s incl. data"};
}

Outcome ablation_sanity() {
  const auto t0 = Clock::now();
  auto& e = end_to_end();
  auto empty = e.opt;
  empty.substitute = parse_selection("");
  auto rerun = train(testsupport::toy_network(e.cfg), e.train, e.validation, e.cfg, empty);
  const auto again = io::encode_checkpoint(io::snapshot(rerun.net));
  const bool identical = !baseline_checkpoint.empty() && again == baseline_checkpoint;

  std::vector<AblationConfiguration> configs;
  for (const auto& c : ablation_configurations(AblationMode::single_input))
    if (c.name == "only:xyz" || c.name == "only:t1w") configs.push_back(c);
  const std::vector<SubjectSplitView> views{{e.train, e.validation, e.test}};
  auto opt = e.opt;
  opt.epochs = 5;
  const auto runs = run_ablation(views, testsupport::toy_network(e.cfg), e.cfg, opt, configs, 4000);
  const double xyz = runs.at(0).test.accuracy_3, t1w = runs.at(1).test.accuracy_3;
  const bool pass = identical && runs.at(0).configuration.name == "only:xyz" && xyz > t1w;
  return {pass, "only:xyz accuracy_3 " + num(xyz) + " vs only:t1w " + num(t1w) + ", empty substitution " +
                    (identical ? "bit-identical" : "DIFFERS") + ", " + num(seconds_since(t0)) + " s"};
}

Outcome formats() {
  std::mt19937_64 rng(11);
  int ok = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    ok += testsupport::tractogram_round_trip(rng);
    ok += testsupport::volume_round_trip<float>(rng);
    ok += testsupport::volume_round_trip<std::uint32_t>(rng);
    ok += testsupport::label_round_trip(rng);
    total += 4;
  }
  for (int i = 0; i < 20; ++i) {
    ok += testsupport::checkpoint_round_trip(rng);
    ++total;
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " bit-exact round trips"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"label ensemble table", ensemble_table},
      {"bundle-mask rule", mask_rule},
      {"loop and endpoint geometry", aif_geometry},
      {"landmark descriptor", landmarks},
      {"spherical harmonics fit", sh_fitting},
      {"trilinear sampling", trilinear},
      {"network gradients", gradients},
      {"sampler laws", sampler_laws},
      {"synthetic end-to-end training", synthetic_training},
      {"ablation harness", ablation_sanity},
      {"file format round trips", formats},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
