#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "laf/rng.hpp"
#include "laf/stats.hpp"

namespace laf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Integer rounding where the smaller integer wins an exact .5 tie, matching
// the lexicographic tie rule of the exact closest-point search.
inline double round_half_down(double t) { return std::ceil(t - 0.5); }

enum class LatticeKind { generic, integer_zn, checkerboard_dn, gosset_e8 };

// Full-rank lattice with an exact nearest-neighbor quantizer. Construction
// factorizes the generator once (QR with positive diagonal); closest-point
// queries on generic generators run a depth-first branch-and-bound over the
// triangularized system, while the tagged families use their closed-form
// decoders. Immutable after construction.
class Lattice {
 public:
  static Lattice integer(int n) {
    // second moment of the unit cube is 1/12 per dimension
    return Lattice(Mat::Identity(n, n), LatticeKind::integer_zn, 1.0, 1.0 / 12.0);
  }

  // D_n: integer vectors with even coordinate sum.
  static Lattice checkerboard(int n) {
    if (n < 2) throw std::invalid_argument("checkerboard lattice needs dimension >= 2");
    Mat g = Mat::Zero(n, n);
    g(0, 0) = 1.0;
    g(1, 0) = 1.0;
    for (int i = 1; i < n; ++i) {
      g(i - 1, i) = 1.0;
      g(i, i) = -1.0;
    }
    return Lattice(g, LatticeKind::checkerboard_dn, 1.0, std::nullopt);
  }

  // E8 as D8 together with its half-integer translate.
  static Lattice gosset_e8() {
    Mat g = Mat::Zero(8, 8);
    g(0, 0) = 2.0;
    for (int i = 1; i < 8; ++i) {
      g(i - 1, i) = -1.0;
      g(i, i) = 1.0;
    }
    for (int i = 0; i < 8; ++i) g(i, 7) = 0.5;
    return Lattice(g, LatticeKind::gosset_e8, 1.0, std::nullopt);
  }

  static Lattice from_generator(const Mat& g) {
    return Lattice(g, LatticeKind::generic, 1.0, std::nullopt);
  }

  // c * Lambda; closed-form decoders survive uniform scaling.
  Lattice scaled(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor))
      throw std::invalid_argument("lattice scale factor must be positive and finite");
    std::optional<double> s2;
    if (exact_sigma2_) s2 = *exact_sigma2_ * factor * factor;
    return Lattice(gen_ * factor, kind_, scale_ * factor, s2);
  }

  int dimension() const { return n_; }
  const Mat& generator() const { return gen_; }
  double covolume() const { return covolume_; }
  LatticeKind kind() const { return kind_; }
  double scale() const { return scale_; }
  std::optional<double> exact_second_moment() const { return exact_sigma2_; }

  // Nearest lattice point; exact for all inputs, deterministic on ties.
  Vec quantize(const Vec& x) const {
    check_input(x);
    switch (kind_) {
      case LatticeKind::integer_zn: {
        Vec q(n_);
        for (int i = 0; i < n_; ++i) q(i) = scale_ * round_half_down(x(i) / scale_);
        return q;
      }
      case LatticeKind::checkerboard_dn: {
        return scale_ * quantize_dn(x / scale_);
      }
      case LatticeKind::gosset_e8: {
        const Vec u = x / scale_;
        const Vec half = Vec::Constant(8, 0.5);
        const Vec a = quantize_dn(u);
        const Vec b = quantize_dn(u - half) + half;
        const double da = (u - a).squaredNorm();
        const double db = (u - b).squaredNorm();
        return scale_ * (db < da ? b : a);
      }
      case LatticeKind::generic:
        break;
    }
    return quantize_generic(x);
  }

  Vec reduce_mod(const Vec& x) const { return x - quantize(x); }

  // Integer coordinates of an (exact) lattice point in this basis.
  Vec coefficients(const Vec& lattice_point) const {
    Vec k = gen_inv_ * lattice_point;
    for (int i = 0; i < n_; ++i) k(i) = std::round(k(i));
    const double err = (gen_ * k - lattice_point).norm();
    if (err > 1e-9 * (1.0 + lattice_point.norm()))
      throw std::invalid_argument("vector is not a lattice point");
    return k;
  }

  bool contains(const Vec& x) const {
    if (x.size() != n_ || !x.allFinite()) return false;
    Vec k = gen_inv_ * x;
    for (int i = 0; i < n_; ++i) k(i) = std::round(k(i));
    return (gen_ * k - x).norm() <= 1e-9 * (1.0 + x.norm());
  }

  Vec point(const Vec& coeffs) const { return gen_ * coeffs; }

  // Exactly uniform on the fundamental Voronoi cell: uniform on the centered
  // fundamental parallelepiped (a fundamental region), folded by mod-Lambda.
  Vec sample_voronoi(RngStream& rng) const {
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    Vec r(n_);
    for (int i = 0; i < n_; ++i) r(i) = unif(rng);
    return reduce_mod(gen_ * r);
  }

 private:
  Lattice(Mat gen, LatticeKind kind, double scale, std::optional<double> exact_sigma2)
      : n_(static_cast<int>(gen.rows())),
        gen_(std::move(gen)),
        kind_(kind),
        scale_(scale),
        exact_sigma2_(exact_sigma2) {
    if (n_ < 1 || gen_.cols() != n_) throw std::invalid_argument("generator must be square");
    if (!gen_.allFinite()) throw std::invalid_argument("generator must be finite");
    Eigen::HouseholderQR<Mat> qr(gen_);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    double max_diag = 0.0;
    for (int i = 0; i < n_; ++i) max_diag = std::max(max_diag, std::abs(r(i, i)));
    for (int i = 0; i < n_; ++i) {
      if (std::abs(r(i, i)) <= 1e-12 * std::max(1.0, max_diag))
        throw std::invalid_argument("generator is rank deficient");
      if (r(i, i) < 0.0) {
        r.row(i) *= -1.0;
        q.col(i) *= -1.0;
      }
    }
    r_ = r;
    qt_ = q.transpose();
    covolume_ = 1.0;
    for (int i = 0; i < n_; ++i) covolume_ *= r_(i, i);
    gen_inv_ = gen_.inverse();
  }

  void check_input(const Vec& x) const {
    if (x.size() != n_) throw std::invalid_argument("dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("non-finite input to lattice quantizer");
  }

  // Conway-Sloane D_n decoder: round everything, then if the coordinate sum
  // is odd re-round the worst coordinate the other way. Ties pick the
  // smallest index and the smaller integer.
  static Vec quantize_dn(const Vec& u) {
    const int n = static_cast<int>(u.size());
    Vec f(n);
    long long sum = 0;
    for (int i = 0; i < n; ++i) {
      f(i) = round_half_down(u(i));
      sum += std::llround(f(i));
    }
    if (sum % 2 != 0) {
      int worst = 0;
      double worst_err = -1.0;
      for (int i = 0; i < n; ++i) {
        const double err = std::abs(u(i) - f(i));
        if (err > worst_err) {
          worst_err = err;
          worst = i;
        }
      }
      f(worst) += (u(worst) - f(worst) > 0.0) ? 1.0 : -1.0;
    }
    return f;
  }

  // Schnorr-Euchner depth-first search on the triangularized generator.
  // Enumerates integer coefficients level by level in nondecreasing distance
  // from the Babai center, pruning against the best radius found so far.
  // Equal-distance candidates resolve to the lexicographically smallest
  // coefficient vector.
  Vec quantize_generic(const Vec& x) const {
    const int n = n_;
    const Vec y = qt_ * x;

    std::vector<double> k(n, 0.0), best_k(n, 0.0);
    std::vector<double> step(n, 0.0);
    std::vector<double> resid(n, 0.0);
    std::vector<double> above(n, 0.0);  // cost accumulated from levels > i

    double best_d2 = std::numeric_limits<double>::infinity();
    bool have_best = false;

    auto enter_level = [&](int i) {
      double s = y(i);
      for (int j = i + 1; j < n; ++j) s -= r_(i, j) * k[j];
      resid[i] = s;
      const double center = s / r_(i, i);
      k[i] = round_half_down(center);
      step[i] = (center - k[i] >= 0.0) ? 1.0 : -1.0;
    };

    auto advance = [&](int i) {
      k[i] += step[i];
      step[i] = -step[i] - (step[i] > 0.0 ? 1.0 : -1.0);
    };

    int i = n - 1;
    enter_level(i);
    while (true) {
      const double e = resid[i] - r_(i, i) * k[i];
      const double total = above[i] + e * e;
      const double tie = have_best ? 1e-9 * (1.0 + best_d2) : 0.0;
      if (!have_best || total <= best_d2 + tie) {
        if (i > 0) {
          above[i - 1] = total;
          --i;
          enter_level(i);
          continue;
        }
        bool take = !have_best || total < best_d2 - tie;
        if (!take && std::abs(total - best_d2) <= tie)
          take = std::lexicographical_compare(k.begin(), k.end(), best_k.begin(), best_k.end());
        if (take) {
          best_d2 = std::min(best_d2, total);
          best_k = k;
          have_best = true;
        }
        advance(i);
      } else {
        ++i;
        if (i == n) break;
        advance(i);
      }
    }

    Vec kb = Eigen::Map<const Vec>(best_k.data(), n);
    return gen_ * kb;
  }

  int n_;
  Mat gen_;
  Mat r_;
  Mat qt_;
  Mat gen_inv_;
  double covolume_ = 0.0;
  LatticeKind kind_;
  double scale_;
  std::optional<double> exact_sigma2_;
};

struct LatticeMetrics {
  double second_moment = 0.0;             // per-dimension power of a Voronoi-uniform draw
  double normalized_second_moment = 0.0;  // dimensionless figure of merit
  std::size_t mc_samples = 0;
  double mc_std_error = 0.0;   // standard error of second_moment
  double nsm_std_error = 0.0;  // same, propagated to the normalized figure
};

inline LatticeMetrics estimate_metrics(const Lattice& lat, std::size_t num_samples,
                                       RngStream& rng) {
  if (num_samples < 1000) throw std::invalid_argument("metrics need at least 1000 samples");
  const double n = static_cast<double>(lat.dimension());
  RunningStat acc;
  for (std::size_t s = 0; s < num_samples; ++s) {
    const Vec v = lat.sample_voronoi(rng);
    acc.add(v.squaredNorm() / n);
  }
  const double vol_pow = std::pow(lat.covolume(), 2.0 / n);
  LatticeMetrics m;
  m.second_moment = acc.mean;
  m.normalized_second_moment = acc.mean / vol_pow;
  m.mc_samples = num_samples;
  m.mc_std_error = acc.std_error();
  m.nsm_std_error = acc.std_error() / vol_pow;
  return m;
}

struct GoodnessReport {
  double error_probability = 0.0;  // Pr[Gaussian noise leaves the Voronoi cell]
  double error_std_error = 0.0;
  double source_coding_gap_nats = 0.0;  // log(2*pi*e*G), 0 iff the cell quantizes like a ball
  LatticeMetrics metrics;
};

inline GoodnessReport measure_channel_goodness(const Lattice& lat, double noise_variance,
                                               std::size_t num_trials, RngStream& rng) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance));
  std::size_t outside = 0;
  Vec z(lat.dimension());
  for (std::size_t t = 0; t < num_trials; ++t) {
    for (int i = 0; i < lat.dimension(); ++i) z(i) = gauss(rng);
    if (lat.quantize(z).squaredNorm() != 0.0) ++outside;
  }
  GoodnessReport rep;
  const double nt = static_cast<double>(num_trials);
  rep.error_probability = static_cast<double>(outside) / nt;
  rep.error_std_error = std::sqrt(rep.error_probability * (1.0 - rep.error_probability) / nt);
  rep.metrics = estimate_metrics(lat, std::max<std::size_t>(num_trials, 1000), rng);
  rep.source_coding_gap_nats =
      std::log(2.0 * std::numbers::pi * std::numbers::e * rep.metrics.normalized_second_moment);
  return rep;
}

}  // namespace laf
