#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "laf/lattice.hpp"
#include "laf/rng.hpp"

namespace laf {

// Self-similar nested pair: coarse = ratio * fine. Rate and coset
// enumeration are exact, and the subset property holds by construction.
struct NestedPair {
  Lattice fine;
  Lattice coarse;
  int nesting_ratio;
  double coding_rate;   // bits per dimension, log2(ratio)
  double source_power;  // per-dimension second moment of the coarse cell

  int dimension() const { return fine.dimension(); }

  std::uint64_t num_messages() const {
    std::uint64_t v = 1;
    const auto m = static_cast<std::uint64_t>(nesting_ratio);
    for (int i = 0; i < dimension(); ++i) {
      if (v > std::numeric_limits<std::uint64_t>::max() / m)
        throw std::overflow_error("message space exceeds 64 bits");
      v *= m;
    }
    return v;
  }
};

// Scales the base so the coarse cell's per-dimension power equals
// source_power: exact when the base carries a closed-form second moment,
// otherwise calibrated by a fixed-seed Monte Carlo pass.
inline NestedPair build_nested_pair(const Lattice& base, int nesting_ratio, double source_power,
                                    std::size_t calibration_samples = 200000) {
  if (nesting_ratio < 2) throw std::invalid_argument("nesting ratio must be at least 2");
  if (!(source_power > 0.0)) throw std::invalid_argument("source power must be positive");
  double sigma2_base;
  if (base.exact_second_moment()) {
    sigma2_base = *base.exact_second_moment();
  } else {
    RngStream cal(mix64(0x6c61746361666eull));
    sigma2_base = estimate_metrics(base, calibration_samples, cal).second_moment;
  }
  const double m = static_cast<double>(nesting_ratio);
  const double c = std::sqrt(source_power / (m * m * sigma2_base));
  Lattice fine = base.scaled(c);
  Lattice coarse = fine.scaled(m);
  return NestedPair{std::move(fine), std::move(coarse), nesting_ratio, std::log2(m),
                    source_power};
}

// Base-ratio digit expansion of the message, mapped through the fine basis
// and folded into the coarse cell. Bijective onto the coset leaders.
inline Vec message_to_coset(const NestedPair& pair, std::uint64_t message) {
  if (message >= pair.num_messages()) throw std::out_of_range("message index out of range");
  const int n = pair.dimension();
  const auto m = static_cast<std::uint64_t>(pair.nesting_ratio);
  Vec digits(n);
  std::uint64_t w = message;
  for (int i = 0; i < n; ++i) {
    digits(i) = static_cast<double>(w % m);
    w /= m;
  }
  return pair.coarse.reduce_mod(pair.fine.point(digits));
}

inline std::uint64_t coset_to_message(const NestedPair& pair, const Vec& coset_leader) {
  const Vec k = pair.fine.coefficients(coset_leader);
  const int n = pair.dimension();
  const auto m = static_cast<long long>(pair.nesting_ratio);
  std::uint64_t w = 0;
  std::uint64_t pow = 1;
  for (int i = 0; i < n; ++i) {
    const long long d = ((std::llround(k(i)) % m) + m) % m;
    w += static_cast<std::uint64_t>(d) * pow;
    if (i + 1 < n) pow *= static_cast<std::uint64_t>(m);
  }
  return w;
}

// Dither sign applied at the encoder. `subtract` sends [t - u] mod coarse,
// which the
// quantize(alpha*y + u) mod coarse receiver inverts exactly on a clean unit
// channel; `add` applies the opposite sign, which does not compose to the
// identity with this receiver and is kept selectable for side-by-side runs.
enum class DitherConvention { subtract, add };

struct Codeword {
  std::uint64_t message = 0;
  Vec coset_leader;
  Vec dither;
  Vec channel_input;
};

inline Codeword encode_with_dither(const NestedPair& pair, std::uint64_t message,
                                   const Vec& dither,
                                   DitherConvention convention = DitherConvention::subtract) {
  Codeword cw;
  cw.message = message;
  cw.coset_leader = message_to_coset(pair, message);
  cw.dither = dither;
  const Vec shifted = convention == DitherConvention::subtract ? (cw.coset_leader - dither).eval()
                                                               : (cw.coset_leader + dither).eval();
  cw.channel_input = pair.coarse.reduce_mod(shifted);
  return cw;
}

inline Codeword encode(const NestedPair& pair, std::uint64_t message, RngStream& rng,
                       DitherConvention convention = DitherConvention::subtract) {
  return encode_with_dither(pair, message, pair.coarse.sample_voronoi(rng), convention);
}

// y_scaled must already be normalized to unit signal gain (the equivalent
// channel divides the raw observation by its gain first).
inline Vec decode_coset(const NestedPair& pair, const Vec& y_scaled, const Vec& dither,
                        double alpha) {
  return pair.coarse.reduce_mod(pair.fine.quantize(alpha * y_scaled + dither));
}

inline std::uint64_t decode_message(const NestedPair& pair, const Vec& y_scaled,
                                    const Vec& dither, double alpha) {
  return coset_to_message(pair, decode_coset(pair, y_scaled, dither, alpha));
}

inline double mmse_alpha(double gamma) {
  if (std::isinf(gamma) && gamma > 0.0) return 1.0;
  if (!(gamma > 0.0)) throw std::domain_error("gamma must be positive");
  return gamma / (1.0 + gamma);
}

}  // namespace laf
