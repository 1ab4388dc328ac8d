#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "laf/nested.hpp"
#include "laf/relay_network.hpp"
#include "laf/stats.hpp"

namespace laf {

namespace detail {

using Cplx = std::complex<double>;

// Coefficient-indexed delay polynomial: coeff[k] rides k symbol delays.
using DelayPoly = std::vector<double>;

inline void add_scaled(DelayPoly& a, const DelayPoly& b, double s) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += s * b[i];
}

inline DelayPoly delayed(const DelayPoly& p, int k, double s = 1.0) {
  DelayPoly out(p.size() + static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) out[i + static_cast<std::size_t>(k)] = s * p[i];
  return out;
}

inline Cplx eval_unit_circle(const DelayPoly& p, double omega) {
  Cplx acc(0.0, 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    acc += p[k] * std::exp(Cplx(0.0, -omega * static_cast<double>(k)));
  return acc;
}

// Radix-2 in-place FFT, power-of-two sizes only.
inline void fft(std::vector<Cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const Cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Cplx u = a[i + k];
        const Cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace detail

// Scalar channel with memory: y(t) = sum_l taps[l] x(t-l) + noise, where the
// noise is unit-variance white at the receiver plus one independent white
// source per relay shaped by its transfer FIR.
struct IsiChannel {
  std::vector<double> taps;                         // taps[l] rides delay l
  std::vector<std::vector<double>> noise_transfer;  // per relay noise FIR into the receiver
  std::vector<std::string> noise_source;            // relay names, parallel to noise_transfer
  double input_power = 1.0;

  int max_delay() const { return static_cast<int>(taps.size()) - 1; }

  double propagated_noise_power() const {
    double p = 0.0;
    for (const auto& g : noise_transfer)
      for (double c : g) p += c * c;
    return p;
  }
};

// Delay-indexed transfer DP over the gain DAG. Each relay scales by its
// amplification gain and retransmits one symbol later, so a path's delay is
// its relay count; same-delay path gains add. One noise FIR is accumulated
// per relay by running the same DP from that relay's output port.
inline IsiChannel reduce_to_isi(const RelayNetwork& net, const AfPlan& plan,
                                double source_power) {
  if (!(source_power > 0.0)) throw std::invalid_argument("source power must be positive");
  IsiChannel ch;
  ch.input_power = source_power;

  const int n = net.num_nodes();
  // transfer from a node's transmit port to the destination's receive port
  std::vector<detail::DelayPoly> to_dest(static_cast<std::size_t>(n));
  to_dest[static_cast<std::size_t>(net.destination())] = {1.0};
  const auto& topo = net.topo_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const int v = *it;
    if (v == net.destination()) continue;
    detail::DelayPoly acc;
    for (int e : net.out_edges(v)) {
      const auto& edge = net.edges()[static_cast<std::size_t>(e)];
      const int w = edge.to;
      if (w == net.destination()) {
        detail::add_scaled(acc, {edge.gain}, 1.0);
      } else {
        // downstream relay: beta scaling plus one symbol of retransmit delay
        detail::add_scaled(
            acc,
            detail::delayed(to_dest[static_cast<std::size_t>(w)], 1,
                            plan.beta[static_cast<std::size_t>(w)] * edge.gain),
            1.0);
      }
    }
    to_dest[static_cast<std::size_t>(v)] = std::move(acc);
  }

  ch.taps = to_dest[static_cast<std::size_t>(net.source())];
  if (ch.taps.empty()) ch.taps = {0.0};
  for (int r : net.relays()) {
    // receive noise at r goes out beta-scaled and one symbol late
    detail::DelayPoly g = detail::delayed(to_dest[static_cast<std::size_t>(r)], 1,
                                          plan.beta[static_cast<std::size_t>(r)]);
    ch.noise_transfer.push_back(std::move(g));
    ch.noise_source.push_back(net.name(r));
  }
  return ch;
}

// S_z(omega) = noise_scale^2 * (1 + sum_j |g_j(e^{-i omega})|^2).
inline double noise_psd_at(const IsiChannel& ch, double omega, double noise_scale = 1.0) {
  double s = 1.0;
  for (const auto& g : ch.noise_transfer) s += std::norm(detail::eval_unit_circle(g, omega));
  return noise_scale * noise_scale * s;
}

inline std::vector<double> noise_psd(const IsiChannel& ch, const std::vector<double>& omega,
                                     double noise_scale = 1.0) {
  std::vector<double> out;
  out.reserve(omega.size());
  for (double w : omega) out.push_back(noise_psd_at(ch, w, noise_scale));
  return out;
}

// Equalizer design and the rate it supports.
struct DfeReport {
  double snr_mmse_dfe = 0.0;  // unbiased
  double c_isi = 0.0;         // bits per channel use
  std::vector<double> feedforward_taps;  // two-sided FIR; tap i applies lag (i - feedforward_lead)
  int feedforward_lead = 0;              // samples of lookahead
  std::vector<double> postcursor_taps;   // overall response at lags >= 1 after the feedforward FIR
  double quadrature_error = 0.0;         // last step-halving delta of the rate integral
  double factorization_snr = 0.0;        // cross-check from the cepstral route
  double residual_precursor_power = 0.0; // response energy at negative lags times input power
};

struct RateQuadrature {
  double c_isi = 0.0;
  double error = 0.0;  // last step-halving delta
};

// Flat-input rate by adaptive trapezoid quadrature of
// (1/2) log2(1 + P |H|^2 / S_z) over [0, pi] (the integrand is even).
// Smooth periodic integrand, so the refinement converges fast and the last
// delta is an honest error estimate.
inline RateQuadrature flat_input_rate(const IsiChannel& ch, double noise_scale = 1.0) {
  RateQuadrature out;
  double tap_energy = 0.0;
  for (double h : ch.taps) tap_energy += h * h;
  if (tap_energy == 0.0) return out;

  const double ps = ch.input_power;
  auto integrand = [&](double omega) {
    const double h2 = std::norm(detail::eval_unit_circle(ch.taps, omega));
    return 0.5 * std::log2(1.0 + ps * h2 / noise_psd_at(ch, omega, noise_scale));
  };
  const double pi = std::numbers::pi;
  int panels = 64;
  double sum = 0.5 * (integrand(0.0) + integrand(pi));
  for (int k = 1; k < panels; ++k) sum += integrand(pi * k / panels);
  double c_prev = sum / panels;  // (1/pi) * h * sum with h = pi/panels
  double c_curr = c_prev;
  double delta = std::numeric_limits<double>::infinity();
  while (panels < (1 << 20)) {
    for (int k = 0; k < panels; ++k) sum += integrand(pi * (2 * k + 1) / (2 * panels));
    panels *= 2;
    c_curr = sum / panels;
    delta = std::abs(c_curr - c_prev);
    c_prev = c_curr;
    if (delta < 1e-11) break;
  }
  out.c_isi = c_curr;
  out.error = delta;
  return out;
}

// Rate plus the matching unbiased equalizer: cepstral minimum-phase
// factorization of R = 1 + P|H|^2/S_z gives the monic postcursor factor, and
// the feedforward FIR is the error-whitened linear estimator scaled to unit
// current-symbol gain. The FIR truncation residual is measured and reported,
// never folded into the advertised SNR.
inline DfeReport isi_capacity(const IsiChannel& ch, int fir_len = 64, double noise_scale = 1.0) {
  if (fir_len < 4) throw std::invalid_argument("feedforward length must be at least 4");
  DfeReport rep;
  double tap_energy = 0.0;
  for (double h : ch.taps) tap_energy += h * h;
  if (tap_energy == 0.0) return rep;

  const double ps = ch.input_power;
  const double pi = std::numbers::pi;
  const RateQuadrature rate = flat_input_rate(ch, noise_scale);
  rep.c_isi = rate.c_isi;
  rep.quadrature_error = rate.error;
  rep.snr_mmse_dfe = std::pow(2.0, 2.0 * rate.c_isi) - 1.0;

  // spectral grid
  std::size_t nfft = 4096;
  while (nfft < static_cast<std::size_t>(8 * fir_len)) nfft *= 2;
  std::vector<detail::Cplx> h_grid(nfft), r_grid(nfft), lnr(nfft);
  std::vector<double> s_grid(nfft);
  for (std::size_t k = 0; k < nfft; ++k) {
    const double omega = 2.0 * pi * static_cast<double>(k) / static_cast<double>(nfft);
    h_grid[k] = detail::eval_unit_circle(ch.taps, omega);
    s_grid[k] = noise_psd_at(ch, omega, noise_scale);
    const double r = 1.0 + ps * std::norm(h_grid[k]) / s_grid[k];
    r_grid[k] = r;
    lnr[k] = std::log(r);
  }

  // real cepstrum; lag 0 carries log of the factorization gain, positive
  // lags the monic minimum-phase factor
  std::vector<detail::Cplx> cep = lnr;
  detail::fft(cep, true);
  const double gamma0 = std::exp(cep[0].real());
  rep.factorization_snr = gamma0 - 1.0;
  std::vector<detail::Cplx> lng(nfft, detail::Cplx(0.0, 0.0));
  for (std::size_t m = 1; m < nfft / 2; ++m) lng[m] = cep[m].real();
  lng[nfft / 2] = 0.5 * cep[nfft / 2].real();
  detail::fft(lng, false);
  std::vector<detail::Cplx> g_grid(nfft);
  for (std::size_t k = 0; k < nfft; ++k) g_grid[k] = std::exp(lng[k]);

  // unbiased feedforward: error-whitening factor times the linear estimator,
  // rescaled so the current symbol passes with unit gain
  const double snr_fac = std::max(gamma0 - 1.0, 1e-300);
  std::vector<detail::Cplx> w_grid(nfft);
  for (std::size_t k = 0; k < nfft; ++k) {
    const detail::Cplx est = ps * std::conj(h_grid[k]) / (ps * std::norm(h_grid[k]) + s_grid[k]);
    w_grid[k] = (gamma0 / snr_fac) * g_grid[k] * est;
  }
  std::vector<detail::Cplx> w_time = w_grid;
  detail::fft(w_time, true);

  const int lead = fir_len / 2;
  rep.feedforward_lead = lead;
  rep.feedforward_taps.assign(static_cast<std::size_t>(fir_len), 0.0);
  for (int i = 0; i < fir_len; ++i) {
    const int lag = i - lead;
    const std::size_t idx = static_cast<std::size_t>((lag % static_cast<int>(nfft) +
                                                      static_cast<int>(nfft)) %
                                                     static_cast<int>(nfft));
    rep.feedforward_taps[static_cast<std::size_t>(i)] = w_time[idx].real();
  }

  // overall response of the truncated FIR through the channel
  const int resp_lo = -lead;
  const int resp_hi = (fir_len - 1 - lead) + ch.max_delay();
  std::vector<double> resp(static_cast<std::size_t>(resp_hi - resp_lo + 1), 0.0);
  for (int i = 0; i < fir_len; ++i)
    for (int l = 0; l <= ch.max_delay(); ++l)
      resp[static_cast<std::size_t>((i - lead) + l - resp_lo)] +=
          rep.feedforward_taps[static_cast<std::size_t>(i)] * ch.taps[static_cast<std::size_t>(l)];
  const double current = resp[static_cast<std::size_t>(-resp_lo)];
  if (std::abs(current) < 1e-12) throw std::runtime_error("degenerate feedforward response");
  for (auto& w : rep.feedforward_taps) w /= current;
  for (auto& f : resp) f /= current;

  rep.postcursor_taps.assign(resp.begin() + (-resp_lo) + 1, resp.end());
  double pre = 0.0;
  for (int lag = resp_lo; lag < 0; ++lag) {
    const double f = resp[static_cast<std::size_t>(lag - resp_lo)];
    pre += f * f;
  }
  rep.residual_precursor_power = pre * ps;
  return rep;
}

// x = [t - u - alpha * s] mod coarse: the known post-cursor contribution is
// pre-subtracted inside the modulo, so the receiver runs the plain
// quantize(alpha * r + u) mod coarse rule with no interference knowledge.
inline Codeword precode_with_dither(const NestedPair& pair, std::uint64_t message,
                                    const Vec& postcursor, double alpha, const Vec& dither) {
  Codeword cw;
  cw.message = message;
  cw.coset_leader = message_to_coset(pair, message);
  cw.dither = dither;
  cw.channel_input = pair.coarse.reduce_mod(cw.coset_leader - dither - alpha * postcursor);
  return cw;
}

inline Codeword precode_dirty_paper(const NestedPair& pair, std::uint64_t message,
                                    const Vec& postcursor, double alpha, RngStream& rng) {
  return precode_with_dither(pair, message, postcursor, alpha, pair.coarse.sample_voronoi(rng));
}

// Row-major encoding order, column-major transmission order. rows must
// exceed the channel memory so every in-column interferer is an earlier row.
class Interleaver {
 public:
  Interleaver(int rows, int cols, int memory) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("interleaver needs positive extent");
    if (memory < 0) throw std::invalid_argument("negative channel memory");
    if (rows <= memory)
      throw std::invalid_argument("interleaver depth " + std::to_string(rows) +
                                  " does not exceed channel memory " + std::to_string(memory));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int time_of(int row, int col) const { return col * rows_ + row; }
  std::pair<int, int> position_of(int time) const { return {time % rows_, time / rows_}; }

  std::vector<double> interleave(const Mat& block) const {
    if (block.rows() != rows_ || block.cols() != cols_)
      throw std::invalid_argument("block shape mismatch");
    std::vector<double> stream(static_cast<std::size_t>(rows_ * cols_), 0.0);
    for (int c = 0; c < cols_; ++c)
      for (int r = 0; r < rows_; ++r)
        stream[static_cast<std::size_t>(time_of(r, c))] = block(r, c);
    return stream;
  }

  Mat deinterleave(const std::vector<double>& stream) const {
    if (stream.size() != static_cast<std::size_t>(rows_ * cols_))
      throw std::invalid_argument("stream length mismatch");
    Mat block(rows_, cols_);
    for (int c = 0; c < cols_; ++c)
      for (int r = 0; r < rows_; ++r) block(r, c) = stream[static_cast<std::size_t>(time_of(r, c))];
    return block;
  }

 private:
  int rows_;
  int cols_;
};

struct LinkStats {
  std::size_t blocks = 0;
  std::size_t messages = 0;
  std::size_t message_errors = 0;
  double error_rate = 0.0;
  double ci_low = 0.0;  // 95% Wilson
  double ci_high = 0.0;
  double alpha = 0.0;
  double snr = 0.0;
};

struct IsiSimOptions {
  int depth = 0;  // interleaver rows; 0 picks channel memory + 1
  std::optional<double> alpha_override;
  double noise_scale = 1.0;
  bool noise_on = true;
};

namespace detail {

struct IsiBlockResult {
  std::size_t messages = 0;
  std::size_t errors = 0;
};

// One interleaver block through the full chain. The transmit stream inserts
// `memory` flush zeros between columns, so at encode time every post-cursor
// interferer of row j is either a guard or a row below j; that keeps
// row-major encoding strictly causal for any coarse lattice.
inline IsiBlockResult simulate_isi_block(const IsiChannel& ch, const NestedPair& pair,
                                         const DfeReport& dfe, RngStream& rng,
                                         const IsiSimOptions& opts) {
  const int memory = ch.max_delay();
  const int rows = opts.depth > 0 ? opts.depth : memory + 1;
  const int cols = pair.dimension();
  Interleaver il(rows, cols, memory);

  const double alpha =
      opts.alpha_override ? *opts.alpha_override : mmse_alpha(std::max(dfe.snr_mmse_dfe, 1e-12));

  const int slot = rows + memory;  // rows of one column plus flush guards
  const int stream_len = cols * slot;
  auto time_of = [&](int row, int col) { return col * slot + row; };

  // post-cursor taps the precoder can cancel: lags 1..memory of the
  // equalized response (deeper truncation tails stay as reported residual)
  std::vector<double> post(static_cast<std::size_t>(memory), 0.0);
  for (int l = 1; l <= memory; ++l)
    if (static_cast<std::size_t>(l - 1) < dfe.postcursor_taps.size())
      post[static_cast<std::size_t>(l - 1)] = dfe.postcursor_taps[static_cast<std::size_t>(l - 1)];

  std::vector<std::uint64_t> sent(static_cast<std::size_t>(rows));
  std::vector<Vec> dithers(static_cast<std::size_t>(rows));
  std::vector<double> x(static_cast<std::size_t>(stream_len), 0.0);
  std::uniform_int_distribution<std::uint64_t> message_draw(0, pair.num_messages() - 1);

  for (int r = 0; r < rows; ++r) {
    sent[static_cast<std::size_t>(r)] = message_draw(rng);
    dithers[static_cast<std::size_t>(r)] = pair.coarse.sample_voronoi(rng);
    Vec s = Vec::Zero(cols);
    for (int c = 0; c < cols; ++c) {
      const int t = time_of(r, c);
      for (int l = 1; l <= memory; ++l)
        if (t - l >= 0) s(c) += post[static_cast<std::size_t>(l - 1)] * x[static_cast<std::size_t>(t - l)];
    }
    const Codeword cw = precode_with_dither(pair, sent[static_cast<std::size_t>(r)], s, alpha,
                                            dithers[static_cast<std::size_t>(r)]);
    for (int c = 0; c < cols; ++c)
      x[static_cast<std::size_t>(time_of(r, c))] = cw.channel_input(c);
  }

  // channel, with enough lookahead for the feedforward filter
  const int lead = dfe.feedforward_lead;
  const int y_len = stream_len + lead;
  std::vector<double> y(static_cast<std::size_t>(y_len), 0.0);
  for (int t = 0; t < y_len; ++t) {
    double acc = 0.0;
    for (int l = 0; l <= memory; ++l)
      if (t - l >= 0 && t - l < stream_len)
        acc += ch.taps[static_cast<std::size_t>(l)] * x[static_cast<std::size_t>(t - l)];
    y[static_cast<std::size_t>(t)] = acc;
  }
  if (opts.noise_on) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < y_len; ++t) y[static_cast<std::size_t>(t)] += opts.noise_scale * gauss(rng);
    for (const auto& g : ch.noise_transfer) {
      const int glen = static_cast<int>(g.size());
      std::vector<double> zeta(static_cast<std::size_t>(y_len + glen), 0.0);
      for (auto& z : zeta) z = gauss(rng);
      for (int t = 0; t < y_len; ++t) {
        double acc = 0.0;
        for (int l = 0; l < glen; ++l) acc += g[static_cast<std::size_t>(l)] * zeta[static_cast<std::size_t>(t - l + glen)];
        y[static_cast<std::size_t>(t)] += opts.noise_scale * acc;
      }
    }
  }

  // feedforward FIR (two-sided; offline processing makes the lookahead free)
  std::vector<double> r_eq(static_cast<std::size_t>(stream_len), 0.0);
  const int fir_len = static_cast<int>(dfe.feedforward_taps.size());
  for (int t = 0; t < stream_len; ++t) {
    double acc = 0.0;
    for (int i = 0; i < fir_len; ++i) {
      const int lag = i - lead;
      const int src = t - lag;
      if (src >= 0 && src < y_len) acc += dfe.feedforward_taps[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(src)];
    }
    r_eq[static_cast<std::size_t>(t)] = acc;
  }

  IsiBlockResult res;
  res.messages = static_cast<std::size_t>(rows);
  for (int r = 0; r < rows; ++r) {
    Vec obs(cols);
    for (int c = 0; c < cols; ++c) obs(c) = r_eq[static_cast<std::size_t>(time_of(r, c))];
    const std::uint64_t got =
        decode_message(pair, obs, dithers[static_cast<std::size_t>(r)], alpha);
    if (got != sent[static_cast<std::size_t>(r)]) ++res.errors;
  }
  return res;
}

}  // namespace detail

// Full chain: interleaved dirty-paper encoding, ISI channel with colored
// noise, feedforward equalization, lattice decoding.
inline LinkStats simulate_isi_link(const IsiChannel& ch, const NestedPair& pair,
                                   const DfeReport& dfe, std::size_t num_blocks, RngStream& rng,
                                   const IsiSimOptions& opts = {}) {
  if (num_blocks == 0) throw std::invalid_argument("need at least one block");
  LinkStats stats;
  stats.alpha = opts.alpha_override ? *opts.alpha_override
                                    : mmse_alpha(std::max(dfe.snr_mmse_dfe, 1e-12));
  stats.snr = dfe.snr_mmse_dfe;
  for (std::size_t b = 0; b < num_blocks; ++b) {
    const auto res = detail::simulate_isi_block(ch, pair, dfe, rng, opts);
    stats.messages += res.messages;
    stats.message_errors += res.errors;
  }
  stats.blocks = num_blocks;
  stats.error_rate =
      static_cast<double>(stats.message_errors) / static_cast<double>(stats.messages);
  const Interval ci = wilson_interval(stats.message_errors, stats.messages);
  stats.ci_low = ci.low;
  stats.ci_high = ci.high;
  return stats;
}

}  // namespace laf
