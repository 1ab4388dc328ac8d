#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "laf/isi.hpp"
#include "laf/nested.hpp"
#include "laf/network_io.hpp"
#include "laf/relay_network.hpp"
#include "laf/rng.hpp"

namespace laf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { analyze, simulate_layered, simulate_isi, lattice_info };
enum class LatticeFamily { zn, dn, e8 };

struct ExperimentConfig {
  Command command = Command::analyze;
  std::string network_file;
  LatticeFamily family = LatticeFamily::zn;
  int dim = 8;
  int ratio = 2;
  std::size_t trials = 10000;
  std::uint64_t master_seed = 1;
  AlphaMode alpha_mode = AlphaMode::full_mmse;
  std::string out_path;  // consumed by the CLI; empty means stdout
  int ff_len = 64;
  int depth = 0;                // interleaver rows for simulate-isi; 0 = auto
  std::vector<double> snr_db;   // sweep points; empty = the network's natural point
  int workers = 1;
  std::size_t samples = 200000;  // lattice-info sample count
  double noise_var = 0.0;        // lattice-info goodness probe; 0 disables
};

inline LatticeFamily family_from_string(const std::string& s) {
  if (s == "zn") return LatticeFamily::zn;
  if (s == "dn") return LatticeFamily::dn;
  if (s == "e8") return LatticeFamily::e8;
  throw ConfigError("unknown lattice family '" + s + "' (expected zn|dn|e8)");
}

inline AlphaMode alpha_from_string(const std::string& s) {
  if (s == "paper") return AlphaMode::propagated_only;
  if (s == "mmse") return AlphaMode::full_mmse;
  throw ConfigError("unknown alpha mode '" + s + "' (expected paper|mmse)");
}

inline Lattice make_lattice(LatticeFamily family, int dim) {
  switch (family) {
    case LatticeFamily::zn:
      return Lattice::integer(dim);
    case LatticeFamily::dn:
      if (dim < 2) throw ConfigError("dn lattice needs --dim >= 2");
      return Lattice::checkerboard(dim);
    case LatticeFamily::e8:
      if (dim != 8) throw ConfigError("e8 lattice requires --dim 8");
      return Lattice::gosset_e8();
  }
  throw ConfigError("unreachable lattice family");
}

namespace detail {

inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

template <typename Fn>
inline void run_indexed(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      try {
        for (std::size_t i = next.fetch_add(1); i < count && !failed.load();
             i = next.fetch_add(1))
          fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials must be at least 1");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.dim < 1) throw ConfigError("dim must be at least 1");
  if (cfg.command == Command::simulate_layered || cfg.command == Command::simulate_isi) {
    if (cfg.ratio < 2) throw ConfigError("ratio must be at least 2");
  }
  if (cfg.command == Command::simulate_isi && cfg.ff_len < 4)
    throw ConfigError("ff-len must be at least 4");
  if (cfg.command != Command::lattice_info && cfg.network_file.empty())
    throw ConfigError("a network file is required");
  if (cfg.command == Command::lattice_info && cfg.samples < 1000)
    throw ConfigError("samples must be at least 1000");
}

inline std::string analyze_csv(const RelayNetwork& net, int ff_len) {
  std::ostringstream out;
  out << "record,name,value\n";
  const AfPlan plan = plan_af(net);
  out << "network,classification," << (net.is_layered() ? "layered" : "non-layered") << "\n";
  out << "network,num_nodes," << net.num_nodes() << "\n";
  out << "network,num_relays," << net.num_relays() << "\n";
  out << "network,delta," << fmt12(plan.delta) << "\n";
  if (net.is_layered()) {
    const EquivalentChannel eq = equivalent_channel(net, plan);
    const PropagatedNoise noise = exact_propagated_noise(net, plan);
    out << "network,num_hops," << net.num_hops() << "\n";
    out << "network,P_d," << fmt12(plan.destination_power) << "\n";
    out << "network,h_hat_d," << fmt12(eq.gain) << "\n";
    out << "network,P_zd_exact," << fmt12(noise.total) << "\n";
    out << "network,P_zd_series_bound," << fmt12(noise.series_bound) << "\n";
    out << "network,P_zd_linear_bound," << fmt12(noise.linear_bound) << "\n";
    out << "network,snr_exact," << fmt12(eq.snr_exact()) << "\n";
    out << "network,snr_lower_bound," << fmt12(eq.snr_lower_bound) << "\n";
    out << "network,C_MAC," << fmt12(mac_cutset(plan.destination_power)) << "\n";
    out << "network,R_LAF," << fmt12(rate_laf(plan.destination_power, plan.delta, net.num_hops()))
        << "\n";
  } else {
    const IsiChannel ch = reduce_to_isi(net, plan, net.power(net.source()));
    const DfeReport rep = isi_capacity(ch, ff_len);
    out << "network,max_delay," << ch.max_delay() << "\n";
    for (int l = 0; l <= ch.max_delay(); ++l)
      out << "tap,h_" << l << "," << fmt12(ch.taps[static_cast<std::size_t>(l)]) << "\n";
    double psd_min = std::numeric_limits<double>::infinity();
    double psd_max = 0.0, psd_sum = 0.0;
    const int grid = 1024;
    for (int k = 0; k <= grid; ++k) {
      const double s = noise_psd_at(ch, std::numbers::pi * k / grid);
      psd_min = std::min(psd_min, s);
      psd_max = std::max(psd_max, s);
      psd_sum += s;
    }
    out << "noise_psd,min," << fmt12(psd_min) << "\n";
    out << "noise_psd,mean," << fmt12(psd_sum / (grid + 1)) << "\n";
    out << "noise_psd,max," << fmt12(psd_max) << "\n";
    out << "network,P_z_total," << fmt12(ch.propagated_noise_power()) << "\n";
    out << "network,C_ISI," << fmt12(rep.c_isi) << "\n";
    out << "network,snr_mmse_dfe," << fmt12(rep.snr_mmse_dfe) << "\n";
  }
  for (int v : net.relays())
    out << "received_power," << net.name(v) << ","
        << fmt12(plan.received_power[static_cast<std::size_t>(v)]) << "\n";
  for (int v : net.relays())
    out << "beta," << net.name(v) << "," << fmt12(plan.beta[static_cast<std::size_t>(v)]) << "\n";
  return out.str();
}

inline std::string simulate_layered_csv(const ExperimentConfig& cfg) {
  const RelayNetwork net = load_network(cfg.network_file);
  if (!net.is_layered())
    throw ConfigError("simulate-layered needs a layered network; use simulate-isi instead");
  const AfPlan plan = plan_af(net);
  const EquivalentChannel eq = equivalent_channel(net, plan);
  const NestedPair pair =
      build_nested_pair(make_lattice(cfg.family, cfg.dim), cfg.ratio, net.power(net.source()));

  struct Point {
    double snr_db;
    double snr;
    double kappa;
  };
  std::vector<Point> points;
  if (cfg.snr_db.empty()) {
    const double snr = eq.snr_exact();
    points.push_back({10.0 * std::log10(snr), snr, 1.0});
  } else {
    for (double db : cfg.snr_db) {
      const double snr = std::pow(10.0, db / 10.0);
      points.push_back({db, snr, std::sqrt(eq.snr_exact() / snr)});
    }
  }

  std::ostringstream out;
  out << "snr_db,equivalent_snr,alpha,trials,errors,error_rate,ci_low,ci_high\n";
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Point& pt = points[p];
    const double gamma = cfg.alpha_mode == AlphaMode::propagated_only
                             ? eq.gamma_propagated_only(pt.kappa)
                             : eq.gamma_full_mmse(pt.kappa);
    const double alpha = mmse_alpha(gamma);
    const std::uint64_t point_seed = derive_trial_seed(cfg.master_seed, p);
    std::vector<unsigned char> failed(cfg.trials, 0);
    run_indexed(cfg.trials, cfg.workers, [&](std::size_t i) {
      RngStream rng = make_stream(derive_trial_seed(point_seed, i));
      std::uniform_int_distribution<std::uint64_t> draw(0, pair.num_messages() - 1);
      const std::uint64_t sent = draw(rng);
      const Codeword cw = encode(pair, sent, rng);
      const Vec y = simulate_af(net, plan, cw.channel_input, rng, true, pt.kappa);
      const std::uint64_t got = decode_message(pair, y / eq.gain, cw.dither, alpha);
      failed[i] = got != sent ? 1 : 0;
    });
    std::size_t errors = 0;
    for (unsigned char f : failed) errors += f;
    const double rate = static_cast<double>(errors) / static_cast<double>(cfg.trials);
    const Interval ci = wilson_interval(errors, cfg.trials);
    out << fmt12(pt.snr_db) << "," << fmt12(pt.snr) << "," << fmt12(alpha) << "," << cfg.trials
        << "," << errors << "," << fmt12(rate) << "," << fmt12(ci.low) << "," << fmt12(ci.high)
        << "\n";
  }
  return out.str();
}

// noise scale that puts the equalized operating point at the target SNR
inline double solve_noise_scale(const IsiChannel& ch, double target_snr) {
  double lo = -14.0, hi = 14.0;  // log space
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double snr = std::pow(2.0, 2.0 * flat_input_rate(ch, std::exp(mid)).c_isi) - 1.0;
    if (snr > target_snr)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

inline std::string simulate_isi_csv(const ExperimentConfig& cfg) {
  const RelayNetwork net = load_network(cfg.network_file);
  const AfPlan plan = plan_af(net);
  const IsiChannel ch = reduce_to_isi(net, plan, net.power(net.source()));
  const NestedPair pair =
      build_nested_pair(make_lattice(cfg.family, cfg.dim), cfg.ratio, net.power(net.source()));

  std::vector<double> kappas;
  std::vector<double> dbs;
  if (cfg.snr_db.empty()) {
    kappas.push_back(1.0);
    dbs.push_back(10.0 * std::log10(isi_capacity(ch, cfg.ff_len).snr_mmse_dfe));
  } else {
    for (double db : cfg.snr_db) {
      kappas.push_back(solve_noise_scale(ch, std::pow(10.0, db / 10.0)));
      dbs.push_back(db);
    }
  }

  std::ostringstream out;
  out << "snr_db,snr_mmse_dfe,c_isi,alpha,blocks,messages,errors,error_rate,ci_low,ci_high\n";
  for (std::size_t p = 0; p < kappas.size(); ++p) {
    const DfeReport rep = isi_capacity(ch, cfg.ff_len, kappas[p]);
    IsiSimOptions opts;
    opts.depth = cfg.depth;
    opts.noise_scale = kappas[p];
    const double alpha = mmse_alpha(std::max(rep.snr_mmse_dfe, 1e-12));
    const std::uint64_t point_seed = derive_trial_seed(cfg.master_seed, p);
    std::vector<detail::IsiBlockResult> results(cfg.trials);
    run_indexed(cfg.trials, cfg.workers, [&](std::size_t i) {
      RngStream rng = make_stream(derive_trial_seed(point_seed, i));
      results[i] = simulate_isi_block(ch, pair, rep, rng, opts);
    });
    std::size_t messages = 0, errors = 0;
    for (const auto& r : results) {
      messages += r.messages;
      errors += r.errors;
    }
    const double rate = static_cast<double>(errors) / static_cast<double>(messages);
    const Interval ci = wilson_interval(errors, messages);
    out << fmt12(dbs[p]) << "," << fmt12(rep.snr_mmse_dfe) << "," << fmt12(rep.c_isi) << ","
        << fmt12(alpha) << "," << cfg.trials << "," << messages << "," << errors << ","
        << fmt12(rate) << "," << fmt12(ci.low) << "," << fmt12(ci.high) << "\n";
  }
  return out.str();
}

inline std::string lattice_info_csv(const ExperimentConfig& cfg) {
  const Lattice lat = make_lattice(cfg.family, cfg.dim);
  RngStream rng = make_stream(derive_trial_seed(cfg.master_seed, 0));
  const LatticeMetrics m = estimate_metrics(lat, cfg.samples, rng);
  std::ostringstream out;
  out << "lattice,dim,samples,covolume,second_moment,second_moment_stderr,nsm,nsm_stderr,"
         "source_gap_nats,noise_var,error_prob,error_prob_stderr\n";
  const char* fam = cfg.family == LatticeFamily::zn   ? "zn"
                    : cfg.family == LatticeFamily::dn ? "dn"
                                                      : "e8";
  out << fam << "," << cfg.dim << "," << cfg.samples << "," << fmt12(lat.covolume()) << ","
      << fmt12(m.second_moment) << "," << fmt12(m.mc_std_error) << ","
      << fmt12(m.normalized_second_moment) << "," << fmt12(m.nsm_std_error) << ","
      << fmt12(std::log(2.0 * std::numbers::pi * std::numbers::e * m.normalized_second_moment));
  if (cfg.noise_var > 0.0) {
    RngStream rng2 = make_stream(derive_trial_seed(cfg.master_seed, 1));
    std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_var));
    std::size_t outside = 0;
    Vec z(lat.dimension());
    for (std::size_t t = 0; t < cfg.samples; ++t) {
      for (int i = 0; i < lat.dimension(); ++i) z(i) = gauss(rng2);
      if (lat.quantize(z).squaredNorm() != 0.0) ++outside;
    }
    const double pe = static_cast<double>(outside) / static_cast<double>(cfg.samples);
    out << "," << fmt12(cfg.noise_var) << "," << fmt12(pe) << ","
        << fmt12(std::sqrt(pe * (1.0 - pe) / static_cast<double>(cfg.samples)));
  } else {
    out << ",,,";
  }
  out << "\n";
  return out.str();
}

}  // namespace detail

// Deterministic function of (config, master seed): per-trial streams come
// from counter-based derivation and results merge by trial index, so the
// output does not depend on the worker count.
inline std::string run_experiment(const ExperimentConfig& cfg) {
  detail::validate(cfg);
  switch (cfg.command) {
    case Command::analyze:
      return detail::analyze_csv(load_network(cfg.network_file), cfg.ff_len);
    case Command::simulate_layered:
      return detail::simulate_layered_csv(cfg);
    case Command::simulate_isi:
      return detail::simulate_isi_csv(cfg);
    case Command::lattice_info:
      return detail::lattice_info_csv(cfg);
  }
  throw ConfigError("unreachable command");
}

}  // namespace laf
