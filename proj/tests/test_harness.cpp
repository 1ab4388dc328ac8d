#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "laf/experiment.hpp"
#include "oracles.hpp"

using namespace laf;
using Catch::Approx;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

const char* kChainJson = R"({
  "nodes": ["s", "r", "d"],
  "source": "s",
  "destination": "d",
  "edges": [
    {"from": "s", "to": "r", "gain": 2.0},
    {"from": "r", "to": "d", "gain": 3.0}
  ],
  "powers": {"s": 4.0, "r": 9.0}
})";

const char* kDiamondJson = R"({
  "nodes": ["s", "r", "d"],
  "source": "s",
  "destination": "d",
  "edges": [
    {"from": "s", "to": "d", "gain": 1.0},
    {"from": "s", "to": "r", "gain": 2.0},
    {"from": "r", "to": "d", "gain": 3.0}
  ],
  "powers": {"s": 1.0, "r": 1.25}
})";

const char* kMac15Json = R"({
  "nodes": ["s", "r1", "r2", "d"],
  "source": "s",
  "destination": "d",
  "edges": [
    {"from": "s", "to": "r1", "gain": 4.0},
    {"from": "s", "to": "r2", "gain": 4.0},
    {"from": "r1", "to": "d", "gain": 1.0},
    {"from": "r2", "to": "d", "gain": 1.0}
  ],
  "powers": {"s": 1.0, "r1": 3.75, "r2": 3.75}
})";

std::map<std::string, std::map<std::string, std::string>> parse_analyze(const std::string& csv) {
  std::map<std::string, std::map<std::string, std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    rows[line.substr(0, c1)][line.substr(c1 + 1, c2 - c1 - 1)] = line.substr(c2 + 1);
  }
  return rows;
}

}  // namespace

TEST_CASE("network file parsing") {
  SECTION("chain classifies as layered with two hops") {
    const auto net = load_network(write_temp("laf_chain.json", kChainJson));
    REQUIRE(net.is_layered());
    REQUIRE(net.num_hops() == 2);
  }
  SECTION("diamond classifies as non-layered") {
    const auto net = load_network(write_temp("laf_diamond.json", kDiamondJson));
    REQUIRE_FALSE(net.is_layered());
  }
  SECTION("negative gain is rejected with the edge named") {
    const std::string bad = R"({"nodes":["s","d"],"source":"s","destination":"d",
      "edges":[{"from":"s","to":"d","gain":-1}],"powers":{"s":1}})";
    REQUIRE_THROWS_WITH(load_network(write_temp("laf_bad_gain.json", bad)),
                        Catch::Matchers::ContainsSubstring("edges[0]") &&
                            Catch::Matchers::ContainsSubstring("gain"));
  }
  SECTION("unknown top-level fields are rejected") {
    const std::string bad = R"({"nodes":["s","d"],"source":"s","destination":"d",
      "edges":[{"from":"s","to":"d","gain":1}],"powers":{"s":1},"comment":"x"})";
    REQUIRE_THROWS_WITH(load_network(write_temp("laf_extra.json", bad)),
                        Catch::Matchers::ContainsSubstring("unknown field 'comment'"));
  }
  SECTION("missing fields and unknown references") {
    const std::string no_powers = R"({"nodes":["s","d"],"source":"s","destination":"d",
      "edges":[{"from":"s","to":"d","gain":1}]})";
    REQUIRE_THROWS_WITH(load_network(write_temp("laf_nopow.json", no_powers)),
                        Catch::Matchers::ContainsSubstring("missing field 'powers'"));
    const std::string bad_ref = R"({"nodes":["s","d"],"source":"s","destination":"d",
      "edges":[{"from":"s","to":"x","gain":1}],"powers":{"s":1}})";
    REQUIRE_THROWS_WITH(load_network(write_temp("laf_badref.json", bad_ref)),
                        Catch::Matchers::ContainsSubstring("unknown node reference 'x'"));
  }
  SECTION("malformed JSON reports the file") {
    REQUIRE_THROWS_AS(load_network(write_temp("laf_syntax.json", "{nope")), ParseError);
    REQUIRE_THROWS_AS(load_network("/nonexistent/laf.json"), ParseError);
  }
}

TEST_CASE("trial seed derivation") {
  SECTION("pure function of master and index") {
    REQUIRE(derive_trial_seed(42, 7) == derive_trial_seed(42, 7));
  }
  SECTION("no collisions across a million trials") {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(1 << 21);
    for (std::uint64_t i = 0; i < 1000000; ++i)
      REQUIRE(seen.insert(derive_trial_seed(123456789, i)).second);
  }
  SECTION("different masters give unrelated streams") {
    REQUIRE(derive_trial_seed(1, 0) != derive_trial_seed(2, 0));
    RngStream a(derive_trial_seed(1, 0)), b(derive_trial_seed(2, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 20000;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
      const double x = u(a), y = u(b);
      sa += x;
      sb += y;
      sab += x * y;
      saa += x * x;
      sbb += y * y;
    }
    const double corr = (sab / n - sa / n * sb / n) /
                        std::sqrt((saa / n - sa / n * sa / n) * (sbb / n - sb / n * sb / n));
    REQUIRE(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("analyze command") {
  ExperimentConfig cfg;
  cfg.command = Command::analyze;
  cfg.network_file = write_temp("laf_mac15.json", kMac15Json);
  const std::string csv = run_experiment(cfg);
  const auto rows = parse_analyze(csv);

  REQUIRE(csv.rfind("record,name,value\n", 0) == 0);
  REQUIRE(rows.at("network").at("classification") == "layered");
  REQUIRE(std::stod(rows.at("network").at("P_d")) == Approx(15.0));
  REQUIRE(std::stod(rows.at("network").at("C_MAC")) == Approx(2.0));
  const double delta = std::stod(rows.at("network").at("delta"));
  REQUIRE(delta == Approx(1.0 / 16.0));
  REQUIRE(std::stod(rows.at("network").at("R_LAF")) ==
          Approx(rate_laf(15.0, delta, 2)).epsilon(1e-10));
  REQUIRE(rows.at("received_power").count("r1") == 1);
  REQUIRE(rows.at("beta").count("r2") == 1);

  // 12 significant digits in the float formatting
  ExperimentConfig chain_cfg;
  chain_cfg.command = Command::analyze;
  chain_cfg.network_file = write_temp("laf_chain2.json", kChainJson);
  const auto chain_rows = parse_analyze(run_experiment(chain_cfg));
  REQUIRE(chain_rows.at("network").at("h_hat_d") == "4.36564125065");
}

TEST_CASE("analyze emits the ISI view for non-layered networks") {
  ExperimentConfig cfg;
  cfg.command = Command::analyze;
  cfg.network_file = write_temp("laf_diamond2.json", kDiamondJson);
  const auto rows = parse_analyze(run_experiment(cfg));
  REQUIRE(rows.at("network").at("classification") == "non-layered");
  REQUIRE(std::stod(rows.at("tap").at("h_0")) == Approx(1.0));
  REQUIRE(std::stod(rows.at("tap").at("h_1")) == Approx(3.0));
  REQUIRE(std::stod(rows.at("noise_psd").at("min")) == Approx(3.25));
  REQUIRE(rows.at("network").count("C_ISI") == 1);
}

TEST_CASE("layered simulation output is reproducible and worker-independent") {
  ExperimentConfig cfg;
  cfg.command = Command::simulate_layered;
  cfg.network_file = write_temp("laf_chain3.json", kChainJson);
  cfg.family = LatticeFamily::zn;
  cfg.dim = 4;
  cfg.ratio = 2;
  cfg.trials = 400;
  cfg.master_seed = 777;
  cfg.snr_db = {4.0, 8.0};
  cfg.workers = 1;
  const std::string one = run_experiment(cfg);
  cfg.workers = 8;
  const std::string eight = run_experiment(cfg);
  REQUIRE(one == eight);
  REQUIRE(one.rfind("snr_db,equivalent_snr,alpha,trials,errors,error_rate,ci_low,ci_high\n", 0) ==
          0);
  // repeatability with the same seed, and sensitivity to a different one
  REQUIRE(run_experiment(cfg) == one);
  cfg.master_seed = 778;
  REQUIRE(run_experiment(cfg) != one);
}

TEST_CASE("isi simulation output is reproducible and worker-independent") {
  ExperimentConfig cfg;
  cfg.command = Command::simulate_isi;
  cfg.network_file = write_temp("laf_diamond3.json", kDiamondJson);
  cfg.family = LatticeFamily::zn;
  cfg.dim = 4;
  cfg.ratio = 2;
  cfg.trials = 100;
  cfg.master_seed = 31;
  cfg.workers = 1;
  const std::string one = run_experiment(cfg);
  cfg.workers = 8;
  REQUIRE(run_experiment(cfg) == one);
  REQUIRE(one.rfind("snr_db,snr_mmse_dfe,c_isi,alpha,blocks,messages,errors,error_rate,"
                    "ci_low,ci_high\n",
                    0) == 0);
}

TEST_CASE("simulate-isi accepts layered networks too") {
  ExperimentConfig cfg;
  cfg.command = Command::simulate_isi;
  cfg.network_file = write_temp("laf_chain4.json", kChainJson);
  cfg.dim = 2;
  cfg.trials = 50;
  REQUIRE_NOTHROW(run_experiment(cfg));
}

TEST_CASE("lattice-info reports calibrated figures") {
  ExperimentConfig cfg;
  cfg.command = Command::lattice_info;
  cfg.family = LatticeFamily::zn;
  cfg.dim = 8;
  cfg.samples = 50000;
  cfg.noise_var = 0.0;
  const std::string csv = run_experiment(cfg);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  REQUIRE(header ==
          "lattice,dim,samples,covolume,second_moment,second_moment_stderr,nsm,nsm_stderr,"
          "source_gap_nats,noise_var,error_prob,error_prob_stderr");
  std::vector<std::string> cells;
  std::istringstream rowstream(row);
  std::string cell;
  while (std::getline(rowstream, cell, ',')) cells.push_back(cell);
  REQUIRE(cells[0] == "zn");
  REQUIRE(std::stod(cells[4]) == Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("configuration errors") {
  ExperimentConfig cfg;
  cfg.command = Command::simulate_layered;
  cfg.network_file = write_temp("laf_chain5.json", kChainJson);

  SECTION("zero trials") {
    cfg.trials = 0;
    REQUIRE_THROWS_AS(run_experiment(cfg), ConfigError);
  }
  SECTION("ratio below two") {
    cfg.ratio = 1;
    REQUIRE_THROWS_AS(run_experiment(cfg), ConfigError);
  }
  SECTION("e8 needs dimension eight") {
    cfg.family = LatticeFamily::e8;
    cfg.dim = 4;
    cfg.trials = 10;
    REQUIRE_THROWS_AS(run_experiment(cfg), ConfigError);
  }
  SECTION("layered simulation on a non-layered file") {
    cfg.network_file = write_temp("laf_diamond4.json", kDiamondJson);
    cfg.trials = 10;
    REQUIRE_THROWS_WITH(run_experiment(cfg),
                        Catch::Matchers::ContainsSubstring("simulate-isi"));
  }
  SECTION("alpha mode strings") {
    REQUIRE(alpha_from_string("paper") == AlphaMode::propagated_only);
    REQUIRE(alpha_from_string("mmse") == AlphaMode::full_mmse);
    REQUIRE_THROWS_AS(alpha_from_string("other"), ConfigError);
    REQUIRE_THROWS_AS(family_from_string("leech"), ConfigError);
  }
}

TEST_CASE("alpha modes produce the documented scalings") {
  const auto net = load_network(write_temp("laf_chain6.json", kChainJson));
  const auto plan = plan_af(net);
  const auto eq = equivalent_channel(net, plan);
  // propagated-only reckoning ignores the receiver's own unit noise
  const double gamma_paper = eq.gamma_propagated_only();
  REQUIRE(gamma_paper ==
          Approx(eq.received_power /
                 (std::pow(1.0 + eq.delta, eq.num_hops - 1) * eq.propagated_noise_power)));
  const double gamma_full = eq.gamma_full_mmse();
  REQUIRE(gamma_full < gamma_paper);
  REQUIRE(mmse_alpha(gamma_full) < mmse_alpha(gamma_paper));
}
