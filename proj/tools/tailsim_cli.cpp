#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "tailsim/config.hpp"
#include "tailsim/experiments.hpp"

using namespace tailsim;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out;
  bool paper_scale = false;
};

// Accepts "0.2,0.3" and ranges "0.20..0.45" (step 0.05) or "0.2..0.4:0.1".
std::vector<double> parse_grid(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& item : items) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(std::stod(item));
      continue;
    }
    const double lo = std::stod(item.substr(0, dots));
    std::string rest = item.substr(dots + 2);
    double step = 0.05;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      step = std::stod(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    const double hi = std::stod(rest);
    if (!(step > 0) || hi < lo) throw std::invalid_argument("bad range '" + item + "'");
    const auto steps = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= steps; ++i) {
      // round to 1e-9 so that grid values print cleanly
      out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    }
  }
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_json_sidecar(const Globals& g, const nlohmann::json& j) {
  if (g.out.empty() || g.out == "-") {
    std::cerr << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(g.out + ".json");
  f << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for Bitcoin, B_k and Tailstorm"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads")->capture_default_str();
  app.add_option("--out", g.out, "Output file (default: stdout)");
  app.add_flag("--paper-scale", g.paper_scale, "Use the full-scale run counts and budgets");

  // run
  auto* run = app.add_subcommand("run", "Run one simulation from a JSON config");
  std::string config_path;
  std::string dump_path;
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--dump", dump_path, "Write the DAG as JSON lines");

  // fairness
  auto* fair = app.add_subcommand("fairness", "Weak/strong miner fairness observations");
  std::string fair_protocol = "bitcoin";
  std::uint32_t fair_k = 1;
  std::vector<double> fair_T{600};
  double fair_delay = 6;
  double fair_weak = 0.01;
  std::uint64_t fair_budget = 0;
  fair->add_option("--protocol", fair_protocol, "bitcoin | tailstorm | tsconst")->capture_default_str();
  fair->add_option("--k", fair_k, "Subblocks per summary")->capture_default_str();
  fair->add_option("--T", fair_T, "Expected summary intervals, seconds")->delimiter(',');
  fair->add_option("--delay", fair_delay, "Message delay, seconds")->capture_default_str();
  fair->add_option("--weak", fair_weak, "Hash share of the weak miner")->capture_default_str();
  fair->add_option("--budget", fair_budget, "PoWs per configuration (default 1e5, 1e6 paper scale)");

  // attack-eval
  auto* atk = app.add_subcommand("attack-eval", "Evaluate attack policies");
  AttackEvalConfig acfg;
  std::vector<std::string> alpha_items{"0.20..0.45"};
  std::vector<std::string> gamma_items{"0.05", "0.5", "0.95"};
  std::size_t runs = 0;
  double stop_blocks = 2048;
  bool force = false;
  atk->add_option("--protocol", acfg.protocols, "bitcoin,bk,tailstorm,tsconst")->delimiter(',');
  atk->add_option("--k", acfg.k)->capture_default_str();
  atk->add_option("--c", acfg.c)->capture_default_str();
  atk->add_option("--alpha", alpha_items, "List or range, e.g. 0.20..0.45")->delimiter(',');
  atk->add_option("--gamma", gamma_items)->delimiter(',');
  atk->add_option("--policy", acfg.policies, "honest,getahead,minordelay,sm1")->delimiter(',');
  atk->add_option("--runs", runs, "Runs per point (default 30, 100 paper scale)");
  atk->add_option("--n", acfg.n, "Node count")->capture_default_str();
  atk->add_option("--stop-blocks", stop_blocks)->capture_default_str();
  atk->add_flag("--force", force, "Aggregate even with fewer than 10 runs");

  // break-even
  auto* be = app.add_subcommand("break-even", "Bisection for the break-even attacker strength");
  BreakEvenConfig bcfg;
  bcfg.point = AttackPoint{"bitcoin", 8, 1.0, 0, 0.05, "sm1", 32, {StopCondition::Kind::Blocks, 2048}};
  be->add_option("--protocol", bcfg.point.protocol)->capture_default_str();
  be->add_option("--k", bcfg.point.k)->capture_default_str();
  be->add_option("--gamma", bcfg.point.gamma)->capture_default_str();
  be->add_option("--policy", bcfg.point.policy)->capture_default_str();
  be->add_option("--n", bcfg.point.n)->capture_default_str();
  be->add_option("--stop-blocks", bcfg.point.stop.value)->capture_default_str();
  be->add_option("--lo", bcfg.lo)->capture_default_str();
  be->add_option("--hi", bcfg.hi)->capture_default_str();
  be->add_option("--batch", bcfg.batch)->capture_default_str();
  be->add_option("--max-batch", bcfg.max_batch)->capture_default_str();
  be->add_option("--tolerance", bcfg.tolerance)->capture_default_str();

  // orphan-table
  auto* ot = app.add_subcommand("orphan-table", "Analytic orphan-rate bounds");
  double tau0 = 5;
  double transmit = 2.56;
  std::vector<double> Ts{75, 150, 300, 600};
  std::vector<std::uint32_t> ks{1, 5, 10, 15};
  ot->add_option("--tau0", tau0, "Latency, seconds")->capture_default_str();
  ot->add_option("--transmit", transmit, "Full-block transmission time, seconds")->capture_default_str();
  ot->add_option("--T", Ts)->delimiter(',');
  ot->add_option("--k", ks)->delimiter(',');

  // episode-server
  auto* es = app.add_subcommand("episode-server", "Line-delimited JSON episode control on stdin/stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open " + config_path);
      const RunRequest req = parse_run_request(nlohmann::json::parse(in));
      std::ofstream dump;
      if (!dump_path.empty()) dump.open(dump_path);
      const nlohmann::json summary = execute_run(req, dump_path.empty() ? nullptr : &dump);
      Output out(g.out);
      out.stream() << summary.dump(2) << "\n";
    } else if (*fair) {
      Output out(g.out);
      nlohmann::json agg = nlohmann::json::array();
      bool header = true;
      for (double T : fair_T) {
        FairnessConfig cfg;
        cfg.protocol = parse_protocol(fair_protocol, fair_k, 1.0);
        cfg.T = T;
        cfg.delay = fair_delay;
        cfg.weak_share = fair_weak;
        cfg.budget_pows = fair_budget ? fair_budget : (g.paper_scale ? 1'000'000 : 100'000);
        cfg.seed = g.seed;
        const auto obs = run_fairness(cfg, g.workers);
        std::ostringstream csv;
        write_fairness_csv(csv, cfg, obs);
        std::string text = csv.str();
        if (!header) text = text.substr(text.find('\n') + 1);
        header = false;
        out.stream() << text;
        std::vector<double> pct;
        for (const auto& o : obs) pct.push_back(o.relative_pct);
        const MeanSe m = mean_se(pct);
        agg.push_back({{"protocol", cfg.protocol.name()},
                       {"k", cfg.protocol.k},
                       {"T", T},
                       {"observations", m.n},
                       {"pows_per_observation", pows_per_observation(cfg.protocol.k, T)},
                       {"relative_pct", {{"mean", m.mean}, {"se", m.se}}}});
      }
      write_json_sidecar(g, agg);
    } else if (*atk) {
      acfg.alphas = parse_grid(alpha_items);
      acfg.gammas = parse_grid(gamma_items);
      acfg.runs = runs ? runs : (g.paper_scale ? 100 : 30);
      acfg.stop = {StopCondition::Kind::Blocks, stop_blocks};
      acfg.seed = g.seed;
      const auto rows = run_attack_eval(acfg, g.workers);
      Output out(g.out);
      write_attack_csv(out.stream(), rows);
      write_json_sidecar(g, to_json(aggregate(rows, 10, force)));
    } else if (*be) {
      bcfg.seed = g.seed;
      if (g.paper_scale) bcfg.batch = std::max<std::size_t>(bcfg.batch, 100);
      const BreakEvenResult r = break_even(bcfg, g.workers);
      nlohmann::json probes = nlohmann::json::array();
      for (const auto& p : r.probes) {
        probes.push_back({{"alpha", p.alpha},
                          {"mean", p.reward.mean},
                          {"se", p.reward.se},
                          {"runs", p.reward.n}});
      }
      Output out(g.out);
      out.stream() << nlohmann::json{{"protocol", bcfg.point.protocol},
                                     {"k", bcfg.point.k},
                                     {"gamma", bcfg.point.gamma},
                                     {"policy", bcfg.point.policy},
                                     {"break_even", r.describe()},
                                     {"bracket", {r.lo, r.hi}},
                                     {"probes", probes}}
                              .dump(2)
                       << "\n";
    } else if (*ot) {
      Output out(g.out);
      write_orphan_csv(out.stream(), orphan_table(tau0, transmit, Ts, ks));
    } else if (*es) {
      EpisodeServer server;
      std::string line;
      while (!server.closed() && std::getline(std::cin, line)) {
        if (line.empty()) continue;
        nlohmann::json reply;
        try {
          reply = server.handle(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
          reply = {{"error", e.what()}};
        }
        std::cout << reply.dump() << std::endl;
      }
    }
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
