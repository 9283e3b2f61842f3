#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "cplan/bsca.hpp"
#include "cplan/covert.hpp"
#include "cplan/errors.hpp"
#include "cplan/scenario.hpp"

#ifndef CPLAN_VERSION
#define CPLAN_VERSION "0.0.0"
#endif

using namespace cplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 outputs written but a post-check failed,
// 2 error (JSON on stdout).
constexpr int kCheckFailed = 1;
constexpr int kError = 2;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int worker_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("COVERT_PLANNER_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap < 1) throw std::invalid_argument("");
      n = std::min(n, cap);
    } catch (const std::exception&) {
      throw ParameterError("COVERT_PLANNER_THREADS must be a positive integer");
    }
  }
  return n;
}

json error_json(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

json error_json(const PlannerError& e) {
  json j = error_json(e.kind(), e.what());
  if (auto* s = dynamic_cast<const SchemaError*>(&e)) j["error"]["path"] = s->path();
  if (auto* c = dynamic_cast<const ConstraintError*>(&e)) j["error"]["name"] = c->name();
  if (auto* i = dynamic_cast<const InfeasibleError*>(&e)) j["error"]["binding"] = i->binding();
  return j;
}

struct Loaded {
  Scenario scenario;
  std::string text;
};

Loaded load(const std::string& path, std::optional<std::uint64_t> seed) {
  Loaded l;
  l.text = read_file(path);
  l.scenario = load_scenario(l.text);
  if (seed && l.scenario.placement) {
    l.scenario.placement->seed = *seed;
    finalize_scenario(l.scenario);
  }
  return l;
}

Plan load_plan(const Scenario& s, const std::string& dir) {
  return read_plan_csv(s, read_file((fs::path(dir) / "plan.csv").string()),
                       read_file((fs::path(dir) / "phases.csv").string()));
}

// Writes artifacts into a directory and a manifest listing their digests.
class RunDir {
 public:
  RunDir(std::string dir, std::string command) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    manifest_["version"] = CPLAN_VERSION;
    manifest_["command"] = std::move(command);
    manifest_["started_utc"] = utc_now();
    manifest_["artifacts"] = json::array();
  }
  json& manifest() { return manifest_; }

  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    const std::string data = os.str();
    const fs::path path = fs::path(dir_) / name;
    std::ofstream f(path, std::ios::binary);
    f << data;
    f.close();
    if (!f) throw ParameterError("cannot write '" + path.string() + "'");
    manifest_["artifacts"].push_back({{"path", name}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}});
  }

  void finish() {
    manifest_["finished_utc"] = utc_now();
    std::ofstream f(fs::path(dir_) / "manifest.json");
    f << manifest_.dump(2) << '\n';
    if (!f) throw ParameterError("cannot write manifest in '" + dir_ + "'");
  }

 private:
  std::string dir_;
  json manifest_;
};

json settings_json(const OptimizerSettings& o) {
  return {{"eps_outer", o.eps_outer},       {"eps_ucj", o.eps_ucj},
          {"eps_uirs", o.eps_uirs},         {"eps_power", o.eps_power},
          {"max_outer", o.max_outer},       {"max_inner", o.max_inner},
          {"gap_tol", o.gap_tol},           {"feas_tol", o.feas_tol},
          {"penalty_init", o.penalty_init}, {"penalty_growth", o.penalty_growth},
          {"penalty_max", o.penalty_max}};
}

// Digest over everything that determines the run's numerical output.
std::string run_digest(const Scenario& s, const json& options) {
  json j = {{"scenario", serialize_scenario(s)}, {"options", options}, {"version", CPLAN_VERSION}};
  return sha256_hex(j.dump());
}

void write_gains_csv(std::ostream& os, const Gains& g) {
  os << "slot,ue,g_ar,g_j\n" << std::setprecision(17);
  for (int n = 0; n < g.g_ar.rows(); ++n)
    for (int k = 0; k < g.g_ar.cols(); ++k) os << n + 1 << ',' << k + 1 << ',' << g.g_ar(n, k) << ',' << g.g_j(n, k) << '\n';
}

Gains read_gains_csv(const std::string& text, int N, int K) {
  Gains g;
  g.g_ar = Mat::Constant(N, K, std::nan(""));
  g.g_j = Mat::Constant(N, K, std::nan(""));
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int n = 0, k = 0;
    double a = 0, j = 0;
    if (!(ls >> n >> k >> a >> j)) throw ShapeError("gains file: malformed line '" + line + "'");
    if (n < 1 || n > N || k < 1 || k > K) throw ShapeError("gains file: slot/ue out of range");
    g.g_ar(n - 1, k - 1) = a;
    g.g_j(n - 1, k - 1) = j;
  }
  if (g.g_ar.hasNaN() || g.g_j.hasNaN()) throw ShapeError("gains file does not cover every (slot, ue)");
  return g;
}

bool history_monotone(const std::vector<HistoryRow>& h) {
  for (size_t i = 1; i < h.size(); ++i)
    if (h[i].mAEE < h[i - 1].mAEE - 1e-9) return false;
  return true;
}

void write_plan_artifacts(RunDir& out, const Scenario& s, const Plan& p, const CovertnessReport& rep) {
  out.write("plan.csv", [&](std::ostream& os) { write_plan_csv(os, p); });
  out.write("phases.csv", [&](std::ostream& os) { write_phases_csv(os, p); });
  out.write("trajectory_uirs.csv", [&](std::ostream& os) { write_trajectory_csv(os, p.traj_r, s.propulsion); });
  out.write("trajectory_ucj.csv", [&](std::ostream& os) { write_trajectory_csv(os, p.traj_j, s.propulsion); });
  out.write("gains.csv", [&](std::ostream& os) { write_gains_csv(os, compute_gains(s, p)); });
  out.write("report.json", [&](std::ostream& os) { write_report_json(os, rep); });
  out.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
}

json violations_json(const std::vector<Violation>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back({{"constraint", x.constraint}, {"slot", x.slot}, {"magnitude", x.magnitude}});
  return a;
}

// ---- subcommands ----------------------------------------------------------

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_validate(const Common& c, const std::string& plan_dir) {
  Loaded l = load(c.scenario, c.seed);
  const Scenario& s = l.scenario;
  json j = {{"valid", true},       {"slots", s.slots}, {"ues", s.K()},
            {"irs_elements", s.L()}, {"kappa_per_m", s.kappa},
            {"humidity_pct", s.atmosphere.humidity}};
  if (!s.kappa_warning.empty()) j["warnings"] = {s.kappa_warning};
  if (!plan_dir.empty()) {
    CovertnessReport rep = evaluate_mAEE(load_plan(s, plan_dir), s);
    j["plan_violations"] = violations_json(rep.violations);
    j["valid"] = rep.feasible();
  }
  std::cout << j.dump(2) << '\n';
  return j["valid"].get<bool>() ? 0 : kCheckFailed;
}

struct OptimizeArgs {
  std::string mode = "jtcd";
  std::string beamforming = "closed-form";
  bool joint = false;
  bool record_timings = false;
  int bnb_nodes = 16;
};

BscaOptions bsca_options(const OptimizeArgs& a) {
  BscaOptions o;
  std::string m = a.mode;
  std::transform(m.begin(), m.end(), m.begin(), ::toupper);
  o.mode = parse_mode(m);
  o.beamforming = parse_beamforming(a.beamforming);
  o.joint_power_scheduling = a.joint;
  o.bnb_nodes = a.bnb_nodes;
  return o;
}

json options_json(const Common& c, const OptimizeArgs& a, const Scenario& s) {
  return {{"mode", a.mode},
          {"beamforming", a.beamforming},
          {"joint_power_scheduling", a.joint},
          {"bnb_nodes", a.bnb_nodes},
          {"seed", c.seed ? json(*c.seed) : json(nullptr)},
          {"ue_seed", s.placement ? json(s.placement->seed) : json(nullptr)},
          {"optimizer", settings_json(s.optimizer)}};
}

int cmd_optimize(const Common& c, const OptimizeArgs& a) {
  Loaded l = load(c.scenario, c.seed);
  const Scenario& s = l.scenario;
  const BscaOptions opts = bsca_options(a);
  RunDir out(c.out, "optimize");
  const json options = options_json(c, a, s);
  out.manifest()["scenario"] = {{"path", c.scenario}, {"sha256", sha256_hex(l.text)}};
  out.manifest()["options"] = options;
  out.manifest()["run_digest"] = run_digest(s, options);

  BscaResult r = run_bsca(s, opts);
  CovertnessReport rep = evaluate_mAEE(r.plan, s);
  write_plan_artifacts(out, s, r.plan, rep);
  out.write("history.csv", [&](std::ostream& os) { write_history_csv(os, r.history, a.record_timings); });
  out.write("timings.csv", [&](std::ostream& os) { write_timings_csv(os, r.history); });
  out.manifest()["events"] = r.events;
  out.finish();

  const bool monotone = history_monotone(r.history);
  json j = {{"mode", to_string(opts.mode)},
            {"mAEE", rep.mAEE},
            {"mACT", rep.mACT},
            {"APC", rep.APC},
            {"iterations", static_cast<int>(r.history.size()) - 1},
            {"converged", r.converged},
            {"feasible", rep.feasible()},
            {"history_monotone", monotone},
            {"out", c.out}};
  if (!rep.feasible()) j["violations"] = violations_json(rep.violations);
  std::cout << j.dump(2) << '\n';
  return rep.feasible() && monotone ? 0 : kCheckFailed;
}

int cmd_evaluate(const Common& c, const std::string& plan_dir) {
  Loaded l = load(c.scenario, c.seed);
  const Scenario& s = l.scenario;
  Plan p = load_plan(s, plan_dir);
  CovertnessReport rep = evaluate_mAEE(p, s);
  if (!c.out.empty()) {
    RunDir out(c.out, "evaluate");
    out.manifest()["scenario"] = {{"path", c.scenario}, {"sha256", sha256_hex(l.text)}};
    out.manifest()["plan"] = plan_dir;
    out.write("report.json", [&](std::ostream& os) { write_report_json(os, rep); });
    out.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
    out.write("gains.csv", [&](std::ostream& os) { write_gains_csv(os, compute_gains(s, p)); });
    out.finish();
  }
  json j = {{"mAEE", rep.mAEE}, {"mACT", rep.mACT}, {"APC", rep.APC}, {"feasible", rep.feasible()},
            {"violations", violations_json(rep.violations)}};
  std::cout << j.dump(2) << '\n';
  return rep.feasible() ? 0 : kCheckFailed;
}

// Empirical minimum detection error: the better of a threshold inside the
// analytic optimal interval [chi1, chi2] and the two trivial thresholds
// (always or never declare a transmission), each worth an error of 1.
struct EmpiricalZeta {
  double zeta = 1.0;
  double half_width = 0.0;  // 99 % normal-approximation bound
};

EmpiricalZeta empirical_zeta(DetectionContext d, long long trials, std::uint64_t seed, int workers) {
  EmpiricalZeta e;
  if (!(d.p_a * d.g_arm > 0.0)) return e;
  d.threshold = 0.5 * (d.chi1() + d.chi2());
  EmpiricalDetection m = mc_detection_oracle(d, trials, seed, workers);
  const double z = m.p_fa + m.p_md;
  if (z < 1.0) {
    e.zeta = z;
    e.half_width = 2.576 * std::sqrt((m.p_fa * (1 - m.p_fa) + m.p_md * (1 - m.p_md)) / double(trials));
  }
  return e;
}

int cmd_mc_verify(const Common& c, const std::string& plan_dir, long long trials, const std::string& gains_path) {
  Loaded l = load(c.scenario, c.seed);
  const Scenario& s = l.scenario;
  Plan p = load_plan(s, plan_dir);
  const Gains g = compute_gains(s, p);
  const Gains emp = gains_path.empty() ? g : read_gains_csv(read_file(gains_path), s.slots, s.K());
  const int workers = worker_count();
  const std::uint64_t seed = c.seed.value_or(1);
  constexpr double kTol = 0.01;

  std::ostringstream table;
  table << "slot,ue,warden,zeta_analytic,zeta_empirical,ci_low,ci_high,abs_error,pass\n" << std::setprecision(10);
  int failing = 0;
  for (int n = 0; n < s.slots; ++n) {
    const int k = p.scheduled(n);
    // Empty slots have no warden and keep zeta = 1.
    int warden = -1;
    double za = 1.0, ze = 1.0, hw = 0.0, worst = 0.0;
    for (int m = 0; m < s.K(); ++m) {
      if (m == k || k < 0) continue;
      const double a = min_detection_error(p.p_a[n], p.p_j[n], g.g_ar(n, m), g.g_j(n, m)).zeta;
      DetectionContext d;
      d.p_a = p.p_a[n];
      d.p_j_peak = p.p_j[n];
      d.g_arm = emp.g_ar(n, m);
      d.g_jm = emp.g_j(n, m);
      d.noise = s.noise[m];
      const std::uint64_t sub = seed * 1000003ULL + static_cast<std::uint64_t>(n) * 131ULL + m;
      EmpiricalZeta e = empirical_zeta(d, trials, sub, workers);
      const double err = std::abs(a - e.zeta);
      // The table shows the binding warden; the pass flag covers all of them.
      if (warden < 0 || a < za) {
        warden = m;
        za = a;
        ze = e.zeta;
        hw = e.half_width;
      }
      worst = std::max(worst, err);
    }
    const bool pass = worst <= kTol;
    failing += !pass;
    table << n + 1 << ',' << k + 1 << ',' << warden + 1 << ',' << za << ',' << ze << ','
          << std::max(0.0, ze - hw) << ',' << std::min(1.0, ze + hw) << ',' << worst << ',' << (pass ? 1 : 0) << '\n';
  }
  if (!c.out.empty()) {
    RunDir out(c.out, "mc-verify");
    out.manifest()["scenario"] = {{"path", c.scenario}, {"sha256", sha256_hex(l.text)}};
    out.manifest()["plan"] = plan_dir;
    out.manifest()["trials"] = trials;
    out.manifest()["seed"] = seed;
    if (!gains_path.empty()) out.manifest()["gains"] = gains_path;
    out.write("mc_verify.csv", [&](std::ostream& os) { os << table.str(); });
    out.finish();
  } else {
    std::cerr << table.str();
  }
  json j = {{"slots", s.slots}, {"failing_slots", failing}, {"trials", trials}, {"tolerance", kTol},
            {"pass", failing == 0}};
  std::cout << j.dump(2) << '\n';
  return failing == 0 ? 0 : kCheckFailed;
}

// Lx x Ly with Lx the largest divisor of L not above sqrt(L).
std::pair<int, int> irs_shape(int L) {
  int lx = 1;
  for (int d = 1; d * d <= L; ++d)
    if (L % d == 0) lx = d;
  return {lx, L / lx};
}

int cmd_sweep(const Common& c, const OptimizeArgs& a, const std::string& axis, const std::vector<double>& values) {
  Loaded base = load(c.scenario, c.seed);
  const BscaOptions opts = bsca_options(a);
  struct Point {
    double value = 0.0;
    CovertnessReport rep;
    int iterations = 0;
    bool ok = false;
    std::string message;
  };
  std::vector<Point> points(values.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i; (i = next++) < values.size();) {
      Point& pt = points[i];
      pt.value = values[i];
      try {
        Scenario s = base.scenario;
        if (axis == "epsilon") {
          s.epsilon = pt.value;
        } else if (axis == "irs_elements") {
          if (pt.value != std::floor(pt.value) || pt.value < 1) throw ParameterError("irs_elements must be a positive integer");
          std::tie(s.irs.Lx, s.irs.Ly) = irs_shape(static_cast<int>(pt.value));
        } else {
          s.atmosphere.f_c = pt.value;
        }
        finalize_scenario(s);
        BscaResult r = run_bsca(s, opts);
        pt.rep = evaluate_mAEE(r.plan, s);
        pt.iterations = static_cast<int>(r.history.size()) - 1;
        pt.ok = pt.rep.feasible() && history_monotone(r.history);
        if (!pt.ok) pt.message = "post-check failed";
      } catch (const PlannerError& e) {
        pt.message = std::string(e.kind()) + ": " + e.what();
      }
    }
  };
  const int workers = std::min<int>(worker_count(), static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  RunDir out(c.out, "sweep");
  json options = options_json(c, a, base.scenario);
  options["axis"] = axis;
  options["values"] = values;
  out.manifest()["scenario"] = {{"path", c.scenario}, {"sha256", sha256_hex(base.text)}};
  out.manifest()["options"] = options;
  out.manifest()["run_digest"] = run_digest(base.scenario, options);
  int failed = 0;
  out.write("sweep.csv", [&](std::ostream& os) {
    os << "axis,value,mAEE,mACT_bits,APC_watts,iterations,ok,message\n" << std::setprecision(17);
    for (const auto& pt : points) {
      failed += !pt.ok;
      os << axis << ',' << pt.value << ',' << pt.rep.mAEE << ',' << pt.rep.mACT << ',' << pt.rep.APC << ','
         << pt.iterations << ',' << (pt.ok ? 1 : 0) << ",\"" << pt.message << "\"\n";
    }
  });
  out.finish();
  json j = {{"axis", axis}, {"points", values.size()}, {"failed", failed}, {"out", c.out}};
  j["mAEE"] = json::array();
  for (const auto& pt : points) j["mAEE"].push_back(pt.rep.mAEE);
  std::cout << j.dump(2) << '\n';
  return failed == 0 ? 0 : kCheckFailed;
}

int cmd_export_absorption(const Common& c, double f_lo_ghz, double f_hi_ghz, int points, double distance) {
  AtmosphereParams atm;
  std::string digest;
  if (!c.scenario.empty()) {
    Loaded l = load(c.scenario, c.seed);
    atm = l.scenario.atmosphere;
    digest = sha256_hex(l.text);
  }
  if (!(f_lo_ghz > 0 && f_hi_ghz >= f_lo_ghz) || points < 1 || !(distance > 0))
    throw ParameterError("need 0 < f_min <= f_max, points >= 1 and distance > 0");
  auto write = [&](std::ostream& os) { write_absorption_csv(os, atm, f_lo_ghz * 1e9, f_hi_ghz * 1e9, points, distance); };
  if (c.out.empty()) {
    write(std::cout);
    return 0;
  }
  RunDir out(c.out, "export-absorption");
  if (!digest.empty()) out.manifest()["scenario"] = {{"path", c.scenario}, {"sha256", digest}};
  out.manifest()["options"] = {{"f_min_ghz", f_lo_ghz}, {"f_max_ghz", f_hi_ghz}, {"points", points}, {"distance_m", distance}};
  out.write("absorption.csv", write);
  out.finish();
  std::cout << json{{"out", c.out}, {"points", points}}.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covert UAV/IRS mission planner"};
  app.set_version_flag("--version", CPLAN_VERSION);
  app.require_subcommand(1);

  Common c;
  OptimizeArgs oa;
  std::string plan_dir, gains_path, axis;
  std::vector<double> values;
  long long trials = 1000000;
  double f_lo = 275.0, f_hi = 400.0, distance = 100.0;
  int points = 251;

  auto scenario_opt = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("--scenario", c.scenario, "scenario config file");
    if (required) o->required();
    sub->add_option("--seed", c.seed, "UE placement and Monte-Carlo seed");
  };
  auto optimize_opts = [&](CLI::App* sub) {
    sub->add_option("--mode", oa.mode, "jtcd | cd | td | iftr")
        ->check(CLI::IsMember({"jtcd", "cd", "td", "iftr"}, CLI::ignore_case));
    sub->add_option("--beamforming", oa.beamforming, "closed-form | rm-sca")
        ->check(CLI::IsMember({"closed-form", "rm-sca"}));
    sub->add_flag("--joint", oa.joint, "joint power and scheduling block");
    sub->add_option("--bnb-nodes", oa.bnb_nodes, "branch-and-bound node budget for scheduling")
        ->check(CLI::NonNegativeNumber);
  };

  auto* validate = app.add_subcommand("validate", "check a scenario and optionally a plan");
  scenario_opt(validate, true);
  validate->add_option("--plan", plan_dir, "directory with plan.csv and phases.csv");

  auto* optimize = app.add_subcommand("optimize", "run the block-SCA optimizer");
  scenario_opt(optimize, true);
  optimize_opts(optimize);
  optimize->add_option("--out", c.out, "output directory")->required();
  optimize->add_flag("--record-timings", oa.record_timings, "fill block_times_ms in history.csv");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a plan");
  scenario_opt(evaluate, true);
  evaluate->add_option("--plan", plan_dir, "directory with plan.csv and phases.csv")->required();
  evaluate->add_option("--out", c.out, "output directory");

  auto* mc = app.add_subcommand("mc-verify", "Monte-Carlo check of per-slot detection errors");
  scenario_opt(mc, true);
  mc->add_option("--plan", plan_dir, "directory with plan.csv and phases.csv")->required();
  mc->add_option("--trials", trials, "trials per slot and warden")->check(CLI::PositiveNumber);
  mc->add_option("--gains", gains_path, "gains.csv used for the simulated channels");
  mc->add_option("--out", c.out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "optimize over a list of parameter values");
  scenario_opt(sweep, true);
  optimize_opts(sweep);
  sweep->add_option("--sweep-axis", axis, "epsilon | irs_elements | carrier_frequency")
      ->required()
      ->check(CLI::IsMember({"epsilon", "irs_elements", "carrier_frequency"}));
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out", c.out, "output directory")->required();

  auto* absorption = app.add_subcommand("export-absorption", "absorption coefficient curve");
  scenario_opt(absorption, false);
  absorption->add_option("--f-min-ghz", f_lo, "lowest frequency");
  absorption->add_option("--f-max-ghz", f_hi, "highest frequency");
  absorption->add_option("--points", points, "number of frequencies");
  absorption->add_option("--distance", distance, "path length for the loss column (m)");
  absorption->add_option("--out", c.out, "output directory (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << error_json("usage", e.what()).dump(2) << '\n';
    return kError;
  }

  try {
    if (*validate) return cmd_validate(c, plan_dir);
    if (*optimize) return cmd_optimize(c, oa);
    if (*evaluate) return cmd_evaluate(c, plan_dir);
    if (*mc) return cmd_mc_verify(c, plan_dir, trials, gains_path);
    if (*sweep) return cmd_sweep(c, oa, axis, values);
    if (*absorption) return cmd_export_absorption(c, f_lo, f_hi, points, distance);
  } catch (const PlannerError& e) {
    std::cout << error_json(e).dump(2) << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cout << error_json("internal", e.what()).dump(2) << '\n';
    return kError;
  }
  return kError;
}
