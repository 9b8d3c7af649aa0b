#include "fairelicit/cli.hpp"

#include <pthread.h>

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "fairelicit/evaluation.hpp"
#include "fairelicit/http_service.hpp"
#include "fairelicit/rng.hpp"
#include "fairelicit/session.hpp"

extern char** environ;

namespace fairelicit {

namespace fs = std::filesystem;

std::map<std::string, std::string> process_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv = *e;
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

void apply_env_overrides(json& config, const std::map<std::string, std::string>& env) {
  static const std::string prefix = "FAIR_ELICIT_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) continue;
    std::string key = name.substr(prefix.size());
    for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    json* node = &config;
    std::size_t start = 0;
    for (std::size_t sep; (sep = key.find("__", start)) != std::string::npos; start = sep + 2) {
      json& child = (*node)[key.substr(start, sep - start)];
      if (!child.is_object()) child = json::object();
      node = &child;
    }
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;
    }
    (*node)[key.substr(start)] = parsed;
  }
}

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool out_dir_set = false;
  std::optional<int> jobs;
};

json load_config(const Globals& g, const std::map<std::string, std::string>& env) {
  json cfg = json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("", "cannot read config file '" + g.config_path + "'");
    try {
      cfg = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", "config file '" + g.config_path + "' is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("", "config file must hold a JSON object");
  }
  apply_env_overrides(cfg, env);
  if (g.seed) cfg["seed"] = *g.seed;
  if (g.jobs) cfg["jobs"] = *g.jobs;
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

GroupPrevalence prevalence_field(const Fields& f, int k, int m, std::uint64_t seed) {
  if (!f.has("prevalence") || (f.raw("prevalence").is_string() && f.string("prevalence") == "uniform"))
    return GroupPrevalence::uniform(k, m);
  if (f.raw("prevalence").is_string()) {
    if (f.string("prevalence") == "random") return random_prevalence(substream(seed, 2, 0), k, m);
    throw ConfigError(f.path("prevalence"), "expected \"uniform\", \"random\" or a prevalence object");
  }
  const GroupPrevalence p = prevalence_from_json(f.raw("prevalence"), f.path("prevalence"));
  if (p.k() != k || p.m() != m) throw ConfigError(f.path("prevalence"), "dimensions do not match k and m");
  return p;
}

FpmeConfig checked_config(int k, const GroupPrevalence& prev, double eps, double rho, int cycles) {
  if (k < 2) throw ConfigError("k", "needs at least two classes");
  if (prev.m() < 2) throw ConfigError("m", "fairness needs at least two groups");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
  if (!(rho > 0.0)) throw ConfigError("rho", "must be positive");
  if (cycles < 1) throw ConfigError("cycles", "must be at least 1");
  FpmeConfig cfg = experiment_config(k, prev, eps, rho, cycles);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError("rho", e.what());
  }
  return cfg;
}

bool parse_answer(const std::string& raw, std::uint64_t id) {
  std::string s = raw;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  s.erase(0, s.find_first_not_of(" \t"));
  if (s == "1" || s == "true" || s == "left" || s == "l") return true;
  if (s == "0" || s == "false" || s == "right" || s == "r") return false;
  json j;
  try {
    j = json::parse(s);
  } catch (const json::exception&) {
    throw RejectedAnswer("cannot read answer '" + s + "' for query " + std::to_string(id));
  }
  const Fields f(j);
  if (f.uint64("query_id", id) != id) throw RejectedAnswer("answer names a different query than " + std::to_string(id));
  if (!f.has("prefers_left")) throw RejectedAnswer("answer lacks prefers_left");
  return f.boolean("prefers_left", false);
}

// Queries go out as JSON lines; each answer comes back as one line.
class StreamOracle : public Oracle {
 public:
  StreamOracle(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  bool compare(const OracleQuery& q) override {
    const std::uint64_t id = next_++;
    out_ << dump({{"query_id", id}, {"stage", q.stage}, {"stage_label", stage_label(q.stage)},
                  {"left", to_json(q.left)}, {"right", to_json(q.right)}})
         << std::endl;
    std::string line;
    if (!std::getline(in_, line)) throw SessionAborted("input closed before query " + std::to_string(id) + " was answered");
    return parse_answer(line, id);
  }

 private:
  std::istream& in_;
  std::ostream& out_;
  std::uint64_t next_ = 1;
};

json distance_json(const MetricDistance& d) {
  return {{"a_err", d.a_err}, {"b_err", d.b_err}, {"lambda_err", d.lambda_err}};
}

int cmd_elicit(const json& cfg, const Globals& g, CliStreams io) {
  const Fields f(cfg);
  f.only({"k", "m", "epsilon", "rho", "cycles", "seed", "jobs", "prevalence", "oracle", "transcript"});
  const int k = f.integer("k", 2), m = f.integer("m", 2);
  if (k < 2 || k > 10) throw ConfigError("k", "class count must lie in 2..10");
  if (m < 2 || m > 16) throw ConfigError("m", "group count must lie in 2..16 (fairness needs two groups)");
  const std::uint64_t seed = f.uint64("seed", 0);
  const GroupPrevalence prev = prevalence_field(f, k, m, seed);
  const FpmeConfig fc = checked_config(k, prev, f.number("epsilon", 1e-3), f.number("rho", 0.2), f.integer("cycles", 4));
  const bool transcript = f.boolean("transcript", true);

  const json oracle_cfg = f.has("oracle") ? f.raw("oracle") : json::object();
  const Fields o(oracle_cfg, "oracle");
  o.only({"type", "metric", "eps_omega", "policy"});
  const std::string type = o.string("type", "exact");
  std::optional<MetricParams> truth;
  std::unique_ptr<Oracle> inner;
  if (type == "exact" || type == "noisy") {
    truth = o.has("metric") ? metric_from_json(o.raw("metric"), o.path("metric"))
                            : random_metric(substream(seed, 1, 0), k, m);
    if (truth->k != k || truth->m != m) throw ConfigError(o.path("metric"), "dimensions do not match k and m");
    try {
      truth->validate();
    } catch (const Error& e) {
      throw ConfigError(o.path("metric"), e.what());
    }
    if (type == "exact") {
      inner = std::make_unique<ExactOracle>(*truth, prev);
    } else {
      const double eps_omega = o.number("eps_omega", 1e-4);
      if (eps_omega < 0) throw ConfigError(o.path("eps_omega"), "must be non-negative");
      NoisePolicy pol;
      try {
        pol = parse_noise_policy(o.string("policy", "adversarial"));
      } catch (const Error& e) {
        throw ConfigError(o.path("policy"), e.what());
      }
      inner = std::make_unique<NoisyOracle>(*truth, prev, eps_omega, substream(seed, 3, 0), pol);
    }
  } else if (type == "stdin") {
    if (o.has("metric")) throw ConfigError(o.path("metric"), "a stdin oracle has no planted metric");
    inner = std::make_unique<StreamOracle>(io.in, io.out);
  } else {
    throw ConfigError(o.path("type"), "expected exact, noisy or stdin");
  }

  CountingOracle counter(*inner, transcript);
  const FpmeResult res = fpme(counter, fc);
  const QueryLedger ledger = counter.ledger();
  const QueryBudget budget = query_budget(k, m, fc.epsilon, fc.cycles);

  const fs::path dir = g.out_dir;
  write_file(dir / "params.json", dump(to_json(res.params)) + "\n");
  write_file(dir / "ledger.jsonl", transcript_jsonl(ledger));
  json manifest = {
      {"command", "elicit"},
      {"config", cfg},
      {"seed", seed},
      {"oracle", type},
      {"prevalence", to_json(prev)},
      {"sphere", to_json(fc.sphere)},
      {"positive_sphere", {{"center", fc.positive.center}, {"radius", fc.positive.radius}}},
      {"queries", {{"total", ledger.count_total}, {"by_stage", ledger.count_by_stage}}},
      {"budget",
       {{"misclassification", budget.misclassification},
        {"violation", budget.violation},
        {"tradeoff", budget.tradeoff},
        {"total", budget.total()}}},
      {"stage_seconds", res.stage_seconds},
      {"warnings", res.warnings},
      {"regularity_margin", res.regularity_margin},
  };
  if (truth) {
    manifest["truth"] = to_json(*truth);
    manifest["distance"] = distance_json(metric_distance(*truth, res.params));
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& w : res.warnings) io.err << "warning: " << w << "\n";
  (type == "stdin" ? io.err : io.out) << "elicited metric written to " << (dir / "params.json").string() << " ("
                                      << ledger.count_total << " queries)\n";
  return kExitOk;
}

int cmd_rates(const json& cfg, const Globals& g, CliStreams io) {
  const Fields f(cfg);
  f.only({"csv", "k", "m", "seed", "jobs"});
  const std::string path = f.string("csv");
  const int k = f.integer("k"), m = f.integer("m");
  if (k < 2) throw ConfigError("k", "needs at least two classes");
  if (m < 1) throw ConfigError("m", "needs at least one group");
  std::ifstream in(path);
  if (!in) throw ConfigError("csv", "cannot read '" + path + "'");
  const auto records = read_predictions_csv(in, k, m);
  const EmpiricalRates er = empirical_rates(records, k, m);
  const std::string text = dump({{"rates", to_json(er.rates)}, {"prevalence", to_json(er.prevalence)}}) + "\n";
  io.out << text;
  if (g.out_dir_set) write_file(fs::path(g.out_dir) / "rates.json", text);
  return kExitOk;
}

MembershipFn region_member(const json& j, const std::string& path, int k) {
  const Fields f(j, path);
  const std::string type = f.string("type");
  const std::size_t q = off_diag_dim(k);
  auto point = [&](const std::string& key) {
    const Vec v = f.has(key) ? f.numbers(key) : uniform_rate(k).values();
    if (v.size() != q) throw ConfigError(f.path(key), "expected " + std::to_string(q) + " entries");
    return v;
  };
  if (type == "box") {
    f.only({"type", "center", "half_width", "lo", "hi"});
    Vec lo, hi;
    if (f.has("lo") || f.has("hi")) {
      lo = f.numbers("lo");
      hi = f.numbers("hi");
      if (lo.size() != q || hi.size() != q) throw ConfigError(f.path("lo"), "lo and hi need " + std::to_string(q) + " entries");
    } else {
      const Vec c = point("center");
      const double w = f.number("half_width");
      if (!(w > 0)) throw ConfigError(f.path("half_width"), "must be positive");
      for (double x : c) {
        lo.push_back(x - w);
        hi.push_back(x + w);
      }
    }
    return [lo, hi](const Vec& x) {
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
      return true;
    };
  }
  if (type == "ball") {
    f.only({"type", "center", "radius"});
    const Vec c = point("center");
    const double r = f.number("radius");
    if (!(r > 0)) throw ConfigError(f.path("radius"), "must be positive");
    return [c, r](const Vec& x) { return norm2(sub(x, c)) <= r; };
  }
  if (type == "valid_rates") {
    f.only({"type"});
    return [k](const Vec& x) { return is_valid_rate(k, x); };
  }
  if (type == "intersection") {
    f.only({"type", "regions"});
    const json& rs = f.raw("regions");
    if (!rs.is_array() || rs.empty()) throw ConfigError(f.path("regions"), "expected a nonempty array");
    std::vector<MembershipFn> parts;
    for (std::size_t i = 0; i < rs.size(); ++i)
      parts.push_back(region_member(rs[i], f.path("regions") + "[" + std::to_string(i) + "]", k));
    return [parts](const Vec& x) {
      for (const auto& p : parts)
        if (!p(x)) return false;
      return true;
    };
  }
  throw ConfigError(f.path("type"), "expected box, ball, valid_rates or intersection");
}

int cmd_sphere(const json& cfg, const Globals& g, CliStreams io) {
  const Fields f(cfg);
  f.only({"k", "region", "center", "tolerance", "cap", "samples", "seed", "jobs"});
  const int k = f.integer("k", 2);
  if (k < 2) throw ConfigError("k", "needs at least two classes");
  const MembershipFn member = region_member(f.has("region") ? f.raw("region") : json{{"type", "valid_rates"}}, "region", k);
  const Vec center = f.has("center") ? f.numbers("center") : uniform_rate(k).values();
  if (center.size() != off_diag_dim(k)) throw ConfigError("center", "wrong length for k");
  FindSphereOptions opts;
  opts.tolerance = f.number("tolerance", opts.tolerance);
  opts.cap = f.number("cap", opts.cap);
  if (!(opts.tolerance > 0)) throw ConfigError("tolerance", "must be positive");
  Sphere s;
  try {
    s = find_sphere(member, center, k, opts);
  } catch (const InfeasibleCenter& e) {
    throw ConfigError("center", e.what());
  }

  // Monte-Carlo check of the interior
  const int samples = f.integer("samples", 1000);
  Rng rng(f.uint64("seed", 0));
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  int infeasible = 0;
  const double dim = static_cast<double>(s.dim());
  for (int t = 0; t < samples; ++t) {
    Vec d(s.dim());
    for (double& x : d) x = n(rng);
    const Vec p = add(s.center, scaled(normalized(d), s.radius * std::pow(u(rng), 1.0 / dim)));
    infeasible += !member(p);
  }
  const std::string text = dump({{"sphere", to_json(s)}, {"samples", samples}, {"infeasible_samples", infeasible}}) + "\n";
  io.out << text;
  if (g.out_dir_set) write_file(fs::path(g.out_dir) / "sphere.json", text);
  return kExitOk;
}

int cmd_recovery(const json& cfg, const Globals& g, CliStreams io) {
  const Fields f(cfg);
  f.only({"ks", "ms", "trials", "epsilon", "rho", "cycles", "seed", "jobs", "noise"});
  RecoveryConfig rc;
  rc.ks = f.integers("ks", rc.ks);
  rc.ms = f.integers("ms", rc.ms);
  rc.trials = f.integer("trials", rc.trials);
  rc.epsilon = f.number("epsilon", rc.epsilon);
  rc.rho = f.number("rho", rc.rho);
  rc.cycles = f.integer("cycles", rc.cycles);
  rc.seed = f.uint64("seed", 0);
  rc.jobs = f.integer("jobs", 1);
  if (rc.ks.empty()) throw ConfigError("ks", "needs at least one class count");
  if (rc.ms.empty()) throw ConfigError("ms", "needs at least one group count");
  if (rc.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (rc.jobs < 1) throw ConfigError("jobs", "must be at least 1");
  for (int k : rc.ks)
    for (int m : rc.ms) {
      if (k < 2) throw ConfigError("ks", "class counts start at 2");
      if (m < 2 || m > 16) throw ConfigError("ms", "group counts must lie in 2..16");
      checked_config(k, GroupPrevalence::uniform(k, m), rc.epsilon, rc.rho, rc.cycles);
    }
  if (f.has("noise")) {
    const Fields nf = f.object("noise");
    nf.only({"eps_omega", "policy"});
    NoiseSetting ns;
    ns.eps_omega = nf.number("eps_omega");
    if (ns.eps_omega < 0) throw ConfigError(nf.path("eps_omega"), "must be non-negative");
    try {
      ns.policy = parse_noise_policy(nf.string("policy", "adversarial"));
    } catch (const Error& e) {
      throw ConfigError(nf.path("policy"), e.what());
    }
    rc.noise = ns;
  }
  const RecoveryReport rep = recovery_experiment(rc);
  const fs::path dir = g.out_dir;
  write_file(dir / "recovery.csv", recovery_csv(rep));
  json summary = recovery_summary(rep);
  summary["config"] = cfg;
  write_file(dir / "recovery.json", summary.dump(2) + "\n");
  int ok = 0;
  for (const auto& r : rep.rows) {
    if (r.error.empty())
      ++ok;
    else
      io.err << "trial k=" << r.k << " m=" << r.m << " #" << r.trial << " failed: " << r.error << "\n";
  }
  for (const auto& c : rep.cells)
    io.out << "k=" << c.k << " m=" << c.m << " ok=" << c.ok << " a_err=" << c.mean.a_err << " b_err=" << c.mean.b_err
           << " lambda_err=" << c.mean.lambda_err << "\n";
  return ok == 0 ? kExitElicitation : kExitOk;
}

int cmd_ranking(const json& cfg, const Globals& g, CliStreams io) {
  const Fields f(cfg);
  f.only({"k", "m", "pool_size", "pool", "trials", "epsilon", "rho", "cycles", "seed", "jobs", "baselines"});
  RankingConfig rc;
  rc.trials = f.integer("trials", rc.trials);
  rc.epsilon = f.number("epsilon", rc.epsilon);
  rc.rho = f.number("rho", rc.rho);
  rc.cycles = f.integer("cycles", rc.cycles);
  rc.seed = f.uint64("seed", 0);
  rc.jobs = f.integer("jobs", 1);
  if (rc.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (rc.jobs < 1) throw ConfigError("jobs", "must be at least 1");
  if (f.has("baselines")) {
    const json& names = f.raw("baselines");
    if (!names.is_array()) throw ConfigError("baselines", "expected an array of names");
    rc.baselines.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string name = names[i].is_string() ? names[i].get<std::string>() : "";
      const auto& all = standard_baselines();
      const auto it = std::find_if(all.begin(), all.end(), [&](const BaselineSpec& b) { return b.name == name; });
      if (it == all.end()) throw ConfigError("baselines[" + std::to_string(i) + "]", "unknown baseline");
      rc.baselines.push_back(*it);
    }
  }
  ClassifierPool pool{{}, GroupPrevalence::uniform(2, 2)};
  if (f.has("pool")) {
    if (f.has("pool_size")) throw ConfigError("pool_size", "cannot be combined with an ingested pool");
    const std::string path = f.string("pool");
    std::ifstream in(path);
    if (!in) throw ConfigError("pool", "cannot read '" + path + "'");
    json pj;
    try {
      pj = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("pool", std::string("not valid JSON: ") + e.what());
    }
    pool = pool_from_json(pj);
  } else {
    const int k = f.integer("k", 2), m = f.integer("m", 2), n = f.integer("pool_size", 100);
    if (k < 2) throw ConfigError("k", "needs at least two classes");
    if (m < 2 || m > 16) throw ConfigError("m", "group counts must lie in 2..16");
    if (n < 2) throw ConfigError("pool_size", "must be at least 2");
    pool = synth_pool(substream(rc.seed, 4, 0), n, k, m);
  }
  checked_config(pool.prev.k(), pool.prev, rc.epsilon, rc.rho, rc.cycles);
  const RankingReport rep = ranking_experiment(pool, rc);
  const fs::path dir = g.out_dir;
  write_file(dir / "ranking.csv", ranking_csv(rep));
  json summary = ranking_summary(rep);
  summary["config"] = cfg;
  write_file(dir / "ranking.json", summary.dump(2) + "\n");
  int ok = 0;
  for (const auto& t : rep.trials) {
    if (t.error.empty())
      ++ok;
    else
      io.err << "trial " << t.trial << " failed: " << t.error << "\n";
  }
  for (const auto& name : rep.methods)
    io.out << name << " ndcg=" << rep.mean.at(name).ndcg << " tau=" << rep.mean.at(name).tau << "\n";
  return ok == 0 ? kExitElicitation : kExitOk;
}

int cmd_serve(const json& cfg, CliStreams io) {
  const Fields f(cfg);
  f.only({"host", "port", "journal_dir", "static_dir", "seed", "jobs"});
  const std::string host = f.string("host", "127.0.0.1");
  const int port = f.integer("port", 8080);
  if (port < 0 || port > 65535) throw ConfigError("port", "must lie in 0..65535");
  const std::string journals = f.string("journal_dir", "journals");
  std::optional<std::string> web;
  if (f.has("static_dir")) web = f.string("static_dir");

  // Signals are taken synchronously by one thread so shutdown happens outside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t saved;
  pthread_sigmask(SIG_BLOCK, &set, &saved);
  struct Restore {
    sigset_t mask;
    ~Restore() { pthread_sigmask(SIG_SETMASK, &mask, nullptr); }
  } restore{saved};

  SessionManager sessions(journals);
  const auto resumed = sessions.resume_all();
  std::unique_ptr<HttpService> http;
  try {
    http = std::make_unique<HttpService>(sessions, web);
  } catch (const InvalidArgument& e) {
    throw ConfigError("static_dir", e.what());
  }
  const int bound = http->bind(host, port);
  io.out << "listening on " << host << ":" << bound << " (" << resumed.size() << " sessions resumed)" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    http->stop();
  });
  http->run();
  pthread_kill(waiter.native_handle(), SIGTERM);  // no-op once the waiter has returned
  waiter.join();
  sessions.shutdown();
  io.out << "stopped; journals flushed" << std::endl;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, CliStreams io, const std::map<std::string, std::string>& env) {
  CLI::App app{"Elicit group-fair performance metrics from pairwise preferences"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  auto* out_opt = app.add_option("--out-dir", g.out_dir, "directory for result files");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads for experiments")->check(CLI::PositiveNumber);

  auto* elicit = app.add_subcommand("elicit", "run a full elicitation against a simulated or stdin oracle");
  auto* rates = app.add_subcommand("rates", "estimate group rates from a prediction log");
  std::string csv;
  std::optional<int> rk, rm;
  rates->add_option("csv", csv, "CSV with header group,true_label,pred_label");
  rates->add_option("--k", rk, "number of classes");
  rates->add_option("--m", rm, "number of groups");
  auto* sphere = app.add_subcommand("sphere", "find an inscribed sphere of a feasible region");
  auto* experiment = app.add_subcommand("experiment", "run a desk-scale experiment");
  experiment->require_subcommand(1);
  auto* recovery = experiment->add_subcommand("recovery", "planted-metric recovery errors");
  auto* ranking = experiment->add_subcommand("ranking", "ranking quality against the baselines");
  auto* serve = app.add_subcommand("serve", "serve the session API");
  std::optional<int> port;
  serve->add_option("--port", port, "listen port (0 picks one)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (*seed_opt) g.seed = seed;
  if (*jobs_opt) g.jobs = jobs;
  g.out_dir_set = static_cast<bool>(*out_opt);

  try {
    json cfg = load_config(g, env);
    if (*rates) {
      if (!csv.empty()) cfg["csv"] = csv;
      if (rk) cfg["k"] = *rk;
      if (rm) cfg["m"] = *rm;
      return cmd_rates(cfg, g, io);
    }
    if (*elicit) return cmd_elicit(cfg, g, io);
    if (*sphere) return cmd_sphere(cfg, g, io);
    if (*recovery) return cmd_recovery(cfg, g, io);
    if (*ranking) return cmd_ranking(cfg, g, io);
    if (*serve) {
      if (port) cfg["port"] = *port;
      return cmd_serve(cfg, io);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    io.err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageError& e) {
    io.err << "elicitation failed in stage " << e.stage() << ": " << e.what() << "\n";
    return kExitElicitation;
  } catch (const SessionAborted& e) {
    io.err << "elicitation aborted: " << e.what() << "\n";
    return kExitElicitation;
  } catch (const PortBusy& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitPortBusy;
  } catch (const InvalidArgument& e) {
    // bad input files surface here (prediction logs, pools)
    io.err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UndefinedRate& e) {
    io.err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fairelicit
