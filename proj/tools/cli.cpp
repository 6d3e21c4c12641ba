#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mdpgeo/analysis.hpp"
#include "mdpgeo/gen.hpp"
#include "mdpgeo/hash.hpp"
#include "mdpgeo/io.hpp"
#include "mdpgeo/solvers.hpp"
#include "mdpgeo/transforms.hpp"
#include "mdpgeo/twostate.hpp"

namespace mdpgeo::cli {

namespace {

struct Failure {
  int code;
  std::string kind;
  std::string message;
};

[[noreturn]] void usage(const std::string& message) { throw Failure{kUsage, "usage", message}; }

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::consistency:
    case ErrorKind::no_convergence: return kSoftware;
    case ErrorKind::io: return kNoInput;
    default: return kDataError;
  }
}

std::string quote(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

int report(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << "error kind=" << kind << " exit=" << code << " msg=\"" << quote(message) << "\"\n";
  return code;
}

std::string env_name(const std::string& flag) {
  std::string out = "MDPGEO_";
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

template <class T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
  return app->add_option("--" + name, target, help)->envname(env_name(name));
}

struct Input {
  std::string path;
  std::string bytes;
  std::string sha256;
};

Input load(const std::string& path) {
  try {
    std::string bytes = read_file(path);
    std::string digest = sha256_hex(bytes);
    return {path, std::move(bytes), std::move(digest)};
  } catch (const Error& e) {
    throw Failure{kNoInput, "io", e.what()};
  }
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  try {
    write_file_atomic(path, text);
  } catch (const Error& e) {
    throw Failure{kCantCreate, "io", e.what()};
  }
}

std::string document(const Json& doc) { return doc.dump(2) + "\n"; }

Json parse_json(const Input& in) {
  try {
    return Json::parse(in.bytes);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, in.path + ": malformed JSON: " + e.what());
  }
}

Json ids(const Mdp& mdp, const Policy& pi) { return policy_to_json(mdp, pi)["policy"]; }

Json values_json(const ValueVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// "name:value" split; value empty when there is no colon.
std::pair<std::string, std::string> split_arg(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return {text, ""};
  return {text.substr(0, colon), text.substr(colon + 1)};
}

double to_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used == text.size()) return x;
  } catch (const std::exception&) {
  }
  usage("bad number '" + text + "' for " + what);
}

std::size_t to_count(const std::string& text, const std::string& what) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
    usage("bad integer '" + text + "' for " + what);
  }
  try {
    return static_cast<std::size_t>(std::stoull(text));
  } catch (const std::exception&) {
    usage("integer out of range for " + what);
  }
}

StopRule parse_stop(const std::string& text) {
  const auto [kind, arg] = split_arg(text);
  if (kind == "time") return StopRule::time(to_count(arg, "--stop time"));
  if (kind == "span") return StopRule::span(to_double(arg, "--stop span"));
  if (kind == "span-values") return StopRule::span_values(to_double(arg, "--stop span-values"));
  if (kind == "actions" && arg.empty()) return StopRule::action_count();
  usage("--stop must be time:T, span:EPS, span-values:EPS or actions");
}

FilterRule parse_filter(const std::string& text) {
  if (text == "none") return FilterRule::none;
  if (text == "appendix") return FilterRule::appendix;
  if (text == "appendix-literal") return FilterRule::appendix_literal;
  usage("--filter must be none, appendix or appendix-literal");
}

Schedule parse_schedule(const std::string& text) {
  const auto [kind, arg] = split_arg(text);
  if (kind == "sync" && arg.empty()) return Schedule::sync();
  if (kind == "rr") {
    const std::size_t k = to_count(arg, "--schedule rr");
    if (k == 0) usage("--schedule rr:K needs K >= 1");
    return Schedule::round_robin(k);
  }
  usage("--schedule must be sync or rr:K");
}

ValueVector read_values(const Input& in, std::size_t n) {
  Json doc = parse_json(in);
  if (doc.is_object() && doc.contains("values")) doc = doc["values"];
  if (!doc.is_array() || doc.size() != n) {
    throw Error(ErrorKind::parse, in.path + ": expected an array of " + std::to_string(n) + " values");
  }
  ValueVector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!doc[i].is_number()) throw Error(ErrorKind::parse, in.path + ": values must be numbers");
    v[static_cast<Eigen::Index>(i)] = doc[i].get<double>();
  }
  return v;
}

Policy read_policy(const Input& in, const Mdp& mdp) {
  Json doc = parse_json(in);
  if (doc.is_object() && doc.contains("policy")) doc = doc["policy"];
  if (!doc.is_array() || doc.size() != mdp.n_states()) {
    throw Error(ErrorKind::parse, in.path + ": expected one action id per state");
  }
  Policy pi;
  for (const auto& id : doc) {
    if (!id.is_string()) throw Error(ErrorKind::parse, in.path + ": action ids must be strings");
    pi.choice.push_back(mdp.id_of(id.get<std::string>()));
  }
  check_policy(mdp, pi);
  return pi;
}

struct Loaded {
  Input input;
  Mdp mdp;
};

Loaded load_mdp(const std::string& path) {
  Input in = load(path);
  Mdp mdp = parse_mdp(in.bytes);
  return {std::move(in), std::move(mdp)};
}

// --- subcommands -----------------------------------------------------------

struct SolveViArgs {
  std::string mdp, stop = "span:1e-6", filter = "none", schedule = "sync", v0, trace, out;
  double alpha = 1.0;
};

int solve_vi(const SolveViArgs& a, std::ostream& out) {
  ViConfig cfg;
  cfg.alpha = a.alpha;
  cfg.stop = parse_stop(a.stop);
  cfg.filter = parse_filter(a.filter);
  cfg.schedule = parse_schedule(a.schedule);
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) usage("--alpha must lie in (0,1]");
  if (cfg.stop.kind == StopKind::action_count && cfg.filter == FilterRule::none) {
    usage("--stop actions needs --filter appendix");
  }
  const std::string v0 = a.v0.empty() ? (cfg.filter == FilterRule::none ? "zeros" : "upper") : a.v0;
  const auto [v0_kind, v0_path] = split_arg(v0);
  if (cfg.filter != FilterRule::none) {
    if (v0_kind != "upper") usage("--filter needs --v0 upper");
    if (a.alpha != 1.0 || !cfg.schedule.synchronous()) usage("--filter needs --alpha 1 and --schedule sync");
  }

  const Loaded m = load_mdp(a.mdp);
  Json inputs = {{"mdp_sha256", m.input.sha256}};
  if (v0_kind == "zeros" && v0_path.empty()) {
    cfg.init = InitKind::zeros;
  } else if (v0_kind == "upper" && v0_path.empty()) {
    cfg.init = InitKind::upper_bound;
  } else if (v0_kind == "file" && !v0_path.empty()) {
    const Input vin = load(v0_path);
    cfg.init = InitKind::given;
    cfg.v0 = read_values(vin, m.mdp.n_states());
    inputs["v0_sha256"] = vin.sha256;
  } else {
    usage("--v0 must be zeros, upper or file:PATH");
  }

  const RunTrace trace = value_iteration(m.mdp, cfg);
  const std::string csv = trace_to_csv(trace);
  if (!a.trace.empty()) emit(a.trace, csv, out);

  Json doc = {{"command", "solve-vi"},
              {"inputs", inputs},
              {"policy", ids(m.mdp, trace.final_policy)},
              {"values", values_json(trace.records.back().values)},
              {"stop_reason", std::string(to_string(trace.stop_reason))},
              {"iterations", trace.iterations()},
              {"converged", trace.converged()},
              {"trace_sha256", sha256_hex(csv)}};
  emit(a.out, document(doc), out);
  return trace.converged() ? kOk : kIterationCap;
}

struct SolvePiArgs {
  std::string mdp, init = "max-reward", out;
};

int solve_pi(const SolvePiArgs& a, std::ostream& out) {
  const Loaded m = load_mdp(a.mdp);
  Json inputs = {{"mdp_sha256", m.input.sha256}};
  const auto [kind, path] = split_arg(a.init);
  Policy pi0;
  if (kind == "max-reward" && path.empty()) {
    pi0 = max_reward_policy(m.mdp);
  } else if (kind == "first" && path.empty()) {
    pi0 = first_action_policy(m.mdp);
  } else if (kind == "file" && !path.empty()) {
    const Input pin = load(path);
    pi0 = read_policy(pin, m.mdp);
    inputs["init_sha256"] = pin.sha256;
  } else {
    usage("--init must be max-reward, first or file:PATH");
  }
  const PolicyIterationResult run = policy_iteration(m.mdp, pi0);
  Json steps = Json::array();
  for (const Policy& p : run.steps) steps.push_back(ids(m.mdp, p));
  Json doc = {{"command", "solve-pi"},
              {"inputs", inputs},
              {"policy", ids(m.mdp, run.policy)},
              {"values", values_json(*run.policy.values)},
              {"iterations", run.iterations()},
              {"steps", steps}};
  emit(a.out, document(doc), out);
  return kOk;
}

struct NormalizeArgs {
  std::string mdp, out, mdp_out;
};

int normalize_cmd(const NormalizeArgs& a, std::ostream& out) {
  const Loaded m = load_mdp(a.mdp);
  const Normalization norm = normalize(m.mdp);
  const std::string normalized = dump_mdp(norm.mdp);
  if (!a.mdp_out.empty()) emit(a.mdp_out, normalized, out);
  Json doc = {{"command", "normalize"},
              {"inputs", {{"mdp_sha256", m.input.sha256}}},
              {"unique", norm.unique},
              {"optimal_policy", ids(m.mdp, norm.optimal)},
              {"optimal_values", values_json(*norm.optimal.values)},
              {"log", log_to_json(norm.log)},
              {"mdp_sha256", sha256_hex(normalized)},
              {"mdp", mdp_to_json(norm.mdp)}};
  emit(a.out, document(doc), out);
  return kOk;
}

struct GammaEffArgs {
  std::string mdp, out;
};

int gamma_eff(const GammaEffArgs& a, std::ostream& out) {
  const Loaded m = load_mdp(a.mdp);
  const EffectiveGamma eff = effective_gamma(m.mdp);
  Json doc = {{"command", "gamma-eff"},
              {"inputs", {{"mdp_sha256", m.input.sha256}}},
              {"gamma", eff.gamma},
              {"gamma_eff", eff.gamma_eff},
              {"clamped", eff.clamped},
              {"log", log_to_json(eff.log)}};
  emit(a.out, document(doc), out);
  return kOk;
}

struct CertifyArgs {
  std::string mdp, trace, out;
  double alpha = 1.0;
  double epsilon = 1e-6;
};

int certify_cmd(const CertifyArgs& a, std::ostream& out) {
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) usage("--alpha must lie in (0,1]");
  if (!(a.epsilon > 0.0)) usage("--epsilon must be positive");
  const Loaded m = load_mdp(a.mdp);
  const Input tin = load(a.trace);
  const RunTrace trace = trace_from_csv(tin.bytes, a.alpha);
  const CertifyOptions opts{a.epsilon};
  const ConvergenceCertificate cert =
      a.alpha == 1.0 ? certify(m.mdp, trace, opts) : certify_alpha(m.mdp, trace, a.alpha, opts);
  Json doc = {{"command", "certify"}, {"inputs", {{"mdp_sha256", m.input.sha256}, {"trace_sha256", tin.sha256}}}};
  const Json body = certificate_to_json(cert);
  for (const auto& [key, value] : body.items()) doc[key] = value;
  emit(a.out, document(doc), out);
  return kOk;
}

struct GenerateArgs {
  std::string spec, out, actions, structure;
  std::uint64_t seed = 0;
  std::size_t n_states = 0, sparse_k = 0;
  double gamma = 0.0, beta = 0.0;
  CLI::Option *o_n = nullptr, *o_actions = nullptr, *o_gamma = nullptr, *o_structure = nullptr,
              *o_sparse = nullptr, *o_beta = nullptr;
};

int generate_cmd(const GenerateArgs& a, std::ostream& out) {
  GenSpec spec;
  Json inputs = Json::object();
  if (!a.spec.empty()) {
    const Input sin = load(a.spec);
    const Json doc = parse_json(sin);
    spec = gen_spec_from_json(doc);
    inputs["spec_sha256"] = sin.sha256;
  }
  spec.seed = a.seed;
  if (!a.o_n->empty()) spec.n_states = a.n_states;
  if (!a.o_gamma->empty()) spec.gamma = a.gamma;
  if (!a.o_sparse->empty()) spec.sparse_k = a.sparse_k;
  if (!a.o_beta->empty()) spec.beta = a.beta;
  if (!a.o_structure->empty()) {
    try {
      spec.structure = parse_structure(a.structure);
    } catch (const Error& e) {
      usage(e.what());
    }
  }
  if (!a.o_actions->empty()) {
    const auto [lo, hi] = split_arg(a.actions);
    spec.min_actions = to_count(lo, "--actions");
    spec.max_actions = hi.empty() ? spec.min_actions : to_count(hi, "--actions");
  }
  try {
    check_spec(spec);
  } catch (const Error& e) {
    usage(e.what());
  }
  const std::string mdp = dump_mdp(generate(spec));
  if (a.out.empty()) {
    out << mdp;
    return kOk;
  }
  emit(a.out, mdp, out);
  const Json spec_json = gen_spec_to_json(spec);
  inputs["resolved_spec_sha256"] = sha256_hex(spec_json.dump());
  Json doc = {{"command", "generate"}, {"inputs", inputs}, {"spec", spec_json}, {"mdp_sha256", sha256_hex(mdp)},
              {"out", a.out}};
  out << document(doc);
  return kOk;
}

struct TwoStateArgs {
  std::string mdp, out;
  std::size_t suite = 0, max_actions = 12;
  std::uint64_t seed = 0;
};

Json certificate_json(const Mdp& mdp, const InefficiencyCertificate& c) {
  Json doc = {{"degenerate", c.degenerate},
              {"slope_r", c.slope_r},
              {"slope_l", c.slope_l},
              {"gap_state1", c.gap_state1},
              {"gap_state2", c.gap_state2},
              {"reading", c.reading}};
  if (!c.degenerate) {
    doc["state"] = c.state;
    doc["inefficient"] = mdp.action(c.inefficient).id;
    doc["dominating"] = mdp.action(c.dominating).id;
    doc["weak_self_loop_reward"] = c.weak_reward;
    doc["strong_self_loop_reward"] = c.strong_reward;
    doc["min_margin"] = c.min_margin;
  }
  doc["holds"] = c.holds;
  return doc;
}

int twostate_cmd(const TwoStateArgs& a, std::ostream& out) {
  if (a.mdp.empty() == (a.suite == 0)) usage("twostate needs exactly one of --mdp or --suite");
  if (a.suite > 0) {
    if (a.max_actions < 3) usage("--max-actions must be at least 3");
    const TwoStateSuite suite = run_two_state_suite(a.suite, a.max_actions, a.seed);
    Json doc = {{"command", "twostate"},
                {"inputs", {{"suite", a.suite}, {"max_actions", a.max_actions}, {"seed", a.seed}}},
                {"instances", suite.instances},
                {"violations", suite.violations},
                {"degenerate", suite.degenerate},
                {"max_iterations", suite.max_iterations},
                {"worst_ratio", suite.worst_ratio}};
    if (suite.first_counterexample) {
      doc["failure"] = suite.first_failure;
      doc["counterexample"] = mdp_to_json(*suite.first_counterexample);
    }
    emit(a.out, document(doc), out);
    return suite.violations == 0 ? kOk : kSoftware;
  }
  const Loaded m = load_mdp(a.mdp);
  const PiBoundReport r = verify_pi_bound(m.mdp);
  Json doc = {{"command", "twostate"},
              {"inputs", {{"mdp_sha256", m.input.sha256}}},
              {"n_actions", r.n_actions},
              {"starts", r.starts},
              {"max_iterations", r.max_iterations},
              {"set_sizes", r.set_sizes},
              {"pi_ok", r.pi_ok},
              {"elimination_ok", r.elimination_ok},
              {"containment_ok", r.containment_ok},
              {"fixpoint_ok", r.fixpoint_ok},
              {"certificate_ok", r.certificate_ok},
              {"degenerate", r.degenerate},
              {"holds", r.holds}};
  if (m.mdp.n_actions() >= 3) {
    doc["certificate"] = certificate_json(m.mdp, inefficiency_certificate(m.mdp, ActionSet::all(m.mdp)));
  }
  if (!r.holds) doc["failure"] = r.failure;
  emit(a.out, document(doc), out);
  return r.holds ? kOk : kSoftware;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric MDP toolkit: solvers, transforms and convergence certificates", "mdpgeo"};
  app.require_subcommand(1);

  SolveViArgs vi;
  auto* c_vi = app.add_subcommand("solve-vi", "Run value iteration; writes the final policy and a CSV trace");
  flag(c_vi, "mdp", vi.mdp, "MDP JSON file")->required();
  flag(c_vi, "alpha", vi.alpha, "learning rate in (0,1]");
  flag(c_vi, "stop", vi.stop, "time:T | span:EPS | span-values:EPS | actions");
  flag(c_vi, "filter", vi.filter, "none | appendix | appendix-literal");
  flag(c_vi, "schedule", vi.schedule, "sync | rr:K");
  flag(c_vi, "v0", vi.v0, "zeros | upper | file:PATH (default upper with a filter, zeros otherwise)");
  flag(c_vi, "trace", vi.trace, "CSV trace output");
  flag(c_vi, "out", vi.out, "policy JSON output (stdout if omitted)");

  SolvePiArgs pi;
  auto* c_pi = app.add_subcommand("solve-pi", "Run Howard policy iteration");
  flag(c_pi, "mdp", pi.mdp, "MDP JSON file")->required();
  flag(c_pi, "init", pi.init, "max-reward | first | file:PATH");
  flag(c_pi, "out", pi.out, "JSON output (stdout if omitted)");

  NormalizeArgs norm;
  auto* c_norm = app.add_subcommand("normalize", "Shift values so the optimal policy is worth 0 everywhere");
  flag(c_norm, "mdp", norm.mdp, "MDP JSON file")->required();
  flag(c_norm, "out", norm.out, "report JSON output (stdout if omitted)");
  flag(c_norm, "mdp-out", norm.mdp_out, "also write the normalized MDP file");

  GammaEffArgs ge;
  auto* c_ge = app.add_subcommand("gamma-eff", "Effective discount factor via safe discount changes");
  flag(c_ge, "mdp", ge.mdp, "MDP JSON file")->required();
  flag(c_ge, "out", ge.out, "JSON output (stdout if omitted)");

  CertifyArgs cert;
  auto* c_cert = app.add_subcommand("certify", "Convergence certificate for a value-iteration trace");
  flag(c_cert, "mdp", cert.mdp, "MDP JSON file")->required();
  flag(c_cert, "trace", cert.trace, "CSV trace written by solve-vi (sync, unfiltered)")->required();
  flag(c_cert, "alpha", cert.alpha, "learning rate the trace was run with");
  flag(c_cert, "epsilon", cert.epsilon, "accuracy for the iteration prediction");
  flag(c_cert, "out", cert.out, "JSON output (stdout if omitted)");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Seeded random MDP");
  flag(c_gen, "seed", gen.seed, "random seed")->required();
  flag(c_gen, "spec", gen.spec, "generator spec JSON; flags override its fields");
  gen.o_n = flag(c_gen, "n-states", gen.n_states, "number of states");
  gen.o_actions = flag(c_gen, "actions", gen.actions, "actions per state: K or MIN:MAX");
  gen.o_gamma = flag(c_gen, "gamma", gen.gamma, "discount factor");
  gen.o_structure =
      flag(c_gen, "structure", gen.structure, "dense | sparse | planted_optimal | periodic_optimal | wielandt");
  gen.o_sparse = flag(c_gen, "sparse-k", gen.sparse_k, "support size of sparse rows");
  gen.o_beta = flag(c_gen, "beta", gen.beta, "minimum gap of non-planted actions");
  flag(c_gen, "out", gen.out, "MDP output (stdout if omitted)");

  TwoStateArgs ts;
  auto* c_ts = app.add_subcommand("twostate", "Policy-iteration bound and set dynamics on 2-state MDPs");
  flag(c_ts, "mdp", ts.mdp, "2-state MDP JSON file");
  flag(c_ts, "suite", ts.suite, "number of random instances");
  flag(c_ts, "max-actions", ts.max_actions, "largest action count in the suite");
  flag(c_ts, "seed", ts.seed, "suite seed");
  flag(c_ts, "out", ts.out, "JSON output (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, kUsage, "usage", e.what());
    err << app.help();
    return kUsage;
  }

  try {
    if (c_vi->parsed()) return solve_vi(vi, out);
    if (c_pi->parsed()) return solve_pi(pi, out);
    if (c_norm->parsed()) return normalize_cmd(norm, out);
    if (c_ge->parsed()) return gamma_eff(ge, out);
    if (c_cert->parsed()) return certify_cmd(cert, out);
    if (c_gen->parsed()) return generate_cmd(gen, out);
    if (c_ts->parsed()) return twostate_cmd(ts, out);
    return report(err, kUsage, "usage", "no subcommand");
  } catch (const Failure& f) {
    return report(err, f.code, f.kind, f.message);
  } catch (const Error& e) {
    return report(err, exit_code(e.kind()), std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report(err, kSoftware, "internal", e.what());
  }
}

}  // namespace mdpgeo::cli
