#include "mdpgeo/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mdpgeo/hash.hpp"

namespace mdpgeo {

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::parse, what); }

void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) parse_error(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto name : allowed) known = known || key == name;
    if (!known) parse_error("unknown field '" + key + "' in " + where);
  }
}

const Json& field(const Json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) parse_error("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

double number(const Json& v, const std::string& what) {
  if (!v.is_number()) parse_error(what + " must be a number");
  return v.get<double>();
}

std::size_t count(const Json& v, const std::string& what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    parse_error(what + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

Json numbers(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// JSON has no infinities; they go out as null.
Json maybe_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

Mdp mdp_from_json(const Json& doc) {
  reject_unknown(doc, {"version", "n_states", "gamma", "actions"}, "MDP document");
  const Json& version = field(doc, "version", "MDP document");
  if (!version.is_number_integer() || version.get<long long>() != 1) parse_error("unsupported MDP version");
  const std::size_t n = count(field(doc, "n_states", "MDP document"), "n_states");
  const double gamma = number(field(doc, "gamma", "MDP document"), "gamma");
  const Json& list = field(doc, "actions", "MDP document");
  if (!list.is_array()) parse_error("actions must be an array");

  std::vector<Action> actions;
  actions.reserve(list.size());
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string where = "action " + std::to_string(k);
    const Json& a = list[k];
    reject_unknown(a, {"id", "state", "probs", "reward"}, where);
    const Json& id = field(a, "id", where);
    if (!id.is_string()) parse_error(where + ": id must be a string");
    const Json& probs = field(a, "probs", where);
    if (!probs.is_array()) parse_error(where + ": probs must be an array");
    Eigen::VectorXd p(static_cast<Eigen::Index>(probs.size()));
    for (std::size_t i = 0; i < probs.size(); ++i) p[static_cast<Eigen::Index>(i)] = number(probs[i], where + " probs");
    actions.push_back({id.get<std::string>(), count(field(a, "state", where), where + " state"), std::move(p),
                       number(field(a, "reward", where), where + " reward")});
  }
  Mdp mdp(n, gamma, std::move(actions));
  validate(mdp);
  return mdp;
}

Json mdp_to_json(const Mdp& mdp) {
  Json actions = Json::array();
  for (const Action& a : mdp.actions()) {
    actions.push_back({{"id", a.id}, {"state", a.state}, {"probs", numbers(a.probs)}, {"reward", a.reward}});
  }
  return {{"version", 1}, {"n_states", mdp.n_states()}, {"gamma", mdp.gamma()}, {"actions", std::move(actions)}};
}

Mdp parse_mdp(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    parse_error(std::string("malformed JSON: ") + e.what());
  }
  return mdp_from_json(doc);
}

std::string dump_mdp(const Mdp& mdp) { return mdp_to_json(mdp).dump(2) + "\n"; }

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trace_to_csv(const RunTrace& trace) {
  const std::size_t n = trace.records.empty() ? 0 : static_cast<std::size_t>(trace.records.front().values.size());
  std::string out = "t,span_v,span_dv,active_actions,stop_reason_final";
  for (std::size_t i = 0; i < n; ++i) out += ",value_" + std::to_string(i);
  out += '\n';
  for (std::size_t row = 0; row < trace.records.size(); ++row) {
    const IterationRecord& rec = trace.records[row];
    out += std::to_string(rec.t);
    out += ',' + format_double(rec.span_v);
    out += ',' + format_double(rec.span_dv);
    out += ',' + std::to_string(rec.active_count);
    out += ',';
    if (row + 1 == trace.records.size()) out += to_string(trace.stop_reason);
    for (Eigen::Index i = 0; i < rec.values.size(); ++i) out += ',' + format_double(rec.values[i]);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, std::size_t row) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE) {
    parse_error("trace row " + std::to_string(row) + ": bad number '" + cell + "'");
  }
  return x;
}

std::size_t parse_count(const std::string& cell, std::size_t row) {
  const double x = parse_double(cell, row);
  if (x < 0 || x != std::floor(x)) parse_error("trace row " + std::to_string(row) + ": bad integer '" + cell + "'");
  return static_cast<std::size_t>(x);
}

StopReason parse_stop_reason(const std::string& name) {
  for (StopReason r : {StopReason::time_limit, StopReason::span, StopReason::span_values, StopReason::action_count,
                       StopReason::iteration_cap}) {
    if (to_string(r) == name) return r;
  }
  parse_error("unknown stop reason '" + name + "'");
}

}  // namespace

RunTrace trace_from_csv(std::string_view text, double alpha, bool synchronous, bool filtered) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) parse_error("empty trace");
  const std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> fixed = {"t", "span_v", "span_dv", "active_actions", "stop_reason_final"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    parse_error("trace header must start with t,span_v,span_dv,active_actions,stop_reason_final");
  }
  const std::size_t n = header.size() - fixed.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (header[fixed.size() + i] != "value_" + std::to_string(i)) parse_error("bad value column '" + header[fixed.size() + i] + "'");
  }

  RunTrace trace;
  trace.alpha = alpha;
  trace.synchronous = synchronous;
  trace.filtered = filtered;
  std::string last_reason;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t row = trace.records.size();
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) parse_error("trace row " + std::to_string(row) + " has the wrong width");
    IterationRecord rec;
    rec.t = parse_count(cells[0], row);
    rec.span_v = parse_double(cells[1], row);
    rec.span_dv = parse_double(cells[2], row);
    rec.active_count = parse_count(cells[3], row);
    if (!last_reason.empty()) parse_error("stop reason appears before the last row");
    last_reason = cells[4];
    rec.values.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) rec.values[static_cast<Eigen::Index>(i)] = parse_double(cells[5 + i], row);
    trace.records.push_back(std::move(rec));
  }
  if (trace.records.empty()) parse_error("trace has no rows");
  trace.stop_reason = parse_stop_reason(last_reason);
  return trace;
}

std::string trace_digest(const RunTrace& trace) { return sha256_hex(trace_to_csv(trace)); }

Json policy_to_json(const Mdp& mdp, const Policy& pi) {
  Json ids = Json::array();
  for (ActionId a : pi.choice) ids.push_back(mdp.action(a).id);
  Json out = {{"policy", std::move(ids)}};
  if (pi.values) out["values"] = numbers(*pi.values);
  return out;
}

Json certificate_to_json(const ConvergenceCertificate& c) {
  Json out = {{"n", c.n},
              {"n_actions", c.n_actions},
              {"gamma", c.gamma},
              {"N", c.exponent},
              {"omega", c.omega},
              {"delta", maybe_number(c.delta)},
              {"phi", maybe_number(c.phi)},
              {"tau", maybe_number(c.tau)},
              {"phi_printed", maybe_number(c.phi_printed)},
              {"tau_printed", maybe_number(c.tau_printed)},
              {"printed_holds", c.printed_holds},
              {"lhs", c.lhs},
              {"rhs", maybe_number(c.rhs)},
              {"margin", maybe_number(c.margin)},
              {"holds", c.holds},
              {"epsilon", c.epsilon},
              {"predicted_vi_iters", maybe_number(c.predicted_vi_iters)},
              {"gamma_eff", c.gamma_eff},
              {"predicted_pi_iters", maybe_number(c.predicted_pi_iters)},
              {"trace_sha256", c.trace_digest}};
  if (c.alpha) {
    const AlphaCertificate& a = *c.alpha;
    out["alpha"] = {{"alpha", a.alpha},
                    {"N_alpha", a.exponent},
                    {"delta_prime", maybe_number(a.delta_prime)},
                    {"delta_prime_alpha", maybe_number(a.delta_prime_alpha)},
                    {"tau_alpha", maybe_number(a.tau)},
                    {"contraction", maybe_number(a.contraction)},
                    {"lhs", a.lhs},
                    {"rhs", maybe_number(a.rhs)},
                    {"margin", maybe_number(a.margin)},
                    {"holds", a.holds},
                    {"delta_prime_plain", maybe_number(a.delta_prime_plain)},
                    {"tau_plain", maybe_number(a.tau_plain)},
                    {"plain_holds", a.plain_holds}};
  }
  return out;
}

Json log_to_json(const TransformLog& log) {
  Json steps = Json::array();
  for (const TransformStep& step : log.steps) {
    if (const auto* l = std::get_if<ShiftStep>(&step)) {
      steps.push_back({{"op", "L"}, {"state", l->state}, {"delta", l->delta}});
    } else {
      const auto& j = std::get<DiscountStep>(step);
      steps.push_back({{"op", "J"},
                       {"state", j.state},
                       {"gamma_before", j.gamma_before},
                       {"gamma_after", j.gamma_after},
                       {"forced", j.forced}});
    }
  }
  return {{"original_gamma", log.original_gamma}, {"steps", std::move(steps)}};
}

Json gen_spec_to_json(const GenSpec& spec) {
  return {{"n_states", spec.n_states},
          {"actions_per_state", {spec.min_actions, spec.max_actions}},
          {"gamma", spec.gamma},
          {"seed", spec.seed},
          {"structure", std::string(to_string(spec.structure))},
          {"sparse_k", spec.sparse_k},
          {"beta", spec.beta}};
}

GenSpec gen_spec_from_json(const Json& doc) {
  reject_unknown(doc, {"n_states", "actions_per_state", "gamma", "seed", "structure", "sparse_k", "beta"},
                 "generator spec");
  GenSpec spec;
  if (doc.contains("n_states")) spec.n_states = count(doc["n_states"], "n_states");
  if (doc.contains("actions_per_state")) {
    const Json& range = doc["actions_per_state"];
    if (range.is_array() && range.size() == 2) {
      spec.min_actions = count(range[0], "actions_per_state");
      spec.max_actions = count(range[1], "actions_per_state");
    } else {
      spec.min_actions = spec.max_actions = count(range, "actions_per_state");
    }
  }
  if (doc.contains("gamma")) spec.gamma = number(doc["gamma"], "gamma");
  if (doc.contains("seed")) spec.seed = count(doc["seed"], "seed");
  if (doc.contains("structure")) {
    if (!doc["structure"].is_string()) parse_error("structure must be a string");
    spec.structure = parse_structure(doc["structure"].get<std::string>());
  }
  if (doc.contains("sparse_k")) spec.sparse_k = count(doc["sparse_k"], "sparse_k");
  if (doc.contains("beta")) spec.beta = number(doc["beta"], "beta");
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::io, "read failed on '" + path + "'");
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view data) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot create '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorKind::io, "write failed on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw Error(ErrorKind::io, "cannot rename into '" + path + "': " + ec.message());
  }
}

}  // namespace mdpgeo
