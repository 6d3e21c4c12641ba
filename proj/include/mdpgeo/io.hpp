#pragma once

// File formats: MDP and report documents as JSON, VI traces as CSV.

#include <string>
#include <string_view>

#include "json.hpp"

#include "mdpgeo/analysis.hpp"
#include "mdpgeo/core.hpp"
#include "mdpgeo/gen.hpp"
#include "mdpgeo/solvers.hpp"
#include "mdpgeo/transforms.hpp"

namespace mdpgeo {

using Json = nlohmann::ordered_json;

/// {version: 1, n_states, gamma, actions: [{id, state, probs, reward}]}.
/// Unknown fields are rejected. Throws Error(parse) on malformed documents;
/// the resulting Mdp is also run through validate().
Mdp mdp_from_json(const Json& doc);
Json mdp_to_json(const Mdp& mdp);
Mdp parse_mdp(std::string_view text);
/// Pretty-printed, newline-terminated; doubles keep round-trip precision.
std::string dump_mdp(const Mdp& mdp);

/// Header t,span_v,span_dv,active_actions,stop_reason_final,value_0..; the
/// stop reason is filled on the last row only. Numbers use 17 significant
/// digits.
std::string trace_to_csv(const RunTrace& trace);
/// Reads back values, spans, active counts and the stop reason. Greedy
/// policies are not part of the file and come back empty; alpha and the
/// schedule are not recorded either, so the caller supplies them.
RunTrace trace_from_csv(std::string_view text, double alpha = 1.0, bool synchronous = true, bool filtered = false);
/// SHA-256 of trace_to_csv(trace).
std::string trace_digest(const RunTrace& trace);

Json policy_to_json(const Mdp& mdp, const Policy& pi);
Json certificate_to_json(const ConvergenceCertificate& cert);
Json log_to_json(const TransformLog& log);

Json gen_spec_to_json(const GenSpec& spec);
/// Missing fields keep their defaults; unknown fields are rejected.
GenSpec gen_spec_from_json(const Json& doc);

/// "%.17g".
std::string format_double(double x);

/// Throws Error(io) when the file cannot be read.
std::string read_file(const std::string& path);
/// Writes to a sibling temporary and renames it into place. Throws Error(io).
void write_file_atomic(const std::string& path, std::string_view data);

}  // namespace mdpgeo
