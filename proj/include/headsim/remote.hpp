#pragma once

// HTTP client for a remote model service covering the describe, plan,
// validate and relevance roles. Every failure (connection, timeout, HTTP
// status, malformed or out-of-contract reply) surfaces as BackendError so
// the callers in reasoning.hpp can fall back to the oracle.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "headsim/io.hpp"
#include "headsim/reasoning.hpp"

namespace headsim {

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // no trailing slash; may be empty
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw SchemaError("HEADSIM_BACKEND_URL", "expected scheme://host[:port][/path]");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) e.base_path = url.substr(path_start);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  if (e.scheme_host_port.size() <= scheme_end + 3) throw SchemaError("HEADSIM_BACKEND_URL", "missing host");
  return e;
}

/// Prompt templates with {{name}} placeholders. Defaults are built in; a
/// directory of <role>.txt files overrides them.
class PromptTemplates {
 public:
  PromptTemplates() {
    text_["describe"] =
        "You see a first-person street view while walking. Goal: {{goal}}.\n"
        "Describe each listed entity in one sentence, keeping its id.\n"
        "Entities:\n{{entities}}\n"
        "Reply as JSON: {\"descriptions\": [{\"id\": ..., \"text\": ...}]}";
    text_["plan"] =
        "You control where a walking pedestrian looks. Goal: {{goal}}.\n"
        "Pose: {{pose}}\nCurrently visible:\n{{entities}}\nRecent memory:\n{{memory}}\n"
        "Choose one head movement justified by one of these drivers: {{drivers}}.\n"
        "Reply as JSON: {\"driver\": ..., \"target_kind\": \"entity\"|\"orientation\"|\"none\", "
        "\"target_value\": ..., \"rationale\": ...}";
    text_["validate"] =
        "Two seconds from now the walker is predicted to see:\n{{entities}}\n"
        "The planned head movement is: {{planned}}\nGoal: {{goal}}. Allowed drivers: {{drivers}}.\n"
        "Reply as JSON: {\"decision\": \"keep\"|\"replace\"|\"cancel\", \"replacement\": {...}}";
    text_["relevance"] =
        "Goal: {{goal}}\nMemory entry:\n{{entities}}\n"
        "Rate how relevant this entry is to the goal from 0 to 10. Reply as JSON: {\"score\": ...}";
  }

  /// Replaces defaults with any <role>.txt found in `dir`.
  void load_directory(const std::filesystem::path& dir) {
    for (auto& [role, text] : text_) {
      const auto file = dir / (role + ".txt");
      if (std::filesystem::exists(file)) text = read_text(file.string());
    }
  }

  std::string render(const std::string& role, const std::map<std::string, std::string>& vars) const {
    std::string out = text_.at(role);
    for (const auto& [key, value] : vars) {
      const std::string token = "{{" + key + "}}";
      for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size())) {
        out.replace(pos, token.size(), value);
      }
    }
    return out;
  }

  const std::string& raw(const std::string& role) const { return text_.at(role); }

 private:
  std::map<std::string, std::string> text_;
};

struct RemoteOptions {
  std::string url;
  std::string token;
  std::chrono::milliseconds describe_timeout{5000};
  std::chrono::milliseconds plan_timeout{10000};
  std::chrono::milliseconds validate_timeout{3000};
  std::chrono::milliseconds relevance_timeout{3000};
  PromptTemplates templates;

  /// Reads HEADSIM_BACKEND_URL and HEADSIM_BACKEND_TOKEN. Returns nullopt
  /// when no URL is configured.
  static std::optional<RemoteOptions> from_environment() {
    const char* url = std::getenv("HEADSIM_BACKEND_URL");
    if (!url || !*url) return std::nullopt;
    RemoteOptions o;
    o.url = url;
    if (const char* tok = std::getenv("HEADSIM_BACKEND_TOKEN")) o.token = tok;
    return o;
  }
};

namespace detail {

inline json snapshot_json(const EntitySnapshot& e) {
  json tags = json::array();
  for (Tag t : e.tags.to_vector()) tags.push_back(std::string(tag_name(t)));
  return {{"id", e.id},
          {"class", e.class_label},
          {"tags", tags},
          {"agent", e.is_agent},
          {"range_m", e.range},
          {"bearing_deg", rad_to_deg(e.bearing)},
          {"elevation_deg", rad_to_deg(e.elevation)},
          {"hint", e.description_hint}};
}

inline std::string entity_lines(const std::vector<EntitySnapshot>& entities) {
  std::string s;
  for (const auto& e : entities) {
    s += "- " + e.id + ": " + e.class_label;
    if (!e.tags.empty()) s += " [" + tag_list(e.tags) + "]";
    s += ", " + format_fixed(e.range) + " m, bearing " + format_fixed(rad_to_deg(e.bearing)) + " deg\n";
  }
  return s.empty() ? "(none)\n" : s;
}

inline json drivers_json(const DriverSet& d) {
  json arr = json::array();
  for (Driver x : d.to_vector()) arr.push_back(std::string(driver_name(x)));
  return arr;
}

inline std::string drivers_text(const DriverSet& d) {
  std::string s;
  for (Driver x : d.to_vector()) s += (s.empty() ? "" : ", ") + std::string(driver_name(x));
  return s;
}

inline json pose_json(const Pose& p) {
  return {{"t", p.t}, {"position", to_json(p.position)}, {"heading_yaw_deg", rad_to_deg(p.heading.yaw())}};
}

/// Decodes {driver, target_kind, target_value, rationale}. target_kind
/// "none" yields nullopt.
inline std::optional<ActionReason> decode_action(const json& j, double issued_at) {
  if (!j.is_object()) throw BackendError("action reply is not an object");
  const std::string kind = j.value("target_kind", "");
  if (kind == "none") return std::nullopt;
  if (!j.contains("driver") || !j.at("driver").is_string()) throw BackendError("action reply lacks a driver");
  const auto driver = parse_driver(j.at("driver").get<std::string>());
  if (!driver) throw BackendError("unknown driver '" + j.at("driver").get<std::string>() + "'");
  ActionReason a;
  a.driver = *driver;
  a.issued_at = issued_at;
  if (!j.contains("rationale") || !j.at("rationale").is_string()) throw BackendError("action reply lacks a rationale");
  a.rationale = j.at("rationale").get<std::string>();
  if (!j.contains("target_value")) throw BackendError("action reply lacks target_value");
  const json& v = j.at("target_value");
  if (kind == "entity") {
    if (!v.is_string()) throw BackendError("entity target must be a string id");
    a.target = v.get<std::string>();
  } else if (kind == "orientation") {
    if (!v.is_array() || v.size() != 4) throw BackendError("orientation target must be [w, x, y, z]");
    try {
      a.target = UnitQuaternion::checked(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
    } catch (const std::exception& ex) {
      throw BackendError(std::string("bad orientation target: ") + ex.what());
    }
  } else {
    throw BackendError("unknown target_kind '" + kind + "'");
  }
  return a;
}

inline json encode_action(const ActionReason& a) {
  json j{{"driver", std::string(driver_name(a.driver))}, {"rationale", a.rationale}};
  if (const auto* id = a.target_entity()) {
    j["target_kind"] = "entity";
    j["target_value"] = *id;
  } else {
    j["target_kind"] = "orientation";
    j["target_value"] = to_json(*a.target_orientation());
  }
  return j;
}

}  // namespace detail

/// Posts one JSON document per call to <url>/<role>.
class RemoteClient {
 public:
  explicit RemoteClient(RemoteOptions opts) : opts_(std::move(opts)), endpoint_(parse_endpoint(opts_.url)) {}

  const RemoteOptions& options() const { return opts_; }

  json call(const std::string& role, json body, std::chrono::milliseconds timeout) const {
    body["role"] = role;
    body["prompt_template_id"] = role;
    httplib::Client cli(endpoint_.scheme_host_port);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!opts_.token.empty()) headers.emplace("Authorization", "Bearer " + opts_.token);
    auto res = cli.Post(endpoint_.base_path + "/" + role, headers, body.dump(), "application/json");
    if (!res) throw BackendError(role + ": transport error (" + httplib::to_string(res.error()) + ")");
    if (res->status != 200) throw BackendError(role + ": HTTP " + std::to_string(res->status));
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw BackendError(role + ": reply is not JSON");
    }
  }

 private:
  RemoteOptions opts_;
  Endpoint endpoint_;
};

class RemoteBackend final : public ReasoningBackend {
 public:
  explicit RemoteBackend(RemoteOptions opts) : client_(std::move(opts)) {}

  std::string name() const override { return "remote"; }

  std::vector<EntityDescription> describe(const Observation& obs, const Goal& goal) override {
    json ents = json::array();
    for (const auto& e : obs.entities) ents.push_back(detail::snapshot_json(e));
    json body{{"goal", goal.text},
              {"pose", detail::pose_json(obs.body)},
              {"entities", ents},
              {"prompt", templates().render("describe", {{"goal", goal.text},
                                                         {"entities", detail::entity_lines(obs.entities)}})}};
    const json reply = client_.call("describe", std::move(body), client_.options().describe_timeout);
    if (!reply.contains("descriptions") || !reply.at("descriptions").is_array()) {
      throw BackendError("describe: reply lacks descriptions");
    }
    std::vector<EntityDescription> out;
    for (const auto& d : reply.at("descriptions")) {
      if (!d.is_object() || !d.contains("id") || !d.contains("text") || !d.at("id").is_string() ||
          !d.at("text").is_string()) {
        throw BackendError("describe: malformed description");
      }
      out.push_back({d.at("id").get<std::string>(), d.at("text").get<std::string>()});
    }
    return out;
  }

  std::optional<ActionReason> plan(const PlanRequest& req) override {
    if (!req.fmm || req.fmm->empty()) throw ContractViolation("plan needs at least one memory entry");
    const MemoryEntry& latest = req.fmm->latest();
    std::vector<EntitySnapshot> visible = latest.objects;
    visible.insert(visible.end(), latest.agents.begin(), latest.agents.end());
    json ents = json::array();
    for (const auto& e : visible) ents.push_back(detail::snapshot_json(e));
    json excerpt = json::array();
    std::string memory_text;
    for (const auto& e : req.fmm->entries()) {
      excerpt.push_back(memory_entry_to_json(e));
      if (e.action) {
        memory_text += "- t=" + detail::format_fixed(e.t) + " " + std::string(driver_name(e.action->driver)) + ": " +
                       e.action->rationale + "\n";
      }
    }
    json body{{"goal", req.goal.text},
              {"pose", detail::pose_json(req.self_pose)},
              {"entities", ents},
              {"fmm_excerpt", excerpt},
              {"drivers", detail::drivers_json(req.drivers)},
              {"prompt", templates().render("plan", {{"goal", req.goal.text},
                                                     {"pose", detail::pose_json(req.self_pose).dump()},
                                                     {"entities", detail::entity_lines(visible)},
                                                     {"memory", memory_text.empty() ? "(none)\n" : memory_text},
                                                     {"drivers", detail::drivers_text(req.drivers)}})}};
    const json reply = client_.call("plan", std::move(body), client_.options().plan_timeout);
    return detail::decode_action(reply, req.t);
  }

  Verdict validate(const LookaheadBundle& b, const DriverSet& drivers) override {
    json ents = json::array();
    for (const auto& e : b.predicted.entities) ents.push_back(detail::snapshot_json(e));
    json history = json::array();
    for (const auto& a : b.executed) history.push_back(detail::encode_action(a));
    const std::string planned = b.planned ? detail::encode_action(*b.planned).dump() : "keep facing forward";
    json body{{"goal", b.goal.text},
              {"pose", detail::pose_json(b.predicted.body)},
              {"predicted_t", b.predicted_t},
              {"entities", ents},
              {"planned", b.planned ? detail::encode_action(*b.planned) : json(nullptr)},
              {"last_action", b.last_action ? detail::encode_action(*b.last_action) : json(nullptr)},
              {"executed", history},
              {"drivers", detail::drivers_json(drivers)},
              {"prompt", templates().render("validate", {{"goal", b.goal.text},
                                                         {"entities", detail::entity_lines(b.predicted.entities)},
                                                         {"planned", planned},
                                                         {"drivers", detail::drivers_text(drivers)}})}};
    const json reply = client_.call("validate", std::move(body), client_.options().validate_timeout);
    if (!reply.contains("decision") || !reply.at("decision").is_string()) {
      throw BackendError("validate: reply lacks a decision");
    }
    const std::string d = reply.at("decision").get<std::string>();
    Verdict v;
    if (d == "keep") return v;
    if (d == "cancel") {
      v.decision = Decision::Cancel;
      return v;
    }
    if (d != "replace") throw BackendError("validate: unknown decision '" + d + "'");
    if (!reply.contains("replacement")) throw BackendError("validate: replace without replacement");
    auto a = detail::decode_action(reply.at("replacement"), b.tick_t);
    if (!a) throw BackendError("validate: replacement has no target");
    v.decision = Decision::Replace;
    v.replacement = std::move(a);
    return v;
  }

 private:
  const PromptTemplates& templates() const { return client_.options().templates; }
  RemoteClient client_;
};

class RemoteRelevanceScorer final : public RelevanceScorer {
 public:
  explicit RemoteRelevanceScorer(RemoteOptions opts) : client_(std::move(opts)) {}

  double score(const MemoryEntry& entry, std::string_view goal) const override {
    std::vector<EntitySnapshot> all = entry.objects;
    all.insert(all.end(), entry.agents.begin(), entry.agents.end());
    json body{{"goal", std::string(goal)},
              {"entry", memory_entry_to_json(entry)},
              {"prompt", client_.options().templates.render(
                             "relevance", {{"goal", std::string(goal)}, {"entities", detail::entity_lines(all)}})}};
    const json reply = client_.call("relevance", std::move(body), client_.options().relevance_timeout);
    if (!reply.contains("score") || !reply.at("score").is_number()) throw BackendError("relevance: reply lacks a score");
    return reply.at("score").get<double>();
  }

 private:
  RemoteClient client_;
};

}  // namespace headsim
