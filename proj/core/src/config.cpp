#include "kondo/config.hpp"

#include <cctype>
#include <fstream>
#include <set>

namespace kondo {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kMnist: return "mnist";
    case ExperimentKind::kReversal: return "reversal";
    case ExperimentKind::kBanditGeometry: return "bandit-geometry";
    case ExperimentKind::kBanditGambling: return "bandit-gambling";
    case ExperimentKind::kSweepRate: return "sweep-rate";
    case ExperimentKind::kSweepLr: return "sweep-lr";
    case ExperimentKind::kSweepNoise: return "sweep-noise";
    case ExperimentKind::kSweepScaling: return "sweep-scaling";
  }
  return "?";
}

namespace {

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::kMnist, ExperimentKind::kReversal, ExperimentKind::kBanditGeometry,
                 ExperimentKind::kBanditGambling, ExperimentKind::kSweepRate, ExperimentKind::kSweepLr,
                 ExperimentKind::kSweepNoise, ExperimentKind::kSweepScaling})
    if (to_string(k) == name) return k;
  throw ConfigError("kind", "unknown experiment kind '" + name + "'");
}

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = raw(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key), "has the wrong type");
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& problem) {
  if (!ok) throw ConfigError(field, problem);
}

template <class E, class F>
void get_enum(Reader& r, const std::string& key, E& out, F parse) {
  std::string name;
  r.get(key, name);
  if (name.empty()) return;
  try {
    out = parse(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.path(key), e.what());
  }
}

GateConfig parse_gate(const json& j, const std::string& prefix) {
  GateConfig g;
  Reader r(j, prefix);
  get_enum(r, "mode", g.mode, parse_gate_mode);
  r.get("rate", g.rate);
  r.get("price", g.price);
  r.get("hard", g.hard);
  r.get("tau", g.tau);
  r.get("tau_rel", g.tau_rel);
  r.finish();
  require(g.rate > 0.0 && g.rate <= 1.0, r.path("rate"), "must be in (0, 1]");
  require(g.price >= 0.0, r.path("price"), "must be >= 0");
  require(g.tau >= 0.0, r.path("tau"), "must be >= 0");
  require(g.tau_rel > 0.0, r.path("tau_rel"), "must be > 0");
  return g;
}

PrioritySpec parse_priority(const json& j, const std::string& prefix) {
  PrioritySpec p;
  Reader r(j, prefix);
  get_enum(r, "kind", p.kind, parse_priority_kind);
  r.get("alpha", p.alpha);
  r.finish();
  require(p.alpha >= 0.0 && p.alpha <= 1.0, r.path("alpha"), "must be in [0, 1]");
  return p;
}

AlgoConfig parse_algo(const json& j, const std::string& prefix, std::string* label) {
  AlgoConfig a;
  Reader r(j, prefix);
  if (label) r.get("label", *label);
  get_enum(r, "method", a.method, parse_method);
  r.get("lr", a.lr);
  r.get("batch_size", a.batch_size);
  r.get("ppo_clip", a.ppo_clip);
  r.get("pmpo_alpha", a.pmpo_alpha);
  r.get("kl_coef", a.kl_coef);
  r.get("ppo_epochs", a.ppo_epochs);
  get_enum(r, "weighting", a.weighting, parse_weighting);
  get_enum(r, "dg_form", a.dg_form, parse_delight_form);
  r.get("dg_eta", a.dg_eta);
  if (const json* g = r.raw("gate")) a.gate = parse_gate(*g, r.path("gate"));
  if (const json* p = r.raw("priority")) a.priority = parse_priority(*p, r.path("priority"));
  r.finish();
  require(a.lr > 0.0, r.path("lr"), "must be > 0");
  require(a.batch_size > 0, r.path("batch_size"), "must be > 0");
  require(a.ppo_clip > 0.0 && a.ppo_clip < 1.0, r.path("ppo_clip"), "must be in (0, 1)");
  require(a.pmpo_alpha >= 0.0, r.path("pmpo_alpha"), "must be >= 0");
  require(a.dg_eta > 0.0, r.path("dg_eta"), "must be > 0");
  require(a.kl_coef == 0.0, r.path("kl_coef"), "only 0 is supported (no KL term)");
  require(a.ppo_epochs == 1, r.path("ppo_epochs"), "only a single epoch per batch is supported");
  return a;
}

json algo_json(const AlgoConfig& a) {
  return {{"method", to_string(a.method)},
          {"lr", a.lr},
          {"batch_size", a.batch_size},
          {"ppo_clip", a.ppo_clip},
          {"pmpo_alpha", a.pmpo_alpha},
          {"kl_coef", a.kl_coef},
          {"ppo_epochs", a.ppo_epochs},
          {"weighting", to_string(a.weighting)},
          {"dg_form", to_string(a.dg_form)},
          {"dg_eta", a.dg_eta},
          {"gate",
           {{"mode", to_string(a.gate.mode)},
            {"rate", a.gate.rate},
            {"price", a.gate.price},
            {"hard", a.gate.hard},
            {"tau", a.gate.tau},
            {"tau_rel", a.gate.tau_rel}}},
          {"priority", {{"kind", to_string(a.priority.kind)}, {"alpha", a.priority.alpha}}}};
}

bool filename_safe(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return true;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Reader r(doc, "");
  get_enum(r, "kind", c.kind, parse_kind);
  const bool reversal_sweep = doc.contains("sweep") && doc["sweep"].is_object() && doc["sweep"].contains("base") &&
                              doc["sweep"]["base"] == "reversal" && c.kind != ExperimentKind::kSweepScaling;
  const bool sequence =
      c.kind == ExperimentKind::kReversal || c.kind == ExperimentKind::kSweepScaling || reversal_sweep;
  c.baseline.kind = sequence ? BaselineKind::kGrouped : BaselineKind::kExpectedConfidence;

  r.get("seeds", c.seeds);
  r.get("steps", c.steps);
  r.get("eval_interval", c.eval_interval);
  r.get("output_dir", c.output_dir);
  r.get("workers", c.workers);
  r.get("record_wallclock", c.record_wallclock);
  r.get("debug_checks", c.debug_checks);
  r.get("cost_ratio", c.cost_ratio);
  r.get("eval_prompts", c.eval_prompts);

  json algo = json::object();
  if (const json* a = r.raw("algo")) {
    require(a->is_object(), "algo", "expected an object");
    algo = *a;
    parse_algo(algo, "algo", nullptr);  // validate the shared defaults on their own
  }
  if (const json* ms = r.raw("methods")) {
    require(ms->is_array(), "methods", "expected an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const std::string prefix = "methods." + std::to_string(i);
      require((*ms)[i].is_object(), prefix, "expected an object");
      json merged = algo;
      merged.merge_patch((*ms)[i]);
      MethodSpec m;
      m.algo = parse_algo(merged, prefix, &m.label);
      if (m.label.empty()) m.label = to_string(m.algo.method);
      require(filename_safe(m.label), prefix + ".label", "must be non-empty and use only [A-Za-z0-9._-]");
      require(labels.insert(m.label).second, prefix + ".label", "duplicate label '" + m.label + "'");
      c.methods.push_back(std::move(m));
    }
  }

  if (const json* n = r.raw("noise")) {
    Reader nr(*n, "noise");
    nr.get("delight_rel", c.noise.delight_rel);
    nr.get("delight_abs", c.noise.delight_abs);
    nr.get("logit", c.noise.logit);
    nr.get("reward", c.noise.reward);
    nr.get("gamble", c.noise.gamble);
    nr.get("gamble_action", c.noise.gamble_action);
    nr.get("in_update", c.noise.in_update);
    nr.finish();
    for (auto [name, v] : {std::pair{"delight_rel", c.noise.delight_rel}, {"delight_abs", c.noise.delight_abs},
                           {"logit", c.noise.logit}, {"reward", c.noise.reward}, {"gamble", c.noise.gamble}})
      require(v >= 0.0, nr.path(name), "must be >= 0");
  }
  if (const json* b = r.raw("baseline")) {
    Reader br(*b, "baseline");
    get_enum(br, "kind", c.baseline.kind, parse_baseline_kind);
    br.get("constant", c.baseline.constant);
    br.finish();
  }
  if (const json* m = r.raw("mlp")) {
    Reader mr(*m, "mlp");
    mr.get("hidden", c.mlp.hidden);
    mr.get("hidden_layers", c.mlp.hidden_layers);
    mr.finish();
    require(c.mlp.hidden > 0, "mlp.hidden", "must be > 0");
  }
  if (const json* m = r.raw("mnist")) {
    Reader mr(*m, "mnist");
    mr.get("synthetic", c.mnist.synthetic);
    mr.get("images_path", c.mnist.images_path);
    mr.get("labels_path", c.mnist.labels_path);
    mr.get("test_images_path", c.mnist.test_images_path);
    mr.get("test_labels_path", c.mnist.test_labels_path);
    mr.get("eval_size", c.mnist.eval_size);
    if (const json* s = mr.raw("synthetic_spec")) {
      Reader sr(*s, "mnist.synthetic_spec");
      auto& sp = c.mnist.synthetic_spec;
      sr.get("train_size", sp.train_size);
      sr.get("test_size", sp.test_size);
      sr.get("seed", sp.seed);
      sr.get("styles", sp.styles);
      sr.get("points", sp.points);
      sr.get("jitter", sp.jitter);
      sr.get("max_shift", sp.max_shift);
      sr.get("max_blend", sp.max_blend);
      sr.get("pixel_noise", sp.pixel_noise);
      sr.finish();
      require(sp.train_size > 0, "mnist.synthetic_spec.train_size", "must be > 0");
      require(sp.test_size > 0, "mnist.synthetic_spec.test_size", "must be > 0");
      require(sp.styles > 0, "mnist.synthetic_spec.styles", "must be > 0");
      require(sp.points >= 2, "mnist.synthetic_spec.points", "must be >= 2");
      require(sp.jitter >= 0.0, "mnist.synthetic_spec.jitter", "must be >= 0");
      require(sp.max_shift >= 0, "mnist.synthetic_spec.max_shift", "must be >= 0");
      require(sp.max_blend >= 0.0 && sp.max_blend < 1.0, "mnist.synthetic_spec.max_blend", "must be in [0, 1)");
      require(sp.pixel_noise >= 0.0, "mnist.synthetic_spec.pixel_noise", "must be >= 0");
    }
    mr.finish();
    if (!c.mnist.synthetic) {
      require(!c.mnist.images_path.empty(), "mnist.images_path", "required when mnist.synthetic is false");
      require(!c.mnist.labels_path.empty(), "mnist.labels_path", "required when mnist.synthetic is false");
    }
  }
  if (const json* v = r.raw("reversal")) {
    Reader vr(*v, "reversal");
    vr.get("vocab", c.reversal.vocab);
    vr.get("length", c.reversal.length);
    vr.get("prompts", c.reversal.prompts);
    vr.get("responses", c.reversal.responses);
    vr.get("kappa", c.reversal.kappa);
    vr.finish();
    try {
      validate(c.reversal);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("reversal", e.what());
    }
  }
  if (const json* t = r.raw("model")) {
    Reader tr(*t, "model");
    tr.get("separator", c.transformer.separator);
    tr.get("d_model", c.transformer.d_model);
    tr.get("layers", c.transformer.layers);
    tr.get("heads", c.transformer.heads);
    tr.get("ff", c.transformer.ff);
    tr.get("init_std", c.transformer.init_std);
    tr.get("max_len", c.transformer.max_len);
    tr.finish();
    require(c.transformer.heads > 0 && c.transformer.d_model % c.transformer.heads == 0, "model.heads",
            "must divide model.d_model");
  }
  if (const json* g = r.raw("gate_dump")) {
    Reader gr(*g, "gate_dump");
    gr.get("start", c.gate_dump.start);
    gr.get("count", c.gate_dump.count);
    gr.finish();
    require(c.gate_dump.count >= 0, "gate_dump.count", "must be >= 0");
  }
  if (const json* s = r.raw("sweep")) {
    Reader sr(*s, "sweep");
    sr.get("key", c.sweep.key);
    sr.get("base", c.sweep.base);
    if (const json* vals = sr.raw("values")) {
      require(vals->is_array(), "sweep.values", "expected an array");
      c.sweep.values.assign(vals->begin(), vals->end());
    }
    sr.finish();
  }
  r.finish();

  // Sweep kinds have a conventional key.
  if (c.sweep.key.empty()) {
    if (c.kind == ExperimentKind::kSweepRate) c.sweep.key = "algo.gate.rate";
    if (c.kind == ExperimentKind::kSweepLr) c.sweep.key = "algo.lr";
    if (c.kind == ExperimentKind::kSweepNoise) c.sweep.key = "noise.delight_rel";
    if (c.kind == ExperimentKind::kSweepScaling) c.sweep.key = "reversal.vocab";
  }

  require(!c.seeds.empty(), "seeds", "must list at least one seed");
  require(std::set(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds", "must be distinct");
  require(c.steps > 0, "steps", "must be > 0");
  require(c.eval_interval > 0, "eval_interval", "must be > 0");
  require(c.workers >= 1, "workers", "must be >= 1");
  require(c.cost_ratio >= 0.0, "cost_ratio", "must be >= 0");
  require(!c.output_dir.empty(), "output_dir", "must be non-empty");
  const bool trains = c.kind != ExperimentKind::kBanditGeometry && c.kind != ExperimentKind::kBanditGambling;
  if (trains) require(!c.methods.empty(), "methods", "must list at least one method");
  const bool sweeps = c.kind == ExperimentKind::kSweepRate || c.kind == ExperimentKind::kSweepLr ||
                      c.kind == ExperimentKind::kSweepNoise || c.kind == ExperimentKind::kSweepScaling;
  if (sweeps) require(!c.sweep.values.empty(), "sweep.values", "must list at least one value");
  require(c.sweep.base == "mnist" || c.sweep.base == "reversal", "sweep.base", "must be mnist or reversal");
  if (sequence) {
    require(c.baseline.kind != BaselineKind::kExpectedConfidence && c.baseline.kind != BaselineKind::kOracle,
            "baseline.kind", "not defined for sequence episodes");
    if (c.baseline.kind == BaselineKind::kGrouped)
      require(c.reversal.responses >= 2, "reversal.responses", "grouped baseline needs at least 2 responses");
    require(c.transformer.max_len >= 2 * c.reversal.length, "model.max_len", "must be at least 2 * reversal.length");
  } else if (c.baseline.kind == BaselineKind::kGrouped) {
    throw ConfigError("baseline.kind", "grouped baseline is only defined for sequence episodes");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json methods = json::array();
  for (const auto& m : c.methods) {
    json j = algo_json(m.algo);
    j["label"] = m.label;
    methods.push_back(std::move(j));
  }
  const auto& sp = c.mnist.synthetic_spec;
  return {
      {"kind", to_string(c.kind)},
      {"seeds", c.seeds},
      {"steps", c.steps},
      {"eval_interval", c.eval_interval},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"record_wallclock", c.record_wallclock},
      {"debug_checks", c.debug_checks},
      {"cost_ratio", c.cost_ratio},
      {"eval_prompts", c.eval_prompts},
      {"methods", methods},
      {"noise",
       {{"delight_rel", c.noise.delight_rel},
        {"delight_abs", c.noise.delight_abs},
        {"logit", c.noise.logit},
        {"reward", c.noise.reward},
        {"gamble", c.noise.gamble},
        {"gamble_action", c.noise.gamble_action},
        {"in_update", c.noise.in_update}}},
      {"baseline", {{"kind", to_string(c.baseline.kind)}, {"constant", c.baseline.constant}}},
      {"mlp", {{"hidden", c.mlp.hidden}, {"hidden_layers", c.mlp.hidden_layers}}},
      {"mnist",
       {{"synthetic", c.mnist.synthetic},
        {"images_path", c.mnist.images_path},
        {"labels_path", c.mnist.labels_path},
        {"test_images_path", c.mnist.test_images_path},
        {"test_labels_path", c.mnist.test_labels_path},
        {"eval_size", c.mnist.eval_size},
        {"synthetic_spec",
         {{"train_size", sp.train_size},
          {"test_size", sp.test_size},
          {"seed", sp.seed},
          {"styles", sp.styles},
          {"points", sp.points},
          {"jitter", sp.jitter},
          {"max_shift", sp.max_shift},
          {"max_blend", sp.max_blend},
          {"pixel_noise", sp.pixel_noise}}}}},
      {"reversal",
       {{"vocab", c.reversal.vocab},
        {"length", c.reversal.length},
        {"prompts", c.reversal.prompts},
        {"responses", c.reversal.responses},
        {"kappa", c.reversal.kappa}}},
      {"model",
       {{"separator", c.transformer.separator},
        {"d_model", c.transformer.d_model},
        {"layers", c.transformer.layers},
        {"heads", c.transformer.heads},
        {"ff", c.transformer.ff},
        {"init_std", c.transformer.init_std},
        {"max_len", c.transformer.max_len}}},
      {"gate_dump", {{"start", c.gate_dump.start}, {"count", c.gate_dump.count}}},
      {"sweep", {{"key", c.sweep.key}, {"values", c.sweep.values}, {"base", c.sweep.base}}},
  };
}

void set_path(json& doc, const std::string& dotted, const json& value) {
  if (dotted.empty()) throw ConfigError("<override>", "empty key");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(dotted, "malformed key");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw ConfigError(dotted, "'" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError(dotted, "array index out of range");
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError(dotted, "'" + part + "' is below a non-object value");
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(doc, key, value);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error(path.string() + ": not valid JSON");
  return doc;
}

}  // namespace kondo
