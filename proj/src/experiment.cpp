#include "gbandit/experiment.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "gbandit/analysis.h"

namespace gbandit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string> &parts, const std::string &sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string pointer_token(const std::string &key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Line of every value in a JSON text, keyed by JSON pointer. Member values
// map to the line of their key. Assumes the text already parsed cleanly.
class LineIndex {
 public:
  explicit LineIndex(const std::string &text) : text_(text) {
    for (std::size_t i = 0; i < text_.size(); ++i)
      if (text_[i] == '\n') newlines_.push_back(i);
    walk("");
  }

  int line(std::string ptr) const {
    for (;;) {
      auto it = lines_.find(ptr);
      if (it != lines_.end()) return it->second;
      if (ptr.empty()) return 1;
      ptr.erase(ptr.rfind('/'));
    }
  }

  int line_of_offset(std::size_t pos) const {
    return 1 + static_cast<int>(std::lower_bound(newlines_.begin(), newlines_.end(), pos) - newlines_.begin());
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string read_string() {
    std::string out;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  void walk(const std::string &ptr) {
    skip_ws();
    if (pos_ >= text_.size()) return;
    lines_.emplace(ptr, line_of_offset(pos_));
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == '}') break;
        const std::size_t key_pos = pos_;
        const std::string child = ptr + "/" + pointer_token(read_string());
        lines_.emplace(child, line_of_offset(key_pos));
        skip_ws();
        ++pos_;  // ':'
        walk(child);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      for (std::size_t i = 0;; ++i) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == ']') break;
        walk(ptr + "/" + std::to_string(i));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '"') {
      read_string();
    } else {
      while (pos_ < text_.size() && std::string_view(",]} \t\r\n").find(text_[pos_]) == std::string_view::npos) ++pos_;
    }
  }

  const std::string &text_;
  std::vector<std::size_t> newlines_;
  std::map<std::string, int> lines_;
  std::size_t pos_ = 0;
};

class Validator {
 public:
  Validator(const std::string &path, const LineIndex &lines) : path_(path), lines_(lines) {}

  void error(const std::string &ptr, const std::string &msg) {
    diags_.push_back(path_ + ":" + std::to_string(lines_.line(ptr)) + ": " + (ptr.empty() ? "/" : ptr) + ": " + msg);
  }

  bool ok() const { return diags_.empty(); }
  std::vector<std::string> take() { return std::move(diags_); }

  bool object(const ojson &j, const std::string &ptr, std::initializer_list<const char *> allowed) {
    if (!j.is_object()) {
      error(ptr, "expected an object");
      return false;
    }
    for (const auto &[key, value] : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char *a) { return key == a; })) {
        std::vector<std::string> names(allowed.begin(), allowed.end());
        error(ptr + "/" + pointer_token(key), "unknown key '" + key + "' (allowed: " + join(names, ", ") + ")");
      }
    }
    return true;
  }

  // Bounds are nonnegative everywhere they are used.
  template <class Int>
  std::optional<Int> integer(const ojson &j, const std::string &ptr, Int lo, Int hi) {
    if (!j.is_number_integer()) {
      error(ptr, "expected an integer");
      return std::nullopt;
    }
    const bool in_range = j.is_number_unsigned() && j.get<std::uint64_t>() >= static_cast<std::uint64_t>(lo) &&
                          j.get<std::uint64_t>() <= static_cast<std::uint64_t>(hi);
    if (!in_range) {
      error(ptr, "integer out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return static_cast<Int>(j.get<std::uint64_t>());
  }

  std::optional<double> number(const ojson &j, const std::string &ptr, double lo, double hi) {
    if (!j.is_number()) {
      error(ptr, "expected a number");
      return std::nullopt;
    }
    const double x = j.get<double>();
    if (!(x >= lo && x <= hi)) {
      error(ptr, "number " + format_real(x) + " out of range [" + format_real(lo) + ", " + format_real(hi) + "]");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> choice(const ojson &j, const std::string &ptr, std::initializer_list<const char *> options) {
    std::vector<std::string> names(options.begin(), options.end());
    if (!j.is_string() || std::find(names.begin(), names.end(), j.get<std::string>()) == names.end()) {
      error(ptr, "expected one of: " + join(names, ", "));
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<bool> boolean(const ojson &j, const std::string &ptr) {
    if (!j.is_boolean()) {
      error(ptr, "expected true or false");
      return std::nullopt;
    }
    return j.get<bool>();
  }

  std::optional<std::string> string(const ojson &j, const std::string &ptr) {
    if (!j.is_string() || j.get<std::string>().empty()) {
      error(ptr, "expected a nonempty string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  // "auto" or a number in range.
  std::optional<std::optional<double>> auto_or_number(const ojson &j, const std::string &ptr, double lo, double hi,
                                                      bool &bad) {
    if (j.is_string() && j.get<std::string>() == "auto") return std::optional<double>{};
    if (!j.is_number()) {
      error(ptr, "expected \"auto\" or a number");
      bad = true;
      return std::nullopt;
    }
    auto x = number(j, ptr, lo, hi);
    if (!x) {
      bad = true;
      return std::nullopt;
    }
    return std::optional<double>{*x};
  }

 private:
  std::string path_;
  const LineIndex &lines_;
  std::vector<std::string> diags_;
};

template <class T>
void assign(std::optional<T> v, T &out) {
  if (v) out = *v;
}

void parse_model(const ojson &j, Validator &v, ModelConfig &out) {
  if (!v.object(j, "/model", {"preset", "sizes", "generate", "file", "seed"})) return;
  const int sources = static_cast<int>(j.contains("preset")) + j.contains("generate") + j.contains("file");
  if (sources != 1) {
    v.error("/model", "exactly one of 'preset', 'generate' or 'file' is required");
    return;
  }
  if (j.contains("seed")) assign(v.integer<std::uint64_t>(j["seed"], "/model/seed", 0, UINT64_MAX), out.seed);
  if (j.contains("sizes") && !j.contains("preset")) v.error("/model/sizes", "'sizes' applies only to presets");
  if (j.contains("preset")) {
    out.source = ModelConfig::Source::kPreset;
    assign(v.choice(j["preset"], "/model/preset", {"sponsored_search", "sum_product_toy"}), out.preset);
    if (j.contains("sizes")) {
      const auto &s = j["sizes"];
      if (out.preset != "sponsored_search") v.error("/model/sizes", "only the sponsored_search preset takes sizes");
      if (v.object(s, "/model/sizes", {"cities", "costs", "hotels"})) {
        if (s.contains("cities")) assign(v.integer<int>(s["cities"], "/model/sizes/cities", 2, 64), out.sizes.cities);
        if (s.contains("costs")) assign(v.integer<int>(s["costs"], "/model/sizes/costs", 2, 64), out.sizes.costs);
        if (s.contains("hotels")) assign(v.integer<int>(s["hotels"], "/model/sizes/hotels", 2, 64), out.sizes.hotels);
      }
    }
  } else if (j.contains("generate")) {
    out.source = ModelConfig::Source::kGenerate;
    const auto &g = j["generate"];
    const std::string p = "/model/generate";
    if (!v.object(g, p, {"n_action", "n_context", "arity", "domain_min", "domain_max", "family", "width"})) return;
    auto &spec = out.generator;
    if (g.contains("n_action")) assign(v.integer<int>(g["n_action"], p + "/n_action", 1, 4096), spec.n_action);
    if (g.contains("n_context")) assign(v.integer<int>(g["n_context"], p + "/n_context", 0, 4096), spec.n_context);
    if (g.contains("arity")) assign(v.integer<int>(g["arity"], p + "/arity", 1, 16), spec.arity);
    if (g.contains("domain_min")) assign(v.integer<int>(g["domain_min"], p + "/domain_min", 2, 1024), spec.domain_min);
    if (g.contains("domain_max")) assign(v.integer<int>(g["domain_max"], p + "/domain_max", 2, 1024), spec.domain_max);
    if (g.contains("width")) assign(v.integer<int>(g["width"], p + "/width", 2, 64), spec.width);
    if (g.contains("family")) {
      auto f = v.choice(g["family"], p + "/family", {"tree", "sparse"});
      if (f) spec.family = *f == "tree" ? GraphFamily::kTree : GraphFamily::kSparse;
    }
    if (spec.domain_max < spec.domain_min) v.error(p + "/domain_max", "domain_max is below domain_min");
  } else {
    out.source = ModelConfig::Source::kFile;
    assign(v.string(j["file"], "/model/file"), out.file);
  }
}

void parse_contexts(const ojson &j, Validator &v, ContextConfig &out) {
  if (!v.object(j, "/contexts", {"kind", "marginals", "support", "replay"})) return;
  if (!j.contains("kind")) {
    v.error("/contexts", "missing 'kind'");
    return;
  }
  auto kind = v.choice(j["kind"], "/contexts/kind", {"uniform", "marginals", "support", "replay", "rank_greedy"});
  if (!kind) return;
  auto forbid = [&](const char *key, const std::string &allowed_kind) {
    if (j.contains(key) && *kind != allowed_kind)
      v.error(std::string("/contexts/") + key, std::string("'") + key + "' requires kind " + allowed_kind);
  };
  forbid("marginals", "marginals");
  forbid("support", "support");
  forbid("replay", "replay");
  if (*kind == "uniform") out.kind = ContextConfig::Kind::kUniform;
  if (*kind == "rank_greedy") out.kind = ContextConfig::Kind::kRankGreedy;
  if (*kind == "marginals") {
    out.kind = ContextConfig::Kind::kMarginals;
    if (!j.contains("marginals") || !j["marginals"].is_object()) {
      v.error("/contexts", "kind marginals needs a 'marginals' object of variable name to probabilities");
      return;
    }
    for (const auto &[name, probs] : j["marginals"].items()) {
      const std::string p = "/contexts/marginals/" + pointer_token(name);
      if (!probs.is_array() || probs.empty()) {
        v.error(p, "expected a nonempty array of probabilities");
        continue;
      }
      std::vector<double> dist;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        auto x = v.number(probs[i], p + "/" + std::to_string(i), 0.0, 1.0);
        dist.push_back(x.value_or(0.0));
      }
      out.marginals[name] = std::move(dist);
    }
  }
  if (*kind == "support") {
    out.kind = ContextConfig::Kind::kSupport;
    if (!j.contains("support") || !j["support"].is_array() || j["support"].empty()) {
      v.error("/contexts", "kind support needs a nonempty 'support' array of {context, weight}");
      return;
    }
    const auto &s = j["support"];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string p = "/contexts/support/" + std::to_string(i);
      if (!v.object(s[i], p, {"context", "weight"})) continue;
      if (!s[i].contains("context") || !s[i].contains("weight")) {
        v.error(p, "support entries need 'context' and 'weight'");
        continue;
      }
      std::vector<int> values;
      if (!s[i]["context"].is_array()) v.error(p + "/context", "expected an array of value indices");
      else
        for (std::size_t k = 0; k < s[i]["context"].size(); ++k)
          values.push_back(
              v.integer<int>(s[i]["context"][k], p + "/context/" + std::to_string(k), 0, 1 << 20).value_or(0));
      out.support.push_back(std::move(values));
      out.weights.push_back(v.number(s[i]["weight"], p + "/weight", 0.0, 1.0).value_or(0.0));
    }
  }
  if (*kind == "replay") {
    out.kind = ContextConfig::Kind::kReplay;
    if (!j.contains("replay")) v.error("/contexts", "kind replay needs a 'replay' file path");
    else assign(v.string(j["replay"], "/contexts/replay"), out.replay_file);
  }
}

void parse_noise(const ojson &j, Validator &v, NoiseModel &out) {
  if (!v.object(j, "/noise", {"kind", "half_width"})) return;
  if (j.contains("kind")) {
    auto k = v.choice(j["kind"], "/noise/kind", {"noiseless", "bernoulli", "truncated"});
    if (k) out.kind = *k == "noiseless" ? NoiseKind::kNoiseless
                      : *k == "bernoulli" ? NoiseKind::kBernoulli
                                          : NoiseKind::kTruncatedAdditive;
  }
  if (j.contains("half_width")) {
    if (out.kind != NoiseKind::kTruncatedAdditive) v.error("/noise/half_width", "half_width requires kind truncated");
    assign(v.number(j["half_width"], "/noise/half_width", 0.0, 0.5), out.half_width);
  } else if (out.kind == NoiseKind::kTruncatedAdditive) {
    v.error("/noise", "kind truncated needs 'half_width'");
  }
}

void parse_run(const ojson &j, Validator &v, RunConfig &out) {
  if (!v.object(j, "/run", {"horizon", "epsilon", "delta", "estimator", "query_cap", "confidence_scale"})) return;
  if (!j.contains("horizon")) v.error("/run", "missing 'horizon'");
  else assign(v.integer<std::int64_t>(j["horizon"], "/run/horizon", 0, 1'000'000'000), out.horizon);
  bool bad = false;
  if (j.contains("epsilon")) assign(v.auto_or_number(j["epsilon"], "/run/epsilon", 0.0, 1.0, bad), out.epsilon);
  if (j.contains("delta")) assign(v.auto_or_number(j["delta"], "/run/delta", 1e-300, 1.0, bad), out.delta);
  if (j.contains("query_cap")) assign(v.auto_or_number(j["query_cap"], "/run/query_cap", 1.0, 1e300, bad), out.query_cap);
  if (j.contains("confidence_scale"))
    assign(v.number(j["confidence_scale"], "/run/confidence_scale", 1e-12, 1e12), out.confidence_scale);
  if (j.contains("estimator")) {
    auto e = v.choice(j["estimator"], "/run/estimator", {"kwik", "deterministic"});
    if (e) out.estimator = *e == "kwik" ? EstimatorMode::kKwik : EstimatorMode::kDeterministic;
  }
  if (out.estimator == EstimatorMode::kKwik && out.epsilon && *out.epsilon <= 0.0)
    v.error("/run/epsilon", "kwik estimator needs epsilon > 0");
}

void parse_analysis(const ojson &j, Validator &v, AnalysisConfig &out) {
  if (!v.object(j, "/analysis", {"rank", "exponent_fit", "tradeoff"})) return;
  if (j.contains("rank")) assign(v.boolean(j["rank"], "/analysis/rank"), out.rank);
  if (j.contains("exponent_fit")) assign(v.boolean(j["exponent_fit"], "/analysis/exponent_fit"), out.exponent_fit);
  if (j.contains("tradeoff")) assign(v.boolean(j["tradeoff"], "/analysis/tradeoff"), out.tradeoff);
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const ExperimentConfig &config, const std::string &p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(config.base_dir) / path;
}

GeneratedInstance build_model(const ExperimentConfig &config) {
  const auto &m = config.model;
  switch (m.source) {
    case ModelConfig::Source::kPreset:
      if (m.preset == "sum_product_toy") {
        auto toy = sum_product_toy();
        toy.truth = normalize(toy.model, toy.truth);
        return toy;
      }
      return sponsored_search(m.seed, m.sizes);
    case ModelConfig::Source::kGenerate: {
      GeneratorSpec spec = m.generator;
      spec.seed = m.seed;
      return generate_model(spec);
    }
    case ModelConfig::Source::kFile:
      return load_instance(ojson::parse(read_file(resolve(config, m.file))));
  }
  throw std::logic_error("unknown model source");
}

std::string variable_name(const GeneratedInstance &inst, int id) {
  const auto i = static_cast<std::size_t>(id);
  return i < inst.names.size() && !inst.names[i].empty() ? inst.names[i] : "v" + std::to_string(id);
}

ContextSource build_contexts(const ExperimentConfig &config, const GeneratedInstance &inst, Validator *v) {
  const auto &model = inst.model;
  const auto &cc = config.contexts;
  const auto &ctx = model.context_variables();
  auto fail = [&](const std::string &ptr, const std::string &msg) -> ContextSource {
    if (v) v->error(ptr, msg);
    throw ModelError(msg);
  };
  switch (cc.kind) {
    case ContextConfig::Kind::kUniform: return ContextSource::uniform(model);
    case ContextConfig::Kind::kMarginals: {
      std::map<std::string, int> by_name;
      for (int c : ctx) by_name[variable_name(inst, c)] = c;
      std::vector<std::vector<double>> marginals(ctx.size());
      bool bad = false;
      for (const auto &[name, dist] : cc.marginals) {
        const std::string p = "/contexts/marginals/" + pointer_token(name);
        auto it = by_name.find(name);
        if (it == by_name.end()) {
          if (v) v->error(p, "'" + name + "' is not a context variable");
          bad = true;
          continue;
        }
        const int d = model.domain_size(it->second);
        double sum = 0.0;
        for (double x : dist) sum += x;
        if (dist.size() != static_cast<std::size_t>(d)) {
          if (v) v->error(p, "variable '" + name + "' has " + std::to_string(d) + " values, got " +
                                 std::to_string(dist.size()) + " probabilities");
          bad = true;
        } else if (std::abs(sum - 1.0) > 1e-12) {
          if (v) v->error(p, "probabilities for variable '" + name + "' sum to " + format_real(sum) + ", not 1");
          bad = true;
        }
        marginals[static_cast<std::size_t>(std::find(ctx.begin(), ctx.end(), it->second) - ctx.begin())] = dist;
      }
      for (int c : ctx)
        if (!cc.marginals.count(variable_name(inst, c))) {
          if (v) v->error("/contexts/marginals", "no marginal for context variable '" + variable_name(inst, c) + "'");
          bad = true;
        }
      if (bad) throw ModelError("invalid marginals");
      return ContextSource::iid_marginals(model, std::move(marginals));
    }
    case ContextConfig::Kind::kSupport: {
      std::vector<JointAssignment> contexts;
      for (std::size_t i = 0; i < cc.support.size(); ++i) {
        const auto &vals = cc.support[i];
        const std::string p = "/contexts/support/" + std::to_string(i) + "/context";
        if (vals.size() != ctx.size())
          return fail(p, "expected " + std::to_string(ctx.size()) + " context values, got " + std::to_string(vals.size()));
        JointAssignment x(model.num_variables());
        for (std::size_t k = 0; k < ctx.size(); ++k) {
          if (vals[k] >= model.domain_size(ctx[k]))
            return fail(p + "/" + std::to_string(k), "value " + std::to_string(vals[k]) + " out of range for '" +
                                                         variable_name(inst, ctx[k]) + "'");
          x.set(ctx[k], vals[k]);
        }
        contexts.push_back(std::move(x));
      }
      try {
        return ContextSource::iid_support(model, std::move(contexts), cc.weights);
      } catch (const ModelError &e) {
        return fail("/contexts/support", e.what());
      }
    }
    case ContextConfig::Kind::kReplay: {
      std::vector<JointAssignment> seq;
      try {
        seq = parse_replay(model, read_file(resolve(config, cc.replay_file)));
      } catch (const std::exception &e) {
        return fail("/contexts/replay", e.what());
      }
      if (seq.size() < static_cast<std::size_t>(config.run.horizon))
        return fail("/contexts/replay", "replay has " + std::to_string(seq.size()) + " contexts, horizon is " +
                                            std::to_string(config.run.horizon));
      return ContextSource::replay(model, std::move(seq));
    }
    case ContextConfig::Kind::kRankGreedy: {
      const auto order = rank_greedy_contexts(model);
      std::vector<JointAssignment> seq;
      seq.reserve(static_cast<std::size_t>(config.run.horizon));
      for (std::int64_t t = 0; t < config.run.horizon; ++t) seq.push_back(order[static_cast<std::size_t>(t) % order.size()]);
      return ContextSource::replay(model, std::move(seq));
    }
  }
  throw std::logic_error("unknown context kind");
}

ExperimentConfig parse_config_impl(const std::string &text, const std::string &path) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError({path + ":" + std::to_string(line) + ": /: malformed JSON: " + e.what()});
  }
  const LineIndex lines(text);
  Validator v(path, lines);
  ExperimentConfig config;
  config.base_dir = fs::path(path).parent_path().string();
  if (config.base_dir.empty()) config.base_dir = ".";

  if (!v.object(doc, "", {"model", "contexts", "noise", "run", "seeds", "output", "analysis"})) throw ConfigError(v.take());
  if (!doc.contains("model")) v.error("", "missing 'model'");
  else parse_model(doc["model"], v, config.model);
  if (doc.contains("contexts")) parse_contexts(doc["contexts"], v, config.contexts);
  // Model-dependent checks still run when only unrelated sections failed.
  const bool structure_ok = v.ok();
  if (doc.contains("noise")) parse_noise(doc["noise"], v, config.noise);
  if (!doc.contains("run")) v.error("", "missing 'run'");
  else parse_run(doc["run"], v, config.run);
  if (doc.contains("seeds")) {
    const auto &s = doc["seeds"];
    if (!s.is_array() || s.empty()) v.error("/seeds", "expected a nonempty array of seeds");
    else {
      config.seeds.clear();
      std::set<std::uint64_t> seen;
      for (std::size_t i = 0; i < s.size(); ++i) {
        auto seed = v.integer<std::uint64_t>(s[i], "/seeds/" + std::to_string(i), 0, UINT64_MAX);
        if (seed && !seen.insert(*seed).second) v.error("/seeds/" + std::to_string(i), "duplicate seed");
        if (seed) config.seeds.push_back(*seed);
      }
    }
  }
  if (doc.contains("output")) assign(v.string(doc["output"], "/output"), config.output);
  if (doc.contains("analysis")) parse_analysis(doc["analysis"], v, config.analysis);

  if (config.run.estimator == EstimatorMode::kDeterministic && config.noise.kind != NoiseKind::kNoiseless)
    v.error(doc.contains("noise") ? "/noise" : "/run/estimator", "the deterministic estimator needs noiseless payoffs");
  if (!structure_ok) throw ConfigError(v.take());

  // Semantic checks that need the model.
  std::optional<GeneratedInstance> inst;
  try {
    inst = build_model(config);
  } catch (const std::exception &e) {
    v.error("/model", e.what());
    throw ConfigError(v.take());
  }
  if (inst->model.action_variables().empty()) v.error("/model", "the model has no action variables");
  std::optional<ContextSource> source;
  try {
    source = build_contexts(config, *inst, &v);
  } catch (const ModelError &e) {
    if (v.ok()) v.error("/contexts", e.what());
  }
  if (config.analysis.tradeoff && source && !source->is_iid())
    v.error("/analysis/tradeoff", "the tradeoff table needs i.i.d. contexts (uniform, marginals or support)");
  if (!v.ok()) throw ConfigError(v.take());
  return config;
}

double resolved_query_cap(const ExperimentConfig &config, const DecomposableModel &model) {
  const auto td = decompose(action_subgraph(build_interaction_graph(model)));
  const BestAct planner(model, td, default_action(model));
  return resolve_kwik_params(config.run, planner).query_cap;
}

void write_atomic(const fs::path &path, const std::string &content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string());
  }
}

struct SeedOutcome {
  std::vector<double> curve;
  std::size_t interrupted = 0;
  std::optional<std::string> error;
};

std::string context_label(const DecomposableModel &model, const JointAssignment &x) {
  return model.context_variables().empty() ? std::string() : format_values(x, model.context_variables());
}

std::string summary_csv(const ExperimentConfig &config, const std::vector<SeedOutcome> &outcomes,
                        const std::optional<RankResult> &rank_result) {
  std::vector<std::vector<double>> curves;
  std::vector<std::size_t> interrupted;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].error) continue;
    curves.push_back(outcomes[i].curve);
    interrupted.push_back(outcomes[i].interrupted);
    seeds.push_back(config.seeds[i]);
  }
  const auto s = summarize(curves, interrupted);
  std::string out = "metric,key,value\n";
  auto row = [&](const std::string &metric, const std::string &key, const std::string &value) {
    out += metric + "," + key + "," + value + "\n";
  };
  row("horizon", "", std::to_string(config.run.horizon));
  row("seeds", "", std::to_string(curves.size()));
  if (!s.mean.empty()) {
    for (std::size_t t : checkpoints(static_cast<std::size_t>(config.run.horizon))) {
      row("mean_cum_regret", std::to_string(t), format_real(s.mean[t - 1]));
      row("stderr_cum_regret", std::to_string(t), format_real(s.stderr_[t - 1]));
    }
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    row("final_cum_regret", std::to_string(seeds[i]), format_real(curves[i].empty() ? 0.0 : curves[i].back()));
    row("interrupted_rounds", std::to_string(seeds[i]), std::to_string(interrupted[i]));
    total += interrupted[i];
  }
  row("interrupted_total", "", std::to_string(total));
  row("interrupted_mean", "", format_real(seeds.empty() ? 0.0 : static_cast<double>(total) / seeds.size()));
  if (config.analysis.exponent_fit && config.run.horizon >= 100 && !curves.empty()) {
    row("regret_exponent", "", format_real(s.fit.slope));
    row("zero_regret", "", s.fit.zero_regret ? "1" : "0");
    row("exponent_points", "", std::to_string(s.fit.points));
  }
  if (rank_result) row("rank", rank_result->exact ? "exhaustive" : "sampled", std::to_string(rank_result->rank));
  return out;
}

std::string tradeoff_csv(const Instance &inst, const TreeDecomposition &td, double horizon) {
  const auto &model = inst.generated.model;
  const auto &src = inst.contexts;
  auto contexts = all_contexts(model);
  std::stable_sort(contexts.begin(), contexts.end(), [&](const auto &a, const auto &b) {
    return src.probability(a) < src.probability(b);
  });
  // Candidates: nothing excluded, then the k least likely contexts.
  std::vector<std::vector<JointAssignment>> candidates{{}};
  for (std::size_t k = 1; k < contexts.size(); ++k)
    candidates.emplace_back(contexts.begin(), contexts.begin() + static_cast<std::ptrdiff_t>(k));
  const auto rows = restricted_rank_tradeoff(model, src, candidates, td, horizon);
  std::string out = "excluded,excluded_mass,restricted_rank,bound\n";
  for (const auto &r : rows) {
    std::vector<std::string> labels;
    for (const auto &x : r.excluded) labels.push_back(context_label(model, x));
    out += join(labels, ";") + "," + format_real(r.excluded_mass) + "," + std::to_string(r.restricted_rank) + "," +
           format_real(r.bound) + "\n";
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error(diagnostics.empty() ? "invalid config" : join(diagnostics, "\n")),
      diagnostics_(std::move(diagnostics)) {}

ExperimentConfig parse_config(const std::string &text, const std::string &path) { return parse_config_impl(text, path); }

ExperimentConfig load_config(const std::string &path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception &e) {
    throw ConfigError({path + ":0: /: " + e.what()});
  }
  return parse_config(text, path);
}

std::string format_real(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Instance build_instance(const ExperimentConfig &config) {
  GeneratedInstance gen = build_model(config);
  ContextSource src = build_contexts(config, gen, nullptr);
  return {std::move(gen), std::move(src)};
}

nlohmann::ordered_json resolved_config(const ExperimentConfig &config) {
  ojson j;
  const auto &m = config.model;
  ojson model;
  switch (m.source) {
    case ModelConfig::Source::kPreset:
      model["preset"] = m.preset;
      if (m.preset == "sponsored_search")
        model["sizes"] = {{"cities", m.sizes.cities}, {"costs", m.sizes.costs}, {"hotels", m.sizes.hotels}};
      break;
    case ModelConfig::Source::kGenerate: {
      const auto &g = m.generator;
      model["generate"] = {{"n_action", g.n_action},     {"n_context", g.n_context},
                           {"arity", g.arity},           {"domain_min", g.domain_min},
                           {"domain_max", g.domain_max}, {"family", g.family == GraphFamily::kTree ? "tree" : "sparse"},
                           {"width", g.width}};
      break;
    }
    case ModelConfig::Source::kFile: model["file"] = resolve(config, m.file).lexically_normal().string(); break;
  }
  model["seed"] = m.seed;
  j["model"] = std::move(model);

  ojson ctx;
  const auto &c = config.contexts;
  switch (c.kind) {
    case ContextConfig::Kind::kUniform: ctx["kind"] = "uniform"; break;
    case ContextConfig::Kind::kRankGreedy: ctx["kind"] = "rank_greedy"; break;
    case ContextConfig::Kind::kMarginals: {
      ctx["kind"] = "marginals";
      ojson marg = ojson::object();
      for (const auto &[name, dist] : c.marginals) marg[name] = dist;
      ctx["marginals"] = std::move(marg);
      break;
    }
    case ContextConfig::Kind::kSupport: {
      ctx["kind"] = "support";
      ojson sup = ojson::array();
      for (std::size_t i = 0; i < c.support.size(); ++i) sup.push_back({{"context", c.support[i]}, {"weight", c.weights[i]}});
      ctx["support"] = std::move(sup);
      break;
    }
    case ContextConfig::Kind::kReplay:
      ctx["kind"] = "replay";
      ctx["replay"] = resolve(config, c.replay_file).lexically_normal().string();
      break;
  }
  j["contexts"] = std::move(ctx);

  ojson noise;
  noise["kind"] = config.noise.kind == NoiseKind::kNoiseless  ? "noiseless"
                  : config.noise.kind == NoiseKind::kBernoulli ? "bernoulli"
                                                               : "truncated";
  if (config.noise.kind == NoiseKind::kTruncatedAdditive) noise["half_width"] = config.noise.half_width;
  j["noise"] = std::move(noise);

  ojson run;
  run["horizon"] = config.run.horizon;
  run["estimator"] = config.run.estimator == EstimatorMode::kKwik ? "kwik" : "deterministic";
  run["epsilon"] = config.run.resolved_epsilon();
  run["delta"] = config.run.resolved_delta();
  if (config.run.estimator == EstimatorMode::kKwik) {
    const auto gen = build_model(config);
    run["query_cap"] = resolved_query_cap(config, gen.model);
    run["confidence_scale"] = config.run.confidence_scale;
  }
  j["run"] = std::move(run);
  j["seeds"] = config.seeds;
  j["output"] = config.output;
  j["analysis"] = {{"rank", config.analysis.rank},
                   {"exponent_fit", config.analysis.exponent_fit},
                   {"tradeoff", config.analysis.tradeoff}};
  return j;
}

std::size_t worker_count_from_env(std::size_t jobs) {
  std::size_t workers = 1;
  if (const char *env = std::getenv("GBANDIT_WORKERS")) {
    std::size_t parsed = 0;
    const std::string_view s(env);
    auto res = std::from_chars(s.data(), s.data() + s.size(), parsed);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && parsed > 0) workers = parsed;
  }
  return std::max<std::size_t>(1, std::min(workers, jobs));
}

std::string rounds_csv(const DecomposableModel &model, const std::vector<RoundRecord> &records) {
  std::string out = "t,context,action,interrupted,payoff,inst_regret,cum_regret,oracle_calls\n";
  double cum = 0.0;
  for (const auto &r : records) {
    cum += r.instantaneous_regret;
    out += std::to_string(r.t);
    out += ',' + context_label(model, r.played);
    out += ',' + format_values(r.played, model.action_variables());
    out += r.interrupted ? ",1," : ",0,";
    if (r.observed_payoff) out += format_real(*r.observed_payoff);
    out += ',' + format_real(r.instantaneous_regret);
    out += ',' + format_real(cum);
    out += ',' + std::to_string(r.oracle_calls);
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig &config) {
  ExperimentResult result;
  const Instance inst = build_instance(config);
  const auto &model = inst.generated.model;
  const auto td = decompose(action_subgraph(build_interaction_graph(model)));
  const fs::path dir(config.output);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const std::uint64_t seed = config.seeds[i];
      auto &o = outcomes[i];
      try {
        Environment env(model, inst.generated.truth, inst.contexts, config.noise, seed);
        RunConfig rc = config.run;
        rc.seed = seed;
        const auto records = run(model, td, env, rc);
        o.curve = cumulative_regret(records);
        for (const auto &r : records) o.interrupted += r.interrupted;
        write_atomic(dir / ("rounds_" + std::to_string(seed) + ".csv"), rounds_csv(model, records));
      } catch (const std::exception &e) {
        o.error = "seed " + std::to_string(seed) + ": " + e.what();
      }
    }
  };
  const std::size_t workers = worker_count_from_env(config.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();

  ojson files = ojson::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].error) result.errors.push_back(*outcomes[i].error);
    else files.push_back("rounds_" + std::to_string(config.seeds[i]) + ".csv");
  }

  auto emit = [&](const std::string &name, const std::string &content) {
    try {
      write_atomic(dir / name, content);
      files.push_back(name);
    } catch (const std::exception &e) {
      result.errors.push_back(e.what());
    }
  };

  std::optional<RankResult> rank_result;
  if (config.analysis.rank) {
    CoefficientMatrixView view;
    view.model = &model;
    if (column_count(view) > view.column_cap) {
      view.strategy = CoefficientMatrixView::Strategy::kSampled;
      view.seed = config.model.seed;
    }
    rank_result = rank(view);
  }
  emit("summary.csv", summary_csv(config, outcomes, rank_result));
  emit("model.dump", dump_instance(model, inst.generated.truth, inst.generated.names).dump(2) + "\n");
  if (config.analysis.tradeoff) {
    try {
      emit("tradeoff.csv", tradeoff_csv(inst, td, static_cast<double>(std::max<std::int64_t>(config.run.horizon, 2))));
    } catch (const ModelError &e) {
      result.errors.push_back(std::string("tradeoff: ") + e.what());
    }
  }

  result.complete = result.errors.empty();
  ojson manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = 1;
  manifest["library_version"] = kLibraryVersion;
  manifest["rng_scheme"] = kRngScheme;
  manifest["schemas"] = {{"rounds", kRoundsSchema},
                         {"summary", kSummarySchema},
                         {"tradeoff", kTradeoffSchema},
                         {"model", "gbandit-model/v1"}};
  manifest["config"] = resolved_config(config);
  manifest["status"] = result.complete ? "complete" : "partial";
  manifest["errors"] = result.errors;
  manifest["files"] = files;
  try {
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception &e) {
    result.complete = false;
    result.errors.push_back(e.what());
  }
  for (const auto &f : files) result.files.push_back(f.get<std::string>());
  if (result.complete) result.files.push_back("manifest.json");
  return result;
}

std::string to_string(CompareReport::Status status) {
  switch (status) {
    case CompareReport::Status::kIdentical: return "identical";
    case CompareReport::Status::kDifferent: return "different";
    case CompareReport::Status::kNonComparable: return "non-comparable";
  }
  return "?";
}

namespace {

ojson read_manifest(const std::string &dir) {
  const fs::path p = fs::path(dir) / "manifest.json";
  if (!fs::exists(p)) throw std::runtime_error("missing manifest: " + p.string());
  return ojson::parse(read_file(p));
}

std::map<std::string, std::string> read_summary(const std::string &dir) {
  std::map<std::string, std::string> out;
  const fs::path p = fs::path(dir) / "summary.csv";
  if (!fs::exists(p)) return out;
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    if (last != std::string::npos) out[line.substr(0, last)] = line.substr(last + 1);
  }
  return out;
}

void flatten(const ojson &j, const std::string &ptr, std::map<std::string, std::string> &out) {
  if (j.is_object()) {
    for (const auto &[k, v] : j.items()) flatten(v, ptr + "/" + pointer_token(k), out);
  } else {
    out[ptr] = j.dump();
  }
}

}  // namespace

CompareReport compare_runs(const std::string &dir_a, const std::string &dir_b) {
  const ojson a = read_manifest(dir_a);
  const ojson b = read_manifest(dir_b);
  CompareReport report;
  report.status = CompareReport::Status::kIdentical;

  if (a.at("config").at("model") != b.at("config").at("model")) {
    report.status = CompareReport::Status::kNonComparable;
    report.lines.push_back("non-comparable: models differ (" + a["config"]["model"].dump() + " vs " +
                           b["config"]["model"].dump() + ")");
  }

  std::map<std::string, std::string> ca;
  std::map<std::string, std::string> cb;
  flatten(a.at("config"), "", ca);
  flatten(b.at("config"), "", cb);
  std::set<std::string> keys;
  for (const auto &[k, _] : ca) keys.insert(k);
  for (const auto &[k, _] : cb) keys.insert(k);
  for (const auto &k : keys) {
    if (k == "/output") continue;
    const std::string va = ca.count(k) ? ca[k] : "(absent)";
    const std::string vb = cb.count(k) ? cb[k] : "(absent)";
    if (va != vb) report.lines.push_back("config " + k + ": " + va + " -> " + vb);
  }

  const auto sa = read_summary(dir_a);
  const auto sb = read_summary(dir_b);
  std::set<std::string> metrics;
  for (const auto &[k, _] : sa) metrics.insert(k);
  for (const auto &[k, _] : sb) metrics.insert(k);
  for (const auto &k : metrics) {
    const std::string va = sa.count(k) ? sa.at(k) : "(absent)";
    const std::string vb = sb.count(k) ? sb.at(k) : "(absent)";
    if (va != vb) report.lines.push_back("summary " + k + ": " + va + " -> " + vb);
  }
  if (sa.count("interrupted_mean,") && sb.count("interrupted_mean,")) {
    const double ia = std::stod(sa.at("interrupted_mean,"));
    const double ib = std::stod(sb.at("interrupted_mean,"));
    if (ia > 0.0 && ia != ib) report.lines.push_back("abstain ratio (B/A): " + format_real(ib / ia));
  }

  bool files_same = a.at("files") == b.at("files");
  if (files_same)
    for (const auto &f : a.at("files"))
      if (read_file(fs::path(dir_a) / f.get<std::string>()) != read_file(fs::path(dir_b) / f.get<std::string>()))
        files_same = false;
  if (!files_same && report.lines.empty()) report.lines.push_back("output files differ");

  if (report.status != CompareReport::Status::kNonComparable)
    report.status = report.lines.empty() ? CompareReport::Status::kIdentical : CompareReport::Status::kDifferent;
  if (report.status == CompareReport::Status::kIdentical) report.lines.push_back("identical");
  return report;
}

nlohmann::ordered_json decomposition_dump(const ExperimentConfig &config) {
  const auto gen = build_model(config);
  const auto &model = gen.model;
  const auto graph = action_subgraph(build_interaction_graph(model));
  const auto td = decompose(graph);
  const BestAct planner(model, td, default_action(model));
  ojson j;
  j["width"] = td.width;
  j["root"] = td.root;
  j["call_bound"] = planner.call_bound();
  ojson names = ojson::array();
  for (int a : graph.vertices) names.push_back(variable_name(gen, a));
  j["action_variables"] = std::move(names);
  ojson bags = ojson::array();
  for (const auto &bag : td.bags) {
    ojson b = ojson::array();
    for (int v : bag) b.push_back(variable_name(gen, v));
    bags.push_back(std::move(b));
  }
  j["bags"] = std::move(bags);
  j["bag_ids"] = td.bags;
  ojson edges = ojson::array();
  for (const auto &[x, y] : td.tree_edges) edges.push_back({x, y});
  j["tree_edges"] = std::move(edges);
  return j;
}

}  // namespace gbandit
