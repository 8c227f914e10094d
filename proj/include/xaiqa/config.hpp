#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <filesystem>
#include <string>
#include <vector>

#include "xaiqa/classifier.hpp"
#include "xaiqa/embedder.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/explainer.hpp"
#include "xaiqa/generator.hpp"
#include "xaiqa/hardness.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/parallel.hpp"
#include "xaiqa/promptkit.hpp"
#include "xaiqa/stats.hpp"

namespace xaiqa {

// Pipeline settings, grouped by section. The file is JSON with the same
// shape as defaults(); any key may be overridden from the environment as
// XAIQA_<SECTION>_<KEY> (e.g. XAIQA_EXPLAINER_NUM_ITERATIONS=200) and from
// command-line flags, in that order of precedence (flags win).
class PipelineConfig {
 public:
  static Json defaults() {
    return Json{
        {"paths", Json{{"corpus", ""}, {"vocab", ""}, {"output_dir", "out"}}},
        {"classifier", Json{{"scorer", "builtin"},
                            {"endpoint", ""},
                            {"learning_rate", 1.0},
                            {"epochs", 100},
                            {"batch_size", 16},
                            {"weight_decay", 0.01},
                            {"seed", 13}}},
        {"explainer", Json{{"num_iterations", 100},
                           {"mask_probability", 0.1},
                           {"mask_token", "[MASK]"},
                           {"seed", 0},
                           {"min_count_guard", 5},
                           {"batch_size", 64}}},
        {"embedder", Json{{"provider", "builtin_hash_tfidf"}, {"dim", 512}, {"endpoint", ""}, {"seed", 0}}},
        {"generation", Json{{"method", "xaiqa"},
                            {"template", std::string(kDefaultQuestionTemplate)},
                            {"r", kDefaultTopR},
                            {"ratio", "1:1"},
                            {"seed", 0}}},
        {"hardness", Json{{"apply_stemming", true}}},
        {"metrics", Json{{"bootstrap_iterations", 1000}, {"bootstrap_level", 0.95}, {"bootstrap_seed", 0}}},
        {"prompt", Json{{"max_units", 8192},
                        {"unit", "approx_tokens"},
                        {"chars_per_token", 4.0},
                        {"num_examples", kDefaultExampleCount},
                        {"window_radius", kDefaultWindowRadius},
                        {"seed", 0},
                        {"recover_missing_brace", false}}},
        {"runtime", Json{{"workers", 0}}},
    };
  }

  PipelineConfig() : values_(defaults()) {}

  // Loads `path` (if non-empty) over the defaults and applies environment
  // overrides. Problems are appended to `errors` when given, so callers can
  // report them together with validate(); otherwise they are thrown at once.
  static PipelineConfig load(const std::filesystem::path& path, char** envp = nullptr,
                             std::vector<std::string>* pending = nullptr) {
    PipelineConfig cfg;
    std::vector<std::string> errors;
    if (!path.empty()) {
      Json file;
      try {
        file = Json::parse(read_text(path));
      } catch (const Json::exception& e) {
        fail(ErrorKind::config, path.string() + ": " + e.what());
      } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
      }
      if (!file.is_object()) fail(ErrorKind::config, path.string() + ": top level must be an object");
      for (const auto& [section, body] : file.items()) {
        if (!cfg.values_.contains(section)) {
          errors.push_back("unknown section \"" + section + "\"");
          continue;
        }
        if (!body.is_object()) {
          errors.push_back("section \"" + section + "\" must be an object");
          continue;
        }
        for (const auto& [key, value] : body.items()) {
          if (auto err = cfg.assign(section, key, value)) errors.push_back(*err);
        }
      }
    }
    if (envp) {
      for (char** e = envp; *e; ++e) {
        const std::string entry(*e);
        if (entry.rfind("XAIQA_", 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        if (auto err = cfg.apply_env(entry.substr(6, eq - 6), entry.substr(eq + 1))) errors.push_back(*err);
      }
    }
    if (pending) {
      pending->insert(pending->end(), errors.begin(), errors.end());
    } else if (!errors.empty()) {
      throw_errors(errors);
    }
    return cfg;
  }

  // Sets section.key from a string, converting to the type of the default.
  void set_string(const std::string& section, const std::string& key, const std::string& raw) {
    if (auto err = try_set_string(section, key, raw)) fail(ErrorKind::config, *err);
  }

  std::optional<std::string> try_set_string(const std::string& section, const std::string& key,
                                            const std::string& raw) {
    return assign(section, key, parse_like(section, key, raw));
  }

  template <typename T>
  void set(const std::string& section, const std::string& key, const T& value) {
    if (auto err = assign(section, key, Json(value))) fail(ErrorKind::config, *err);
  }

  // Every section that has a seed gets this one (the --seed flag).
  void set_all_seeds(std::uint64_t seed) {
    values_["classifier"]["seed"] = seed;
    values_["explainer"]["seed"] = seed;
    values_["embedder"]["seed"] = seed;
    values_["generation"]["seed"] = seed;
    values_["metrics"]["bootstrap_seed"] = seed;
    values_["prompt"]["seed"] = seed;
  }

  const Json& json() const { return values_; }
  const Json& section(const std::string& name) const { return values_.at(name); }

  template <typename T>
  T get(const std::string& section, const std::string& key) const {
    return values_.at(section).at(key).get<T>();
  }

  // Lists every invalid setting, after any problems collected earlier;
  // throws one config error naming all of them.
  void validate(std::vector<std::string> errors = {}) const {
    const auto check = [&](bool ok, const std::string& msg) {
      if (!ok) errors.push_back(msg);
    };
    check(get<double>("classifier", "learning_rate") > 0, "classifier.learning_rate must be > 0");
    check(get<long long>("classifier", "epochs") >= 0, "classifier.epochs must be >= 0");
    check(get<long long>("classifier", "batch_size") >= 1, "classifier.batch_size must be >= 1");
    check(get<double>("classifier", "weight_decay") >= 0, "classifier.weight_decay must be >= 0");
    const auto scorer = get<std::string>("classifier", "scorer");
    check(scorer == "builtin" || scorer == "remote", "classifier.scorer must be builtin or remote");
    check(scorer != "remote" || !get<std::string>("classifier", "endpoint").empty(),
          "classifier.endpoint is required for the remote scorer");
    check(get<long long>("explainer", "num_iterations") >= 1, "explainer.num_iterations must be >= 1");
    const double p = get<double>("explainer", "mask_probability");
    check(p > 0 && p < 1, "explainer.mask_probability must lie in (0, 1)");
    check(get<long long>("explainer", "min_count_guard") >= 1, "explainer.min_count_guard must be >= 1");
    check(get<long long>("explainer", "batch_size") >= 1, "explainer.batch_size must be >= 1");
    const auto provider = get<std::string>("embedder", "provider");
    check(provider == "builtin_hash_tfidf" || provider == "remote",
          "embedder.provider must be builtin_hash_tfidf or remote");
    check(provider != "builtin_hash_tfidf" || get<long long>("embedder", "dim") >= 8, "embedder.dim must be >= 8");
    check(provider != "remote" || !get<std::string>("embedder", "endpoint").empty(),
          "embedder.endpoint is required for the remote provider");
    const auto method = get<std::string>("generation", "method");
    check(method == "xaiqa" || method == "cosine" || method == "random",
          "generation.method must be xaiqa, cosine or random");
    check(get<std::string>("generation", "template").find("{X}") != std::string::npos,
          "generation.template must contain {X}");
    check(get<long long>("generation", "r") >= 1, "generation.r must be >= 1");
    try {
      const auto ratio = parse_ratio(get<std::string>("generation", "ratio"));
      check(ratio.base >= 1, "generation.ratio needs a positive base part");
    } catch (const Error& e) {
      errors.push_back(std::string("generation.ratio: ") + e.what());
    }
    check(get<long long>("metrics", "bootstrap_iterations") >= 1, "metrics.bootstrap_iterations must be >= 1");
    const double level = get<double>("metrics", "bootstrap_level");
    check(level > 0 && level < 1, "metrics.bootstrap_level must lie in (0, 1)");
    check(get<long long>("prompt", "max_units") >= 1, "prompt.max_units must be >= 1");
    const auto unit = get<std::string>("prompt", "unit");
    check(unit == "chars" || unit == "approx_tokens", "prompt.unit must be chars or approx_tokens");
    check(get<double>("prompt", "chars_per_token") > 0, "prompt.chars_per_token must be > 0");
    check(get<long long>("prompt", "window_radius") >= 0, "prompt.window_radius must be >= 0");
    check(get<long long>("runtime", "workers") >= 0, "runtime.workers must be >= 0");
    if (!errors.empty()) throw_errors(errors);
  }

  // Typed views for the modules.
  TrainConfig train_config() const {
    TrainConfig c;
    const auto& s = section("classifier");
    c.learning_rate = s.at("learning_rate").get<double>();
    c.epochs = s.at("epochs").get<int>();
    c.batch_size = s.at("batch_size").get<int>();
    c.weight_decay = s.at("weight_decay").get<double>();
    c.seed = s.at("seed").get<std::uint64_t>();
    return c;
  }

  MspConfig msp_config() const {
    MspConfig c;
    const auto& s = section("explainer");
    c.num_iterations = s.at("num_iterations").get<int>();
    c.mask_probability = s.at("mask_probability").get<double>();
    c.mask_token = s.at("mask_token").get<std::string>();
    c.seed = s.at("seed").get<std::uint64_t>();
    c.min_count_guard = s.at("min_count_guard").get<int>();
    c.batch_size = s.at("batch_size").get<std::size_t>();
    c.workers = workers();
    return c;
  }

  EmbedderConfig embedder_config() const {
    EmbedderConfig c;
    const auto& s = section("embedder");
    c.provider = s.at("provider").get<std::string>() == "remote" ? EmbedderProvider::remote
                                                                 : EmbedderProvider::builtin_hash_tfidf;
    c.dim = s.at("dim").get<std::size_t>();
    c.endpoint = s.at("endpoint").get<std::string>();
    c.seed = s.at("seed").get<std::uint64_t>();
    return c;
  }

  QcloConfig qclo_config() const {
    QcloConfig c;
    c.apply_stemming = get<bool>("hardness", "apply_stemming");
    return c;
  }

  stats::BootstrapConfig bootstrap_config() const {
    stats::BootstrapConfig c;
    c.iterations = get<std::size_t>("metrics", "bootstrap_iterations");
    c.level = get<double>("metrics", "bootstrap_level");
    c.seed = get<std::uint64_t>("metrics", "bootstrap_seed");
    c.workers = workers();
    return c;
  }

  PromptBudget prompt_budget() const {
    PromptBudget b;
    b.max_units = get<std::size_t>("prompt", "max_units");
    b.unit = get<std::string>("prompt", "unit") == "chars" ? BudgetUnit::chars : BudgetUnit::approx_tokens;
    b.chars_per_token = get<double>("prompt", "chars_per_token");
    return b;
  }

  std::size_t workers() const {
    const auto w = get<std::size_t>("runtime", "workers");
    return w == 0 ? default_workers() : w;
  }

  [[noreturn]] static void throw_errors(const std::vector<std::string>& errors) {
    std::string msg = std::to_string(errors.size()) + " configuration problem(s): ";
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (i) msg += "; ";
      msg += errors[i];
    }
    fail(ErrorKind::config, msg);
  }

 private:
  std::optional<std::string> assign(const std::string& section, const std::string& key, const Json& value) {
    if (!values_.contains(section)) return "unknown section \"" + section + "\"";
    auto& sec = values_[section];
    if (!sec.contains(key)) return "unknown key \"" + section + "." + key + "\"";
    auto& slot = sec[key];
    const bool ok = (slot.is_boolean() && value.is_boolean()) || (slot.is_string() && value.is_string()) ||
                    (slot.is_number_float() && value.is_number()) ||
                    (slot.is_number_integer() && value.is_number_integer());
    if (!ok) return section + "." + key + " has the wrong type";
    if (slot.is_number_float()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
    return std::nullopt;
  }

  Json parse_like(const std::string& section, const std::string& key, const std::string& raw) const {
    const auto sec = values_.find(section);
    if (sec == values_.end() || !sec->contains(key)) return Json(raw);
    const auto& slot = sec->at(key);
    if (slot.is_string()) return Json(raw);
    try {
      auto parsed = Json::parse(raw);
      return parsed;
    } catch (const Json::exception&) {
      return Json(raw);  // leaves the type check to report the problem
    }
  }

  // NAME is SECTION_KEY with KEY possibly containing underscores.
  std::optional<std::string> apply_env(const std::string& name, const std::string& raw) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    const auto underscore = lower.find('_');
    if (underscore == std::string::npos) return "environment variable XAIQA_" + name + " names no key";
    const auto section = lower.substr(0, underscore);
    const auto key = lower.substr(underscore + 1);
    if (auto err = assign(section, key, parse_like(section, key, raw))) {
      return "XAIQA_" + name + ": " + *err;
    }
    return std::nullopt;
  }

  Json values_;
};

}  // namespace xaiqa
